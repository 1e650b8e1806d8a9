#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "kgalign/encoder.hpp"

namespace kgalign {

enum class AlignForm {
  Literal,  // -log[1 + sum exp(alpha (beta + pos - neg))]
  DualAmn,  // mean over anchors of log[1 + sum exp(alpha (beta + neg - pos))]
};

/// Inner-product similarity of two unit rows.
template <typename A, typename B>
auto similarity_out(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.dot(b);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Streaming log-sum-exp accumulator (max-shift form).
struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;  // sum of exp(x - max)

  void add(double x) {
    if (x <= max) {
      sum += std::exp(x - max);
    } else {
      sum = sum * std::exp(max - x) + 1.0;
      max = x;
    }
  }
  bool empty() const { return sum == 0.0; }
  double value() const { return empty() ? -std::numeric_limits<double>::infinity() : max + std::log(sum); }
};

/// A positive pair in local indices; for merged seeds anchor == counterpart.
struct LocalPair {
  std::uint32_t anchor;
  std::uint32_t counterpart;
};

struct AlignLossParams {
  double alpha = 15.0;
  double beta = 0.7;
  AlignForm form = AlignForm::Literal;
  std::size_t block_rows = 256;  // anchors per similarity block
};

/// Adds the gradient of sims = anchors * y^T for the pair block [begin, end).
template <typename Scalar>
void accumulate_similarity_grad(const Mat<Scalar>& y, const std::vector<LocalPair>& pairs, std::size_t begin,
                                std::size_t end, const Mat<Scalar>& d_sims, Mat<Scalar>& grad) {
  Mat<Scalar> anchors(end - begin, y.cols());
  for (std::size_t i = begin; i < end; ++i) anchors.row(i - begin) = y.row(pairs[i].anchor);
  const Mat<Scalar> d_anchor = d_sims * y;
  grad += d_sims.transpose() * anchors;
  for (std::size_t i = begin; i < end; ++i) grad.row(pairs[i].anchor) += d_anchor.row(i - begin);
}

/// Alignment loss against in-subgraph negatives (every other local node).
/// Adds its gradient w.r.t. `y` into `grad` when non-null.
template <typename Scalar>
double loss_align(const Mat<Scalar>& y, const std::vector<LocalPair>& pairs, const AlignLossParams& cfg,
                  Mat<Scalar>* grad = nullptr) {
  const Eigen::Index n = y.rows();
  if (pairs.empty()) return 0.0;
  const double alpha = cfg.alpha;
  const double sign = cfg.form == AlignForm::Literal ? -1.0 : 1.0;  // coefficient of neg similarity
  auto block_logits = [&](std::size_t begin, std::size_t end, Mat<Scalar>& sims, std::vector<double>& pos) {
    Mat<Scalar> anchors(end - begin, y.cols());
    pos.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      anchors.row(i - begin) = y.row(pairs[i].anchor);
      pos[i - begin] = static_cast<double>(y.row(pairs[i].anchor).dot(y.row(pairs[i].counterpart)));
    }
    sims = anchors * y.transpose();
  };
  auto logit = [&](double pos, double neg) {
    return cfg.form == AlignForm::Literal ? alpha * (cfg.beta + pos - neg) : alpha * (cfg.beta + neg - pos);
  };
  auto excluded = [&](const LocalPair& p, Eigen::Index j) {
    return j == static_cast<Eigen::Index>(p.anchor) || j == static_cast<Eigen::Index>(p.counterpart);
  };

  Mat<Scalar> sims;
  std::vector<double> pos;
  const std::size_t step = std::max<std::size_t>(1, cfg.block_rows);

  if (cfg.form == AlignForm::Literal) {
    // One global log(1 + sum exp(z)): first pass for the normalizer, second for gradients.
    LogSumExp lse;
    for (std::size_t b = 0; b < pairs.size(); b += step) {
      const std::size_t e = std::min(pairs.size(), b + step);
      block_logits(b, e, sims, pos);
      for (std::size_t i = b; i < e; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!excluded(pairs[i], j)) lse.add(logit(pos[i - b], static_cast<double>(sims(i - b, j))));
        }
      }
    }
    if (lse.empty()) return 0.0;
    const double total = softplus(lse.value());  // log(1 + sum exp z)
    if (grad) {
      for (std::size_t b = 0; b < pairs.size(); b += step) {
        const std::size_t e = std::min(pairs.size(), b + step);
        block_logits(b, e, sims, pos);
        Mat<Scalar> d_sims = Mat<Scalar>::Zero(sims.rows(), sims.cols());
        for (std::size_t i = b; i < e; ++i) {
          double d_pos = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (excluded(pairs[i], j)) continue;
            // dL/dz = -exp(z - total)
            const double dz = -std::exp(logit(pos[i - b], static_cast<double>(sims(i - b, j))) - total);
            d_pos += alpha * dz;
            d_sims(i - b, j) = static_cast<Scalar>(sign * alpha * dz);
          }
          const auto a = pairs[i].anchor, c = pairs[i].counterpart;
          grad->row(a) += static_cast<Scalar>(d_pos) * y.row(c);
          grad->row(c) += static_cast<Scalar>(d_pos) * y.row(a);
        }
        accumulate_similarity_grad(y, pairs, b, e, d_sims, *grad);
      }
    }
    return -total;
  }

  // Per-anchor softplus of the log-sum-exp, averaged over anchors.
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (std::size_t b = 0; b < pairs.size(); b += step) {
    const std::size_t e = std::min(pairs.size(), b + step);
    block_logits(b, e, sims, pos);
    Mat<Scalar> d_sims;
    if (grad) d_sims = Mat<Scalar>::Zero(sims.rows(), sims.cols());
    for (std::size_t i = b; i < e; ++i) {
      LogSumExp lse;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!excluded(pairs[i], j)) lse.add(logit(pos[i - b], static_cast<double>(sims(i - b, j))));
      }
      if (lse.empty()) continue;
      const double row = softplus(lse.value());
      loss += scale * row;
      if (!grad) continue;
      double d_pos = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (excluded(pairs[i], j)) continue;
        const double dz = scale * std::exp(logit(pos[i - b], static_cast<double>(sims(i - b, j))) - row);
        d_pos -= alpha * dz;
        d_sims(i - b, j) = static_cast<Scalar>(sign * alpha * dz);
      }
      const auto a = pairs[i].anchor, c = pairs[i].counterpart;
      grad->row(a) += static_cast<Scalar>(d_pos) * y.row(c);
      grad->row(c) += static_cast<Scalar>(d_pos) * y.row(a);
    }
    if (grad) accumulate_similarity_grad(y, pairs, b, e, d_sims, *grad);
  }
  return loss;
}

/// Rows scaled to unit length (zero rows stay zero).
template <typename Scalar>
Mat<Scalar> normalized_rows(const Mat<Scalar>& x) {
  Mat<Scalar> out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const Scalar norm = out.row(i).norm();
    if (norm > Scalar(0)) out.row(i) /= norm;
  }
  return out;
}

/// Backpropagates through row normalization: x_hat = x / |x|.
template <typename Scalar>
Mat<Scalar> normalize_backward(const Mat<Scalar>& x, const Mat<Scalar>& d_hat) {
  Mat<Scalar> dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar norm = x.row(i).norm();
    if (norm <= Scalar(0)) {
      dx.row(i).setZero();
      continue;
    }
    const auto hat = x.row(i) / norm;
    dx.row(i) = (d_hat.row(i) - hat * hat.dot(d_hat.row(i))) / norm;
  }
  return dx;
}

/// Cross-subgraph negative loss on normalized input representations:
/// -log[1 + sum_i sum_j exp(-anchor_i . negative_j)].
template <typename Scalar>
double loss_cross(const Mat<Scalar>& anchor_inputs, const Mat<Scalar>& negative_inputs,
                  Mat<Scalar>* d_anchor = nullptr, Mat<Scalar>* d_negative = nullptr) {
  if (anchor_inputs.rows() == 0 || negative_inputs.rows() == 0) return 0.0;
  const Mat<Scalar> a = normalized_rows(anchor_inputs);
  const Mat<Scalar> b = normalized_rows(negative_inputs);
  const Mat<Scalar> sims = a * b.transpose();
  LogSumExp lse;
  for (Eigen::Index i = 0; i < sims.size(); ++i) lse.add(-static_cast<double>(sims.data()[i]));
  const double total = softplus(lse.value());
  if (d_anchor || d_negative) {
    // dL/dsim = exp(-sim - total)
    Mat<Scalar> d_sims(sims.rows(), sims.cols());
    for (Eigen::Index i = 0; i < sims.size(); ++i) {
      d_sims.data()[i] = static_cast<Scalar>(std::exp(-static_cast<double>(sims.data()[i]) - total));
    }
    if (d_anchor) *d_anchor += normalize_backward<Scalar>(anchor_inputs, d_sims * b);
    if (d_negative) *d_negative += normalize_backward<Scalar>(negative_inputs, d_sims.transpose() * a);
  }
  return -total;
}

/// Entity reconstruction: sum over nodes of the mean Euclidean distance to
/// their in-subgraph neighbors. Nodes without neighbors contribute 0.
template <typename Scalar>
double loss_reconstruct(const Mat<Scalar>& y, const std::vector<std::vector<std::uint32_t>>& neighbors,
                        Mat<Scalar>* grad = nullptr) {
  double loss = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const auto& nb = neighbors[i];
    if (nb.empty()) continue;
    const double w = 1.0 / static_cast<double>(nb.size());
    for (std::uint32_t j : nb) {
      const auto diff = (y.row(i) - y.row(j)).eval();
      const double dist = static_cast<double>(diff.norm());
      loss += w * dist;
      if (grad && dist > 1e-12) {
        const auto g = (diff * static_cast<Scalar>(w / dist)).eval();
        grad->row(i) += g;
        grad->row(j) -= g;
      }
    }
  }
  return loss;
}

}  // namespace kgalign
