#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <vector>

#include "kgalign/partition.hpp"
#include "kgalign/random.hpp"

namespace kgalign {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using SpMat = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

struct EncoderShape {
  std::size_t dim = 128;
  std::size_t layers = 2;
  std::size_t proxies = 64;
  std::size_t relations = 0;  // joint relation count; each gets an outgoing and an incoming vector
};

/// Trainable encoder weights shared by every subgraph.
template <typename Scalar>
struct EncoderParams {
  std::vector<Mat<Scalar>> layers;  // d x d transform per aggregation layer
  Mat<Scalar> relations;            // 2R x d, rows [0, R) outgoing, [R, 2R) incoming
  Mat<Scalar> proxy_weight;         // d x d
  Mat<Scalar> proxies;              // p x d

  static EncoderParams zeros(const EncoderShape& s) {
    EncoderParams p;
    p.layers.assign(s.layers, Mat<Scalar>::Zero(s.dim, s.dim));
    p.relations = Mat<Scalar>::Zero(2 * s.relations, s.dim);
    p.proxy_weight = Mat<Scalar>::Zero(s.dim, s.dim);
    p.proxies = Mat<Scalar>::Zero(s.proxies, s.dim);
    return p;
  }

  /// Every weight block in serialization order.
  std::vector<Mat<Scalar>*> blocks() {
    std::vector<Mat<Scalar>*> out;
    for (auto& w : layers) out.push_back(&w);
    out.push_back(&relations);
    out.push_back(&proxy_weight);
    out.push_back(&proxies);
    return out;
  }
  std::vector<const Mat<Scalar>*> blocks() const {
    std::vector<const Mat<Scalar>*> out;
    for (auto& w : layers) out.push_back(&w);
    out.push_back(&relations);
    out.push_back(&proxy_weight);
    out.push_back(&proxies);
    return out;
  }

  EncoderShape shape() const {
    return {static_cast<std::size_t>(proxies.cols()), layers.size(), static_cast<std::size_t>(proxies.rows()),
            static_cast<std::size_t>(relations.rows() / 2)};
  }

  template <typename Other>
  EncoderParams<Other> cast() const {
    EncoderParams<Other> p;
    for (const auto& w : layers) p.layers.push_back(w.template cast<Other>());
    p.relations = relations.template cast<Other>();
    p.proxy_weight = proxy_weight.template cast<Other>();
    p.proxies = proxies.template cast<Other>();
    return p;
  }
};

/// Seeded initialization. Relation vectors start at zero so that the two
/// graphs' independent relation spaces begin indistinguishable.
template <typename Scalar>
EncoderParams<Scalar> init_encoder(const EncoderShape& s, Rng& rng) {
  auto p = EncoderParams<Scalar>::zeros(s);
  const double dim = static_cast<double>(s.dim);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double glorot = std::sqrt(3.0 / dim);
  for (auto& w : p.layers) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(glorot * unit(rng));
  }
  for (Eigen::Index i = 0; i < p.proxy_weight.size(); ++i) {
    p.proxy_weight.data()[i] = static_cast<Scalar>(0.1 * glorot * unit(rng));
  }
  for (Eigen::Index i = 0; i < p.proxies.size(); ++i) {
    p.proxies.data()[i] = static_cast<Scalar>(unit(rng) / std::sqrt(dim));
  }
  return p;
}

/// Message-passing structure of one subgraph in local (0..|S|-1) indices.
///
/// Only the subgraph's own triples are consulted, so encoding never reads
/// adjacency from outside the subgraph.
template <typename Scalar>
struct LocalGraph {
  std::vector<EntityId> nodes;  // sorted joint ids; local index = position
  SpMat<Scalar> aggregate;      // n x n, row i averages self and every incident triple end
  SpMat<Scalar> relation_aggregate;  // n x 2R, matching relation terms of the same mean
  std::vector<std::vector<std::uint32_t>> neighbors;  // distinct neighbors, self excluded

  std::size_t size() const { return nodes.size(); }

  /// Local index of a joint node, or -1.
  std::ptrdiff_t local_index(EntityId v) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
    return (it != nodes.end() && *it == v) ? it - nodes.begin() : -1;
  }
};

template <typename Scalar>
LocalGraph<Scalar> build_local_graph(const Subgraph& s, std::size_t num_relations) {
  LocalGraph<Scalar> g;
  g.nodes = s.nodes();
  const std::size_t n = g.nodes.size();
  std::vector<std::size_t> degree(n, 0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ends;  // (head, tail) local
  ends.reserve(s.triples.size());
  for (const Triple& t : s.triples) {
    const auto h = g.local_index(t.head);
    const auto tl = g.local_index(t.tail);
    if (h < 0 || tl < 0) throw ValidationError("subgraph triple leaves the subgraph");
    ends.emplace_back(static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(tl));
    ++degree[h];
    ++degree[tl];
  }

  using Trip = Eigen::Triplet<Scalar>;
  std::vector<Trip> agg, rel;
  agg.reserve(n + 2 * ends.size());
  rel.reserve(2 * ends.size());
  for (std::size_t i = 0; i < n; ++i) agg.emplace_back(i, i, Scalar(1) / Scalar(degree[i] + 1));
  g.neighbors.assign(n, {});
  for (std::size_t k = 0; k < ends.size(); ++k) {
    const auto [h, t] = ends[k];
    const RelationId r = s.triples[k].relation;
    const Scalar wh = Scalar(1) / Scalar(degree[h] + 1);
    const Scalar wt = Scalar(1) / Scalar(degree[t] + 1);
    agg.emplace_back(h, t, wh);
    rel.emplace_back(h, r, wh);
    agg.emplace_back(t, h, wt);
    rel.emplace_back(t, num_relations + r, wt);
    if (h != t) {
      g.neighbors[h].push_back(t);
      g.neighbors[t].push_back(h);
    }
  }
  g.aggregate.resize(n, n);
  g.aggregate.setFromTriplets(agg.begin(), agg.end());
  g.relation_aggregate.resize(n, 2 * num_relations);
  g.relation_aggregate.setFromTriplets(rel.begin(), rel.end());
  for (auto& nb : g.neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return g;
}

/// Activations kept from the forward pass for backpropagation.
template <typename Scalar>
struct EncoderCache {
  std::vector<Mat<Scalar>> hidden;      // hidden[0] = input rows, hidden[l] = layer l output
  std::vector<Mat<Scalar>> aggregated;  // aggregated[l-1] = input to layer l's transform
  Mat<Scalar> combined;                 // mean of layer outputs
  Mat<Scalar> attention;                // n x p softmax over proxies
  Mat<Scalar> residual;                 // combined - attention * proxies
  Vec<Scalar> norms;                    // row norms before normalization
  Mat<Scalar> output;                   // unit rows
};

/// Two-stage encoder: relation-aware neighborhood mean + transform per layer,
/// then a proxy-attention residual, then row normalization.
template <typename Scalar>
Mat<Scalar> encode(const LocalGraph<Scalar>& g, const Mat<Scalar>& inputs, const EncoderParams<Scalar>& p,
                   EncoderCache<Scalar>* cache = nullptr) {
  const std::size_t depth = p.layers.size();
  EncoderCache<Scalar> local;
  EncoderCache<Scalar>& c = cache ? *cache : local;
  c.hidden.resize(depth + 1);
  c.aggregated.resize(depth);
  c.hidden[0] = inputs;
  c.combined = Mat<Scalar>::Zero(inputs.rows(), inputs.cols());
  for (std::size_t l = 1; l <= depth; ++l) {
    c.aggregated[l - 1] = g.aggregate * c.hidden[l - 1];
    c.aggregated[l - 1] += g.relation_aggregate * p.relations;
    c.hidden[l] = (c.aggregated[l - 1] * p.layers[l - 1]).array().tanh().matrix();
    c.combined += c.hidden[l];
  }
  if (depth > 0) c.combined /= Scalar(depth);

  Mat<Scalar> logits = c.combined * p.proxies.transpose();
  Vec<Scalar> row_max = logits.rowwise().maxCoeff();
  c.attention = (logits.colwise() - row_max).array().exp().matrix();
  Vec<Scalar> row_sum = c.attention.rowwise().sum();
  c.attention.array().colwise() /= row_sum.array();
  c.residual = c.combined - c.attention * p.proxies;

  Mat<Scalar> out = c.combined + c.residual * p.proxy_weight;
  c.norms = out.rowwise().norm();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    c.norms(i) = std::max(c.norms(i), Scalar(1e-12));
    out.row(i) /= c.norms(i);
  }
  if (cache) c.output = out;
  return out;
}

/// Gradients of a scalar loss w.r.t. the input rows and the encoder weights,
/// given its gradient w.r.t. the unit output rows.
template <typename Scalar>
Mat<Scalar> encode_backward(const LocalGraph<Scalar>& g, const EncoderParams<Scalar>& p,
                            const EncoderCache<Scalar>& c, const Mat<Scalar>& d_output,
                            EncoderParams<Scalar>& grads) {
  const std::size_t depth = p.layers.size();
  const auto& y = c.output;

  // Row normalization.
  Vec<Scalar> radial = (y.array() * d_output.array()).rowwise().sum();
  Mat<Scalar> d_out = d_output - (y.array().colwise() * radial.array()).matrix();
  d_out.array().colwise() /= c.norms.array();

  // Proxy attention residual.
  Mat<Scalar> d_combined = d_out;
  grads.proxy_weight += c.residual.transpose() * d_out;
  Mat<Scalar> d_residual = d_out * p.proxy_weight.transpose();
  d_combined += d_residual;
  // residual = combined - attention * proxies
  Mat<Scalar> d_attention = -(d_residual * p.proxies.transpose());
  grads.proxies -= c.attention.transpose() * d_residual;
  Vec<Scalar> dot = (c.attention.array() * d_attention.array()).rowwise().sum();
  Mat<Scalar> d_logits = (c.attention.array() * (d_attention.colwise() - dot).array()).matrix();
  d_combined += d_logits * p.proxies;
  grads.proxies += d_logits.transpose() * c.combined;

  // Aggregation layers, top-down.
  Mat<Scalar> d_hidden = depth > 0 ? Mat<Scalar>(d_combined / Scalar(depth)) : d_combined;
  for (std::size_t l = depth; l >= 1; --l) {
    Mat<Scalar> d_pre = (d_hidden.array() * (Scalar(1) - c.hidden[l].array().square())).matrix();
    grads.layers[l - 1] += c.aggregated[l - 1].transpose() * d_pre;
    Mat<Scalar> d_agg = d_pre * p.layers[l - 1].transpose();
    grads.relations += g.relation_aggregate.transpose() * d_agg;
    Mat<Scalar> d_below = g.aggregate.transpose() * d_agg;
    if (l > 1) d_below += d_combined / Scalar(depth);
    d_hidden = std::move(d_below);
  }
  return d_hidden;
}

}  // namespace kgalign
