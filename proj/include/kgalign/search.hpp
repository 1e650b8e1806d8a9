#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgalign/encoder.hpp"
#include "kgalign/log.hpp"
#include "kgalign/merge.hpp"
#include "kgalign/parallel.hpp"

namespace kgalign {

/// Graph-level embedding space: one unit row per original entity.
template <typename Scalar>
struct FusedSpace {
  Mat<Scalar> source;
  Mat<Scalar> target;
};

/// Averages each joint node's outputs over every subgraph holding it,
/// re-normalizes, and maps the joint rows back to both original graphs.
template <typename Scalar>
FusedSpace<Scalar> fuse(const std::vector<Subgraph>& subgraphs, const std::vector<Mat<Scalar>>& outputs,
                        const MergedGraph& m) {
  if (subgraphs.size() != outputs.size()) throw ValidationError("one output matrix per subgraph expected");
  const Eigen::Index dim = outputs.empty() ? 0 : outputs.front().cols();
  Mat<Scalar> sum = Mat<Scalar>::Zero(static_cast<Eigen::Index>(m.num_nodes()), dim);
  std::vector<std::uint32_t> seen(m.num_nodes(), 0);
  for (std::size_t s = 0; s < subgraphs.size(); ++s) {
    const auto nodes = subgraphs[s].nodes();
    if (static_cast<Eigen::Index>(nodes.size()) != outputs[s].rows()) {
      throw ValidationError("output rows do not match subgraph " + std::to_string(s));
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      sum.row(nodes[i]) += outputs[s].row(static_cast<Eigen::Index>(i));
      ++seen[nodes[i]];
    }
  }
  for (EntityId v = 0; v < m.num_nodes(); ++v) {
    if (seen[v] == 0) throw ValidationError("joint node " + std::to_string(v) + " is in no subgraph");
    const Scalar norm = sum.row(v).norm();
    if (norm > Scalar(0)) sum.row(v) /= norm;
  }
  FusedSpace<Scalar> space;
  space.source.resize(static_cast<Eigen::Index>(m.source_to_joint.size()), dim);
  space.target.resize(static_cast<Eigen::Index>(m.target_to_joint.size()), dim);
  for (std::size_t e = 0; e < m.source_to_joint.size(); ++e) space.source.row(e) = sum.row(m.source_to_joint[e]);
  for (std::size_t e = 0; e < m.target_to_joint.size(); ++e) space.target.row(e) = sum.row(m.target_to_joint[e]);
  return space;
}

struct Neighbor {
  double score;
  std::uint32_t index;
};

/// Better = higher score, then lower index.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  return a.score != b.score ? a.score > b.score : a.index < b.index;
}

/// Bounded top-k collector.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}
  void offer(double score, std::uint32_t index) {
    const Neighbor n{score, index};
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    } else if (k_ > 0 && ranks_before(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    }
  }
  std::vector<Neighbor> sorted() const {
    auto out = heap_;
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;  // heap front = worst kept
};

/// Exact top-k by inner product, in blocks of query rows. Scores are
/// accumulated in double.
template <typename Scalar>
std::vector<std::vector<Neighbor>> exact_topk(const Mat<Scalar>& queries, const Mat<Scalar>& base, std::size_t k,
                                              std::size_t block_rows = 256) {
  const Mat<double> base_d = base.template cast<double>();
  const std::size_t nq = static_cast<std::size_t>(queries.rows());
  std::vector<std::vector<Neighbor>> result(nq);
  const std::size_t blocks = (nq + block_rows - 1) / block_rows;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * block_rows, end = std::min(nq, begin + block_rows);
    const Mat<double> q = queries.middleRows(begin, end - begin).template cast<double>();
    const Mat<double> scores = q * base_d.transpose();
    for (std::size_t i = begin; i < end; ++i) {
      TopK top(k);
      for (Eigen::Index j = 0; j < scores.cols(); ++j) top.offer(scores(i - begin, j), static_cast<std::uint32_t>(j));
      result[i] = top.sorted();
    }
  });
  return result;
}

/// Inverted lists over a seeded spherical k-means of the base vectors.
template <typename Scalar>
class InvertedIndex {
 public:
  InvertedIndex(const Mat<Scalar>& base, std::size_t lists, std::uint64_t seed, std::size_t iterations = 10)
      : base_(base.template cast<double>()) {
    const std::size_t n = static_cast<std::size_t>(base_.rows());
    lists = std::clamp<std::size_t>(lists, 1, std::max<std::size_t>(n, 1));
    Rng rng(seed);
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    centroids_.resize(static_cast<Eigen::Index>(lists), base_.cols());
    for (std::size_t c = 0; c < lists; ++c) centroids_.row(c) = base_.row(order[c % std::max<std::size_t>(n, 1)]);
    normalize_centroids();

    std::vector<std::uint32_t> assign(n, 0);
    for (std::size_t it = 0; it < iterations; ++it) {
      assign_all(assign);
      Mat<double> sums = Mat<double>::Zero(centroids_.rows(), centroids_.cols());
      std::vector<std::size_t> counts(lists, 0);
      for (std::size_t i = 0; i < n; ++i) {
        sums.row(assign[i]) += base_.row(i);
        ++counts[assign[i]];
      }
      for (std::size_t c = 0; c < lists; ++c) {
        if (counts[c] > 0) centroids_.row(c) = sums.row(c);  // empty lists keep their centroid
      }
      normalize_centroids();
    }
    assign_all(assign);
    lists_.assign(lists, {});
    for (std::uint32_t i = 0; i < n; ++i) lists_[assign[i]].push_back(i);
  }

  std::size_t num_lists() const { return lists_.size(); }

  std::vector<std::vector<Neighbor>> search(const Mat<Scalar>& queries, std::size_t k, std::size_t probes) const {
    probes = std::clamp<std::size_t>(probes, 1, lists_.size());
    const std::size_t nq = static_cast<std::size_t>(queries.rows());
    std::vector<std::vector<Neighbor>> result(nq);
    parallel_for(nq, [&](std::size_t i) {
      const Vec<double> q = queries.row(static_cast<Eigen::Index>(i)).transpose().template cast<double>();
      TopK cells(probes);
      const Vec<double> cs = centroids_ * q;
      for (Eigen::Index c = 0; c < cs.size(); ++c) cells.offer(cs(c), static_cast<std::uint32_t>(c));
      TopK top(k);
      for (const Neighbor& cell : cells.sorted()) {
        for (std::uint32_t j : lists_[cell.index]) top.offer(base_.row(j).dot(q), j);
      }
      result[i] = top.sorted();
    });
    return result;
  }

 private:
  void normalize_centroids() {
    for (Eigen::Index c = 0; c < centroids_.rows(); ++c) {
      const double norm = centroids_.row(c).norm();
      if (norm > 0) centroids_.row(c) /= norm;
    }
  }
  void assign_all(std::vector<std::uint32_t>& assign) const {
    const Mat<double> scores = base_ * centroids_.transpose();
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      Eigen::Index best = 0;
      scores.row(i).maxCoeff(&best);
      assign[i] = static_cast<std::uint32_t>(best);
    }
  }

  Mat<double> base_;
  Mat<double> centroids_;
  std::vector<std::vector<std::uint32_t>> lists_;
};

enum class SearchMode { Exact, Approximate };

struct SearchOptions {
  std::size_t k = 5;
  SearchMode mode = SearchMode::Exact;
  std::size_t lists = 0;   // 0 = round(sqrt(rows))
  std::size_t probes = 0;  // 0 = round(sqrt(lists))
  bool one_to_one = true;
  std::uint64_t seed = 0;
};

struct ScoredPair {
  EntityId source;
  EntityId target;
  double similarity;
};

struct AlignmentPrediction {
  std::vector<ScoredPair> pairs;
};

template <typename Scalar>
std::vector<std::vector<Neighbor>> topk(const Mat<Scalar>& queries, const Mat<Scalar>& base, std::size_t k,
                                        const SearchOptions& opts) {
  if (opts.mode == SearchMode::Exact) return exact_topk(queries, base, k);
  const auto rows = static_cast<double>(base.rows());
  const std::size_t lists = opts.lists ? opts.lists : static_cast<std::size_t>(std::max(1.0, std::round(std::sqrt(rows))));
  InvertedIndex<Scalar> index(base, lists, opts.seed);
  const std::size_t probes = opts.probes ? opts.probes
                                         : static_cast<std::size_t>(std::max(
                                               1.0, std::round(std::sqrt(static_cast<double>(index.num_lists())))));
  return index.search(queries, k, probes);
}

/// Keeps highest-similarity pairs first so that no entity repeats.
inline AlignmentPrediction greedy_one_to_one(AlignmentPrediction pred) {
  std::stable_sort(pred.pairs.begin(), pred.pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  std::unordered_set<EntityId> used_s, used_t;
  AlignmentPrediction out;
  for (const auto& p : pred.pairs) {
    if (used_s.count(p.source) || used_t.count(p.target)) continue;
    used_s.insert(p.source);
    used_t.insert(p.target);
    out.pairs.push_back(p);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.source != b.source ? a.source < b.source : a.target < b.target; });
  return out;
}

/// Bidirectional top-k search: (s, t) is emitted when each is among the
/// other's k nearest neighbors. Pairs come out ordered by (source, target).
template <typename Scalar>
AlignmentPrediction mutual_knn(const Mat<Scalar>& source, const Mat<Scalar>& target, const SearchOptions& opts) {
  if (opts.k == 0) throw ValidationError("mutual search needs k >= 1");
  std::size_t k = opts.k;
  if (k >= static_cast<std::size_t>(target.rows()) || k >= static_cast<std::size_t>(source.rows())) {
    log_warning("k covers a whole side: mutual search degenerates to full mutuality");
  }
  const auto forward = topk(source, target, k, opts);
  const auto backward = topk(target, source, k, opts);

  AlignmentPrediction pred;
  for (std::uint32_t s = 0; s < forward.size(); ++s) {
    for (const Neighbor& t : forward[s]) {
      const auto& back = backward[t.index];
      const bool mutual = std::any_of(back.begin(), back.end(), [&](const Neighbor& n) { return n.index == s; });
      if (mutual) pred.pairs.push_back({s, t.index, t.score});
    }
  }
  std::sort(pred.pairs.begin(), pred.pairs.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.source != b.source ? a.source < b.source : a.target < b.target; });
  return opts.one_to_one ? greedy_one_to_one(std::move(pred)) : pred;
}

template <typename Scalar>
AlignmentPrediction mutual_knn(const FusedSpace<Scalar>& space, const SearchOptions& opts) {
  return mutual_knn(space.source, space.target, opts);
}

/// Rank (1-based) of the gold target for each query by exact similarity;
/// ties go to the lower target index.
template <typename Scalar>
std::vector<std::size_t> gold_ranks(const Mat<Scalar>& source, const Mat<Scalar>& target,
                                    const std::vector<EntityPair>& gold) {
  const Mat<double> base = target.template cast<double>();
  std::vector<std::size_t> ranks(gold.size(), 0);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (gold.size() + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * kBlock, end = std::min(gold.size(), begin + kBlock);
    Mat<double> q(static_cast<Eigen::Index>(end - begin), source.cols());
    for (std::size_t i = begin; i < end; ++i) q.row(i - begin) = source.row(gold[i].first).template cast<double>();
    const Mat<double> scores = q * base.transpose();
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = scores.row(i - begin);
      const Neighbor truth{row(gold[i].second), gold[i].second};
      std::size_t rank = 1;
      for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (ranks_before({row(j), static_cast<std::uint32_t>(j)}, truth)) ++rank;
      }
      ranks[i] = rank;
    }
  });
  return ranks;
}

}  // namespace kgalign
