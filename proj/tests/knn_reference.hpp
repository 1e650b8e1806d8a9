#pragma once

// Brute-force mutual nearest neighbors over a full similarity matrix.

#include <algorithm>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "kgalign/search.hpp"

namespace testing {

using PairSet = std::set<std::pair<kgalign::EntityId, kgalign::EntityId>>;

/// k best columns of row `i` of `sims`, ties to the lower index.
inline std::set<std::uint32_t> best_k(const Eigen::MatrixXd& sims, Eigen::Index i, std::size_t k) {
  std::vector<std::uint32_t> idx(static_cast<std::size_t>(sims.cols()));
  for (std::uint32_t j = 0; j < idx.size(); ++j) idx[j] = j;
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return sims(i, a) > sims(i, b); });
  idx.resize(std::min(k, idx.size()));
  return {idx.begin(), idx.end()};
}

template <typename Scalar>
PairSet reference_mutual(const kgalign::Mat<Scalar>& s, const kgalign::Mat<Scalar>& t, std::size_t k) {
  const Eigen::MatrixXd sims = s.template cast<double>() * t.template cast<double>().transpose();
  const Eigen::MatrixXd back = sims.transpose();
  std::vector<std::set<std::uint32_t>> fwd(static_cast<std::size_t>(sims.rows())), bwd(static_cast<std::size_t>(back.rows()));
  for (Eigen::Index i = 0; i < sims.rows(); ++i) fwd[i] = best_k(sims, i, k);
  for (Eigen::Index j = 0; j < back.rows(); ++j) bwd[j] = best_k(back, j, k);
  PairSet out;
  for (std::uint32_t i = 0; i < fwd.size(); ++i)
    for (std::uint32_t j : fwd[i])
      if (bwd[j].count(i)) out.emplace(i, j);
  return out;
}

inline PairSet as_set(const kgalign::AlignmentPrediction& p) {
  PairSet out;
  for (const auto& x : p.pairs) out.emplace(x.source, x.target);
  return out;
}

/// Random unit rows.
inline kgalign::Mat<float> random_space(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> gauss;
  kgalign::Mat<float> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i).normalize();
  return m;
}

}  // namespace testing
