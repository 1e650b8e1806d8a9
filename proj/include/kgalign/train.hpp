#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kgalign/encoder.hpp"
#include "kgalign/loss.hpp"
#include "kgalign/merge.hpp"
#include "kgalign/search.hpp"

namespace kgalign {

struct TrainConfig {
  std::size_t dim = 128;
  std::size_t layers = 2;
  std::size_t proxies = 64;
  double alpha = 15.0;
  double beta = 0.7;
  AlignForm align_form = AlignForm::Literal;
  std::size_t n_cross = 256;
  double w_align = 1.0;
  double w_cross = 0.1;
  double w_rec = 0.1;
  double nonseed_scale = 0.01;  // init scale of non-seed input rows relative to seed rows
  double lr = 0.005;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Shared input table, encoder weights and the latest per-subgraph outputs.
template <typename Scalar>
struct EmbeddingState {
  Mat<Scalar> input_table;  // one row per joint node
  EncoderParams<Scalar> params;
  std::vector<Mat<Scalar>> outputs;  // one |S_i| x d block per subgraph
};

/// Seeded uniform rows scaled by 1/sqrt(d); rows of non-seed nodes are further
/// scaled by cfg.nonseed_scale.
template <typename Scalar>
EmbeddingState<Scalar> init_state(const MergedGraph& merged, const TrainConfig& cfg);

/// Runs the encoder over every subgraph and stores the outputs in the state.
template <typename Scalar>
void encode_all(const std::vector<Subgraph>& subgraphs, std::size_t num_relations, EmbeddingState<Scalar>& state);

struct EpochLog {
  double align = 0.0;
  double cross = 0.0;
  double rec = 0.0;
  double total = 0.0;
  double valid_hits1 = -1.0;  // -1 when there is no validation set
};

template <typename Scalar>
struct TrainResult {
  EmbeddingState<Scalar> state;
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;  // 0 only when no epoch ran
  std::int64_t peak_memory_bytes = 0;
};

/// Mini-batch training over subgraphs with the best-validation state kept.
template <typename Scalar>
TrainResult<Scalar> train(const std::vector<Subgraph>& subgraphs, const MergedGraph& merged,
                          const AlignmentSet& align, const TrainConfig& cfg);

}  // namespace kgalign
