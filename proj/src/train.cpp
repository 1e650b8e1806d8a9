#include "kgalign/train.hpp"

#include <cmath>
#include <unordered_set>

#include "kgalign/log.hpp"
#include "kgalign/memory.hpp"

namespace kgalign {

void TrainConfig::validate() const {
  if (dim == 0) throw ValidationError("dim must be positive");
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
  if (!(w_align > 0.0) || !(w_cross >= 0.0) || !(w_rec >= 0.0)) {
    throw ValidationError("loss weights must be non-negative with w_align > 0");
  }
  if (!(nonseed_scale > 0.0)) throw ValidationError("nonseed_scale must be positive");
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

template <typename Scalar>
struct AdamSlot {
  Mat<Scalar> m, v;
};

template <typename Scalar>
void adam_step(Mat<Scalar>& w, const Mat<Scalar>& g, AdamSlot<Scalar>& s, std::size_t t, double lr) {
  if (s.m.size() == 0) {
    s.m = Mat<Scalar>::Zero(w.rows(), w.cols());
    s.v = Mat<Scalar>::Zero(w.rows(), w.cols());
  }
  s.m = Scalar(kBeta1) * s.m + Scalar(1 - kBeta1) * g;
  s.v = Scalar(kBeta2) * s.v + Scalar(1 - kBeta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
  const Scalar step = static_cast<Scalar>(lr * std::sqrt(c2) / c1);
  w.array() -= step * s.m.array() / (s.v.array().sqrt() + Scalar(kAdamEps));
}

/// Adam over the input table that only touches rows with a gradient; each row
/// keeps its own step count for bias correction.
template <typename Scalar>
class RowAdam {
 public:
  RowAdam(Eigen::Index rows, Eigen::Index cols)
      : m_(Mat<Scalar>::Zero(rows, cols)), v_(Mat<Scalar>::Zero(rows, cols)), steps_(rows, 0) {}

  void step(Mat<Scalar>& table, const std::vector<EntityId>& rows, const Mat<Scalar>& grads, double lr) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const EntityId r = rows[i];
      const auto g = grads.row(static_cast<Eigen::Index>(i));
      m_.row(r) = Scalar(kBeta1) * m_.row(r) + Scalar(1 - kBeta1) * g;
      v_.row(r) = Scalar(kBeta2) * v_.row(r) + Scalar(1 - kBeta2) * g.cwiseAbs2();
      const double t = static_cast<double>(++steps_[r]);
      const Scalar step = static_cast<Scalar>(lr * std::sqrt(1.0 - std::pow(kBeta2, t)) / (1.0 - std::pow(kBeta1, t)));
      table.row(r).array() -= step * m_.row(r).array() / (v_.row(r).array().sqrt() + Scalar(kAdamEps));
    }
  }

 private:
  Mat<Scalar> m_, v_;
  std::vector<std::uint32_t> steps_;
};

template <typename Scalar>
Mat<Scalar> gather(const Mat<Scalar>& table, const std::vector<EntityId>& rows) {
  Mat<Scalar> out(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(rows[i]);
  return out;
}

/// Up to `count` distinct joint nodes outside the sorted `inside` list.
std::vector<EntityId> sample_outside(const std::vector<EntityId>& inside, std::size_t num_nodes, std::size_t count,
                                     Rng& rng) {
  const std::size_t outside = num_nodes - inside.size();
  std::vector<EntityId> out;
  if (outside == 0 || count == 0) return out;
  auto is_inside = [&](EntityId v) { return std::binary_search(inside.begin(), inside.end(), v); };
  if (outside <= 2 * count) {
    for (EntityId v = 0; v < num_nodes; ++v) {
      if (!is_inside(v)) out.push_back(v);
    }
    std::shuffle(out.begin(), out.end(), rng);
    if (out.size() > count) out.resize(count);
  } else {
    std::unordered_set<EntityId> picked;
    while (out.size() < count) {
      const auto v = static_cast<EntityId>(uniform_index(rng, num_nodes));
      if (is_inside(v) || !picked.insert(v).second) continue;
      out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_finite(double value, const char* term, const Subgraph& s) {
  if (!std::isfinite(value)) {
    throw RuntimeFailure(std::string("non-finite ") + term + " loss in subgraph " + std::to_string(s.block));
  }
}

template <typename Scalar>
double validation_hits1(const std::vector<Subgraph>& subgraphs, const MergedGraph& merged,
                        const std::vector<EntityPair>& valid, const EmbeddingState<Scalar>& state) {
  const auto space = fuse(subgraphs, state.outputs, merged);
  const auto ranks = gold_ranks(space.source, space.target, valid);
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r == 1 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

}  // namespace

template <typename Scalar>
EmbeddingState<Scalar> init_state(const MergedGraph& merged, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t num_nodes = merged.num_nodes();
  EmbeddingState<Scalar> state;
  Rng rng(derive_seed(cfg.seed, "init"));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  state.input_table.resize(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(cfg.dim));
  for (Eigen::Index i = 0; i < state.input_table.size(); ++i) {
    state.input_table.data()[i] = static_cast<Scalar>(scale * unit(rng));
  }
  for (EntityId v = 0; v < num_nodes; ++v) {
    if (!merged.is_seed(v)) state.input_table.row(v) *= static_cast<Scalar>(cfg.nonseed_scale);
  }
  state.params = init_encoder<Scalar>({cfg.dim, cfg.layers, cfg.proxies, merged.joint.num_relations()}, rng);
  return state;
}

template <typename Scalar>
void encode_all(const std::vector<Subgraph>& subgraphs, std::size_t num_relations, EmbeddingState<Scalar>& state) {
  state.outputs.assign(subgraphs.size(), {});
  for (std::size_t i = 0; i < subgraphs.size(); ++i) {
    const auto g = build_local_graph<Scalar>(subgraphs[i], num_relations);
    state.outputs[i] = encode(g, gather(state.input_table, g.nodes), state.params);
  }
}

template <typename Scalar>
TrainResult<Scalar> train(const std::vector<Subgraph>& subgraphs, const MergedGraph& merged,
                          const AlignmentSet& align, const TrainConfig& cfg) {
  cfg.validate();
  if (subgraphs.empty()) throw ValidationError("training needs at least one subgraph");
  memory::PeakScope peak;
  const std::size_t num_relations = merged.joint.num_relations();
  const std::size_t num_nodes = merged.num_nodes();

  TrainResult<Scalar> result;
  EmbeddingState<Scalar>& state = result.state;
  state = init_state<Scalar>(merged, cfg);
  encode_all(subgraphs, num_relations, state);
  const bool validate = !align.valid.empty();
  // Only trained epochs compete; the untrained state is kept just for epochs = 0.
  double best = -1.0;
  EmbeddingState<Scalar> best_state;
  if (validate) best_state = state;

  Rng order_rng(derive_seed(cfg.seed, "order"));
  Rng cross_rng(derive_seed(cfg.seed, "cross"));
  RowAdam<Scalar> table_opt(state.input_table.rows(), state.input_table.cols());
  std::vector<AdamSlot<Scalar>> param_opt(state.params.blocks().size());
  std::size_t step = 0;
  const AlignLossParams align_cfg{cfg.alpha, cfg.beta, cfg.align_form};

  std::vector<std::size_t> order(subgraphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochLog log;
    for (std::size_t idx : order) {
      const Subgraph& s = subgraphs[idx];
      const auto g = build_local_graph<Scalar>(s, num_relations);
      const Mat<Scalar> inputs = gather(state.input_table, g.nodes);
      EncoderCache<Scalar> cache;
      const Mat<Scalar> y = encode(g, inputs, state.params, &cache);

      std::vector<LocalPair> pairs;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (merged.is_seed(g.nodes[i])) pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
      }
      if (pairs.empty() && epoch == 1) {
        log_warning("subgraph " + std::to_string(s.block) + " holds no train pair; alignment loss is 0");
      }

      Mat<Scalar> d_y = Mat<Scalar>::Zero(y.rows(), y.cols());
      Mat<Scalar> d_tmp = Mat<Scalar>::Zero(y.rows(), y.cols());
      const double l_align = loss_align(y, pairs, align_cfg, &d_tmp);
      check_finite(l_align, "alignment", s);
      d_y += Scalar(cfg.w_align) * d_tmp;

      double l_rec = 0.0;
      if (cfg.w_rec > 0.0) {
        d_tmp.setZero();
        l_rec = loss_reconstruct(y, g.neighbors, &d_tmp);
        check_finite(l_rec, "reconstruction", s);
        d_y += Scalar(cfg.w_rec) * d_tmp;
      }

      EncoderParams<Scalar> grads = EncoderParams<Scalar>::zeros(state.params.shape());
      Mat<Scalar> d_inputs = encode_backward(g, state.params, cache, d_y, grads);

      double l_cross = 0.0;
      std::vector<EntityId> negatives;
      Mat<Scalar> d_neg;
      if (cfg.w_cross > 0.0) {
        negatives = sample_outside(g.nodes, num_nodes, cfg.n_cross, cross_rng);
        if (!negatives.empty()) {
          const Mat<Scalar> neg_inputs = gather(state.input_table, negatives);
          Mat<Scalar> d_anchor = Mat<Scalar>::Zero(inputs.rows(), inputs.cols());
          d_neg = Mat<Scalar>::Zero(neg_inputs.rows(), neg_inputs.cols());
          l_cross = loss_cross(inputs, neg_inputs, &d_anchor, &d_neg);
          check_finite(l_cross, "cross-negative", s);
          d_inputs += Scalar(cfg.w_cross) * d_anchor;
          d_neg *= Scalar(cfg.w_cross);
        }
      }

      const double total = cfg.w_align * l_align + cfg.w_cross * l_cross + cfg.w_rec * l_rec;
      log.align += l_align;
      log.cross += l_cross;
      log.rec += l_rec;
      log.total += total;

      ++step;
      auto weights = state.params.blocks();
      auto grad_blocks = grads.blocks();
      for (std::size_t b = 0; b < weights.size(); ++b) {
        adam_step(*weights[b], *grad_blocks[b], param_opt[b], step, cfg.lr);
      }
      table_opt.step(state.input_table, g.nodes, d_inputs, cfg.lr);
      if (!negatives.empty()) table_opt.step(state.input_table, negatives, d_neg, cfg.lr);
    }

    encode_all(subgraphs, num_relations, state);
    if (validate) {
      log.valid_hits1 = validation_hits1(subgraphs, merged, align.valid, state);
      if (log.valid_hits1 > best) {
        best = log.valid_hits1;
        result.best_epoch = epoch;
        best_state = state;
      }
    }
    result.history.push_back(log);
    char line[160];
    std::snprintf(line, sizeof line, "epoch %zu loss=%.6f align=%.6f cross=%.6f rec=%.6f valid_hits1=%.4f", epoch,
                  log.total, log.align, log.cross, log.rec, log.valid_hits1);
    log_info(line);
  }

  if (validate) state = std::move(best_state);
  if (!validate) result.best_epoch = cfg.epochs;
  result.peak_memory_bytes = peak.peak_delta();
  return result;
}

template EmbeddingState<float> init_state<float>(const MergedGraph&, const TrainConfig&);
template EmbeddingState<double> init_state<double>(const MergedGraph&, const TrainConfig&);
template void encode_all<float>(const std::vector<Subgraph>&, std::size_t, EmbeddingState<float>&);
template void encode_all<double>(const std::vector<Subgraph>&, std::size_t, EmbeddingState<double>&);
template TrainResult<float> train<float>(const std::vector<Subgraph>&, const MergedGraph&, const AlignmentSet&,
                                         const TrainConfig&);
template TrainResult<double> train<double>(const std::vector<Subgraph>&, const MergedGraph&, const AlignmentSet&,
                                           const TrainConfig&);

}  // namespace kgalign
