#include "kgalign/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <unordered_set>

#include "kgalign/checkpoint.hpp"
#include "kgalign/landmark.hpp"
#include "kgalign/log.hpp"
#include "kgalign/memory.hpp"
#include "kgalign/merge.hpp"
#include "kgalign/partition.hpp"

namespace kgalign {
namespace {

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ValidationError("config " + key + ": expected a number, got '" + v + "'");
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] != '-') {
      const auto x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ValidationError("config " + key + ": expected a non-negative integer, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config " + key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const std::filesystem::path& require(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw ValidationError("missing prerequisite file " + p.string());
  return p;
}

std::filesystem::path data_dir(const PipelineConfig& cfg) {
  return cfg.dataset.empty() ? cfg.out / "data" : std::filesystem::path(cfg.dataset);
}

struct Loaded {
  Dataset data;
  MergedGraph merged;
};

Loaded load(const PipelineConfig& cfg) {
  const auto dir = data_dir(cfg);
  if (cfg.dataset.empty()) require(dir / "rel_triples_1");
  Loaded l;
  l.data = load_dataset(dir, cfg.split, derive_seed(cfg.seed, "split"));
  if (l.data.source.dropped_duplicates() + l.data.target.dropped_duplicates() > 0) {
    log_info("dropped " +
             std::to_string(l.data.source.dropped_duplicates() + l.data.target.dropped_duplicates()) +
             " duplicate triples");
  }
  l.merged = merge_graphs(l.data.source, l.data.target, l.data.alignment.train);
  return l;
}

std::vector<Subgraph> load_subgraphs(const PipelineConfig& cfg, const MergedGraph& m) {
  const Partition p = read_partition(require(cfg.out / "partition.txt"));
  if (p.assignment.size() != m.num_nodes()) {
    throw ValidationError("partition.txt does not match the dataset (" + std::to_string(p.assignment.size()) +
                          " nodes vs " + std::to_string(m.num_nodes()) + ")");
  }
  return assemble_subgraphs(m, p, read_landmark_report(require(cfg.out / "landmarks.txt")));
}

EncoderShape shape_of(const PipelineConfig& cfg, const MergedGraph& m) {
  return {cfg.train.dim, cfg.train.layers, cfg.train.proxies, m.joint.num_relations()};
}

FusedSpace<float> encoded_space(const PipelineConfig& cfg, const MergedGraph& m,
                                const std::vector<Subgraph>& subgraphs) {
  auto state = read_checkpoint(require(cfg.out / "checkpoint.bin"), shape_of(cfg, m));
  if (static_cast<std::size_t>(state.input_table.rows()) != m.num_nodes()) {
    throw ValidationError("checkpoint node count does not match the dataset");
  }
  encode_all(subgraphs, m.joint.num_relations(), state);
  return fuse(subgraphs, state.outputs, m);
}

void record_stage(const PipelineConfig& cfg, const std::string& stage, const StageStats& s) {
  auto stats = read_stage_stats(cfg.out);
  stats[stage] = s;
  std::FILE* f = std::fopen((cfg.out / "stages.txt").string().c_str(), "w");
  if (!f) throw RuntimeFailure("cannot write stages.txt");
  for (const auto& [name, st] : stats) {
    std::fprintf(f, "%s.seconds=%.6f\n%s.peak_bytes=%lld\n", name.c_str(), st.seconds, name.c_str(),
                 static_cast<long long>(st.peak_bytes));
  }
  std::fclose(f);
}

void write_report(const std::filesystem::path& file, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(file);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

// Each stage returns the allocator high-water mark it wants reported, or -1
// to report the peak of the whole stage.
std::int64_t stage_synth(const PipelineConfig& cfg) {
  SyntheticParams p;
  p.n_entities = cfg.n_entities;
  p.n_relations = cfg.n_relations;
  p.avg_degree = cfg.avg_degree;
  p.overlap_fraction = cfg.overlap;
  p.seed = derive_seed(cfg.seed, "synth");
  p.split = cfg.split;
  const auto dir = cfg.out / "data";
  std::filesystem::create_directories(dir);
  write_dataset(generate_synthetic_pair(p), dir);
  return -1;
}

std::int64_t stage_partition(const PipelineConfig& cfg) {
  const auto l = load(cfg);
  write_splits(l.data, cfg.out);
  const Partition p = partition(l.merged, cfg.blocks, cfg.epsilon, derive_seed(cfg.seed, "partition"));
  write_partition(p, cfg.out / "partition.txt");
  const auto& a = l.data.alignment;
  write_report(cfg.out / "partition_report.txt",
               {{"blocks", std::to_string(p.num_blocks)},
                {"nodes", std::to_string(p.assignment.size())},
                {"cut", std::to_string(p.cut_edges)},
                {"recall.train", fmt(preserved_alignment_recall(p, l.merged, a.train))},
                {"recall.valid", fmt(preserved_alignment_recall(p, l.merged, a.valid))},
                {"recall.test", fmt(preserved_alignment_recall(p, l.merged, a.test))}});
  log_info("partition: cut=" + std::to_string(p.cut_edges) +
           " test recall=" + fmt(preserved_alignment_recall(p, l.merged, a.test)));
  return -1;
}

std::int64_t stage_landmarks(const PipelineConfig& cfg) {
  const auto l = load(cfg);
  const Partition p = read_partition(require(cfg.out / "partition.txt"));
  if (p.assignment.size() != l.merged.num_nodes()) throw ValidationError("partition.txt does not match the dataset");
  ScoreTable scores = label_importance(l.merged, l.merged.seed_nodes(), cfg.eta, cfg.floor);
  label_influence(l.merged, scores);
  std::vector<LandmarkRecord> records;
  generate_subgraphs(l.merged, p, scores, cfg.budget, cfg.lambda, &records);
  write_landmark_report(records, cfg.out / "landmarks.txt");
  log_info("landmarks: recalled " + std::to_string(records.size()));
  return -1;
}

std::int64_t stage_train(const PipelineConfig& cfg) {
  const auto l = load(cfg);
  const auto subgraphs = load_subgraphs(cfg, l.merged);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train");
  const auto result = train<float>(subgraphs, l.merged, l.data.alignment, tc);
  write_checkpoint(result.state, cfg.out / "checkpoint.bin");
  std::FILE* f = std::fopen((cfg.out / "train_log.txt").string().c_str(), "w");
  if (!f) throw RuntimeFailure("cannot write train_log.txt");
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& h = result.history[e];
    std::fprintf(f, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", e + 1, h.total, h.align, h.cross, h.rec, h.valid_hits1);
  }
  std::fprintf(f, "best_epoch=%zu\n", result.best_epoch);
  std::fclose(f);
  return result.peak_memory_bytes;
}

std::int64_t stage_infer(const PipelineConfig& cfg) {
  const auto l = load(cfg);
  const auto subgraphs = load_subgraphs(cfg, l.merged);
  const auto space = encoded_space(cfg, l.merged, subgraphs);

  memory::PeakScope peak;
  std::vector<EntityId> src, tgt;
  {
    std::unordered_set<EntityId> known_s, known_t;
    if (cfg.exclude_known) {
      for (const auto* set : {&l.data.alignment.train, &l.data.alignment.valid}) {
        for (const auto& [s, t] : *set) {
          known_s.insert(s);
          known_t.insert(t);
        }
      }
    }
    for (EntityId e = 0; e < space.source.rows(); ++e) {
      if (!known_s.count(e)) src.push_back(e);
    }
    for (EntityId e = 0; e < space.target.rows(); ++e) {
      if (!known_t.count(e)) tgt.push_back(e);
    }
  }
  Mat<float> qs(static_cast<Eigen::Index>(src.size()), space.source.cols());
  Mat<float> qt(static_cast<Eigen::Index>(tgt.size()), space.target.cols());
  for (std::size_t i = 0; i < src.size(); ++i) qs.row(static_cast<Eigen::Index>(i)) = space.source.row(src[i]);
  for (std::size_t i = 0; i < tgt.size(); ++i) qt.row(static_cast<Eigen::Index>(i)) = space.target.row(tgt[i]);

  SearchOptions opts = cfg.search;
  opts.seed = derive_seed(cfg.seed, "search");
  AlignmentPrediction pred;
  if (!src.empty() && !tgt.empty()) pred = mutual_knn(qs, qt, opts);
  for (auto& p : pred.pairs) {
    p.source = src[p.source];
    p.target = tgt[p.target];
  }
  const auto bytes = peak.peak_delta();
  write_predictions(pred, l.data.source, l.data.target, cfg.out / "predictions.txt");
  log_info("infer: " + std::to_string(pred.pairs.size()) + " predicted pairs");
  return bytes;
}

MetricsReport evaluate_stage(const PipelineConfig& cfg) {
  const auto l = load(cfg);
  const auto subgraphs = load_subgraphs(cfg, l.merged);
  const auto pred = read_predictions(require(cfg.out / "predictions.txt"), l.data.source, l.data.target);
  MetricsReport report;
  report.real = evaluate_real(pred, l.data.alignment.test);
  if (!l.data.alignment.test.empty()) {
    report.ideal = evaluate_ideal(encoded_space(cfg, l.merged, subgraphs), l.data.alignment.test, {1, 5});
  } else {
    log_warning("no test pairs: ideal-setting metrics are reported as 0");
    report.ideal.hits_at = {{1, 0.0}, {5, 0.0}};
  }
  const auto stats = read_stage_stats(cfg.out);
  for (const auto& [name, st] : stats) {
    if (name == "eval") continue;
    report.runtime_seconds += st.seconds;
    if (name == "train" || name == "infer") report.peak_memory_bytes = std::max(report.peak_memory_bytes, st.peak_bytes);
  }
  write_metrics(report, cfg.entries(), cfg.out / "metrics.txt");
  return report;
}

StageStats timed(const PipelineConfig& cfg, const std::string& stage, const std::function<std::int64_t()>& body) {
  std::filesystem::create_directories(cfg.out);
  memory::PeakScope peak;
  const auto start = std::chrono::steady_clock::now();
  std::int64_t bytes = -1;
  try {
    bytes = body();
  } catch (const ValidationError& e) {
    throw ValidationError("stage " + stage + ": " + e.what());
  } catch (const RuntimeFailure& e) {
    throw RuntimeFailure("stage " + stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw RuntimeFailure("stage " + stage + ": " + e.what());
  }
  StageStats s;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  s.peak_bytes = bytes >= 0 ? bytes : peak.peak_delta();
  char line[200];
  std::snprintf(line, sizeof line, "stage %s: %.3f s, peak %lld bytes", stage.c_str(), s.seconds,
                static_cast<long long>(s.peak_bytes));
  log_info(line);
  return s;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& v) {
  auto count = [&] { return parse_count(key, v); };
  auto real = [&] { return parse_real(key, v); };
  if (key == "dataset") dataset = v;
  else if (key == "n_entities") n_entities = count();
  else if (key == "n_relations") n_relations = count();
  else if (key == "avg_degree") avg_degree = real();
  else if (key == "overlap") overlap = real();
  else if (key == "train_fraction") split.train = real();
  else if (key == "valid_fraction") split.valid = real();
  else if (key == "blocks") blocks = static_cast<std::uint32_t>(count());
  else if (key == "epsilon") epsilon = real();
  else if (key == "eta") eta = real();
  else if (key == "floor") floor = real();
  else if (key == "lambda") lambda = real();
  else if (key == "budget") budget = count();
  else if (key == "dim") train.dim = count();
  else if (key == "layers") train.layers = count();
  else if (key == "proxies") train.proxies = count();
  else if (key == "alpha") train.alpha = real();
  else if (key == "beta") train.beta = real();
  else if (key == "align_form") {
    if (v == "literal") train.align_form = AlignForm::Literal;
    else if (v == "dualamn") train.align_form = AlignForm::DualAmn;
    else throw ValidationError("config align_form: expected literal or dualamn, got '" + v + "'");
  }
  else if (key == "n_cross") train.n_cross = count();
  else if (key == "w_align") train.w_align = real();
  else if (key == "w_cross") train.w_cross = real();
  else if (key == "w_rec") train.w_rec = real();
  else if (key == "nonseed_scale") train.nonseed_scale = real();
  else if (key == "lr") train.lr = real();
  else if (key == "epochs") train.epochs = count();
  else if (key == "k") search.k = count();
  else if (key == "search") {
    if (v == "exact") search.mode = SearchMode::Exact;
    else if (v == "approximate") search.mode = SearchMode::Approximate;
    else throw ValidationError("config search: expected exact or approximate, got '" + v + "'");
  }
  else if (key == "lists") search.lists = count();
  else if (key == "probes") search.probes = count();
  else if (key == "one_to_one") search.one_to_one = parse_bool(key, v);
  else if (key == "exclude_known") exclude_known = parse_bool(key, v);
  else if (key == "seed") seed = count();
  else if (key == "out") out = v;
  else throw ValidationError("unknown config key '" + key + "'");
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset", "n_entities", "n_relations", "avg_degree", "overlap", "train_fraction", "valid_fraction",
      "blocks",  "epsilon",    "eta",         "floor",      "lambda",  "budget",         "dim",
      "layers",  "proxies",    "alpha",       "beta",       "align_form", "n_cross",     "w_align",
      "w_cross", "w_rec",      "nonseed_scale", "lr",          "epochs",     "k",       "search",         "lists",
      "probes",  "one_to_one", "exclude_known", "seed",     "out"};
  return k;
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  return {{"dataset", dataset},
          {"n_entities", std::to_string(n_entities)},
          {"n_relations", std::to_string(n_relations)},
          {"avg_degree", fmt(avg_degree)},
          {"overlap", fmt(overlap)},
          {"train_fraction", fmt(split.train)},
          {"valid_fraction", fmt(split.valid)},
          {"blocks", std::to_string(blocks)},
          {"epsilon", fmt(epsilon)},
          {"eta", fmt(eta)},
          {"floor", fmt(floor)},
          {"lambda", fmt(lambda)},
          {"budget", std::to_string(budget)},
          {"dim", std::to_string(train.dim)},
          {"layers", std::to_string(train.layers)},
          {"proxies", std::to_string(train.proxies)},
          {"alpha", fmt(train.alpha)},
          {"beta", fmt(train.beta)},
          {"align_form", train.align_form == AlignForm::Literal ? "literal" : "dualamn"},
          {"n_cross", std::to_string(train.n_cross)},
          {"w_align", fmt(train.w_align)},
          {"w_cross", fmt(train.w_cross)},
          {"w_rec", fmt(train.w_rec)},
          {"nonseed_scale", fmt(train.nonseed_scale)},
          {"lr", fmt(train.lr)},
          {"epochs", std::to_string(train.epochs)},
          {"k", std::to_string(search.k)},
          {"search", search.mode == SearchMode::Exact ? "exact" : "approximate"},
          {"lists", std::to_string(search.lists)},
          {"probes", std::to_string(search.probes)},
          {"one_to_one", search.one_to_one ? "true" : "false"},
          {"exclude_known", exclude_known ? "true" : "false"},
          {"seed", std::to_string(seed)},
          {"out", out.string()}};
}

PipelineConfig load_config(const std::filesystem::path& file) {
  PipelineConfig cfg;
  for (const auto& [k, v] : read_key_values(file)) cfg.set(k, v);
  return cfg;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth", "partition", "landmarks", "train", "infer", "eval",
                                                 "pipeline"};
  return names;
}

std::map<std::string, StageStats> read_stage_stats(const std::filesystem::path& out) {
  std::map<std::string, StageStats> stats;
  if (!std::filesystem::exists(out / "stages.txt")) return stats;
  for (const auto& [key, value] : read_key_values(out / "stages.txt")) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    auto& s = stats[key.substr(0, dot)];
    if (key.substr(dot + 1) == "seconds") s.seconds = std::stod(value);
    else if (key.substr(dot + 1) == "peak_bytes") s.peak_bytes = std::stoll(value);
  }
  return stats;
}

void run_stage(const PipelineConfig& cfg, const std::string& stage) {
  if (stage == "pipeline") {
    run_pipeline(cfg);
    return;
  }
  std::function<std::int64_t()> body;
  if (stage == "synth") body = [&] { return stage_synth(cfg); };
  else if (stage == "partition") body = [&] { return stage_partition(cfg); };
  else if (stage == "landmarks") body = [&] { return stage_landmarks(cfg); };
  else if (stage == "train") body = [&] { return stage_train(cfg); };
  else if (stage == "infer") body = [&] { return stage_infer(cfg); };
  else if (stage == "eval") body = [&] { evaluate_stage(cfg); return std::int64_t{-1}; };
  else throw ValidationError("unknown stage '" + stage + "'");
  const auto s = timed(cfg, stage, body);
  record_stage(cfg, stage, s);
}

MetricsReport run_pipeline(const PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  std::filesystem::remove(cfg.out / "stages.txt");
  if (cfg.dataset.empty()) run_stage(cfg, "synth");
  for (const char* stage : {"partition", "landmarks", "train", "infer"}) run_stage(cfg, stage);
  MetricsReport report;
  const auto s = timed(cfg, "eval", [&] {
    report = evaluate_stage(cfg);
    return std::int64_t{-1};
  });
  record_stage(cfg, "eval", s);
  return report;
}

}  // namespace kgalign
