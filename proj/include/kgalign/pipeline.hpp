#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgalign/graph.hpp"
#include "kgalign/metrics.hpp"
#include "kgalign/search.hpp"
#include "kgalign/train.hpp"

namespace kgalign {

struct PipelineConfig {
  std::string dataset;  // empty: synthetic pair generated into <out>/data
  std::size_t n_entities = 1000;
  std::size_t n_relations = 20;
  double avg_degree = 4.0;
  double overlap = 1.0;
  SplitFractions split{};
  std::uint32_t blocks = 5;
  double epsilon = 0.05;
  double eta = 0.001;
  double floor = 0.49;
  double lambda = 0.01;
  std::size_t budget = 7500;
  TrainConfig train{};
  SearchOptions search{};
  bool exclude_known = true;  // real-setting search skips train and valid entities
  std::uint64_t seed = 0;
  std::filesystem::path out = "kgalign_out";

  /// Applies one `key=value` setting; unknown keys and bad values throw.
  void set(const std::string& key, const std::string& value);
  /// Every key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  static const std::vector<std::string>& keys();
};

/// Reads a `key=value` file (`#` starts a comment) on top of the defaults.
PipelineConfig load_config(const std::filesystem::path& file);

/// Stage names accepted by run_stage, in pipeline order.
const std::vector<std::string>& stage_names();

/// Runs one stage from the files left in cfg.out by earlier stages.
void run_stage(const PipelineConfig& cfg, const std::string& stage);

/// synth (when no dataset is given), partition, landmarks, train, infer, eval.
MetricsReport run_pipeline(const PipelineConfig& cfg);

/// Per-stage wall time and allocator high-water mark recorded in <out>/stages.txt.
struct StageStats {
  double seconds = 0.0;
  std::int64_t peak_bytes = 0;
};
std::map<std::string, StageStats> read_stage_stats(const std::filesystem::path& out);

}  // namespace kgalign
