#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgalign/graph.hpp"
#include "kgalign/search.hpp"

namespace kgalign {

struct RealMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct IdealMetrics {
  std::map<std::size_t, double> hits_at;
  double mrr = 0.0;
};

struct MetricsReport {
  RealMetrics real;
  IdealMetrics ideal;
  double runtime_seconds = 0.0;
  std::int64_t peak_memory_bytes = 0;
};

/// Precision / recall / F1 of predicted pairs against the gold test pairs.
RealMetrics evaluate_real(const AlignmentPrediction& pred, const std::vector<EntityPair>& gold_test);

/// Hits@k and MRR from 1-based gold ranks.
IdealMetrics metrics_from_ranks(const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& ks);

/// Ranks every gold source against all targets (exact search).
template <typename Scalar>
IdealMetrics evaluate_ideal(const FusedSpace<Scalar>& space, const std::vector<EntityPair>& gold_test,
                            const std::vector<std::size_t>& ks = {1, 5}) {
  if (gold_test.empty()) throw ValidationError("ideal-setting evaluation needs at least one gold pair");
  return metrics_from_ranks(gold_ranks(space.source, space.target, gold_test), ks);
}

/// key=value lines: the metrics first, then `config.<key>=<value>` echo lines.
void write_metrics(const MetricsReport& report, const std::vector<std::pair<std::string, std::string>>& config,
                   const std::filesystem::path& file);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& file);

void write_predictions(const AlignmentPrediction& pred, const KnowledgeGraph& source, const KnowledgeGraph& target,
                       const std::filesystem::path& file);
AlignmentPrediction read_predictions(const std::filesystem::path& file, const KnowledgeGraph& source,
                                     const KnowledgeGraph& target);

}  // namespace kgalign
