#include "kgalign/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace kgalign {

RealMetrics evaluate_real(const AlignmentPrediction& pred, const std::vector<EntityPair>& gold_test) {
  const std::set<EntityPair> gold(gold_test.begin(), gold_test.end());
  std::set<EntityPair> predicted;
  for (const auto& p : pred.pairs) predicted.emplace(p.source, p.target);
  std::size_t correct = 0;
  for (const auto& p : predicted) correct += gold.count(p);

  RealMetrics m;
  if (predicted.empty()) {
    m.precision = gold.empty() ? 1.0 : 0.0;
  } else {
    m.precision = static_cast<double>(correct) / static_cast<double>(predicted.size());
  }
  m.recall = gold.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

IdealMetrics metrics_from_ranks(const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& ks) {
  IdealMetrics m;
  if (ranks.empty()) return m;
  const double n = static_cast<double>(ranks.size());
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : ranks) hits += r <= k ? 1 : 0;
    m.hits_at[k] = static_cast<double>(hits) / n;
  }
  double rr = 0.0;
  for (std::size_t r : ranks) rr += 1.0 / static_cast<double>(r);
  m.mrr = rr / n;
  return m;
}

void write_metrics(const MetricsReport& report, const std::vector<std::pair<std::string, std::string>>& config,
                   const std::filesystem::path& file) {
  std::FILE* f = std::fopen(file.string().c_str(), "w");
  if (!f) throw RuntimeFailure("cannot write " + file.string());
  std::fprintf(f, "precision=%.6f\nrecall=%.6f\nf1=%.6f\n", report.real.precision, report.real.recall, report.real.f1);
  for (const auto& [k, v] : report.ideal.hits_at) std::fprintf(f, "hits@%zu=%.6f\n", k, v);
  std::fprintf(f, "mrr=%.6f\n", report.ideal.mrr);
  std::fprintf(f, "runtime_seconds=%.3f\n", report.runtime_seconds);
  std::fprintf(f, "peak_memory_bytes=%lld\n", static_cast<long long>(report.peak_memory_bytes));
  for (const auto& [k, v] : config) std::fprintf(f, "config.%s=%s\n", k.c_str(), v.c_str());
  std::fclose(f);
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("missing file " + file.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void write_predictions(const AlignmentPrediction& pred, const KnowledgeGraph& source, const KnowledgeGraph& target,
                       const std::filesystem::path& file) {
  std::FILE* f = std::fopen(file.string().c_str(), "w");
  if (!f) throw RuntimeFailure("cannot write " + file.string());
  for (const auto& p : pred.pairs) {
    std::fprintf(f, "%s\t%s\t%.6f\n", source.entities().label(p.source).c_str(),
                 target.entities().label(p.target).c_str(), p.similarity);
  }
  std::fclose(f);
}

AlignmentPrediction read_predictions(const std::filesystem::path& file, const KnowledgeGraph& source,
                                     const KnowledgeGraph& target) {
  std::ifstream in(file);
  if (!in) throw ValidationError("missing predictions " + file.string());
  AlignmentPrediction pred;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    }
    const std::string s = line.substr(0, a), t = line.substr(a + 1, b - a - 1);
    if (!source.entities().contains(s) || !target.entities().contains(t)) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": unknown entity");
    }
    pred.pairs.push_back({source.entities().at(s), target.entities().at(t), std::stod(line.substr(b + 1))});
  }
  return pred;
}

}  // namespace kgalign
