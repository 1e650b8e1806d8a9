#pragma once

#include <filesystem>
#include <vector>

#include "kgalign/merge.hpp"
#include "kgalign/partition.hpp"

namespace kgalign {

/// Seed-propagated centrality scores over the joint graph.
struct ScoreTable {
  std::vector<double> importance;  // 1 / (eta + hops to nearest seed), 0 past the floor
  std::vector<double> influence;   // sum of neighbor importances
  double eta = 0.001;
  double labeling_floor = 0.49;
};

/// Multi-source BFS from `seeds`; a node at hop d is labeled 1/(eta + d) while
/// that value stays at or above `floor`.
ScoreTable label_importance(const MergedGraph& m, const std::vector<EntityId>& seeds, double eta, double floor);

/// Fills `scores.influence` from the importances of each node's neighbors.
void label_influence(const MergedGraph& m, ScoreTable& scores);

/// influence * lambda^hop
inline double benefit(double influence, int hop, double lambda) {
  double decay = 1.0;
  for (int i = 0; i < hop; ++i) decay *= lambda;
  return influence * decay;
}

struct Candidate {
  EntityId node = kNoEntity;
  int hop = 0;                   // exact distance to the subgraph, 1 or 2
  EntityId max_nei = kNoEntity;  // best-benefit hop-1 neighbor, for hop-2 candidates
  double benefit = 0.0;
};

/// Benefit lookup restricted to the candidates of one subgraph.
class BenefitQuery {
 public:
  BenefitQuery(const std::vector<Candidate>& candidates, double lambda);
  int hop(EntityId node) const;
  double operator()(EntityId node, const ScoreTable& scores) const;
  double lambda() const { return lambda_; }

 private:
  std::vector<std::pair<EntityId, int>> hops_;  // sorted by node
  double lambda_;
};

/// All nodes outside `members` within two hops, sorted by node id.
std::vector<Candidate> candidate_set(const std::vector<EntityId>& members, const MergedGraph& m,
                                     const ScoreTable& scores, double lambda);
inline std::vector<Candidate> candidate_set(const Subgraph& s, const MergedGraph& m, const ScoreTable& scores,
                                            double lambda) {
  return candidate_set(s.nodes(), m, scores, lambda);
}

struct LandmarkSet {
  std::vector<EntityId> members;  // sorted
  std::size_t budget = 0;
};

/// One traversal step of the connectivity-aware greedy recall.
struct TraceStep {
  enum class Action { AdmitHop1, AdmitHop2, HoldPair, PopPair, SkipUnreachable };
  Action action;
  EntityId node;
  EntityId partner = kNoEntity;  // max_nei for HoldPair / PopPair
};

/// Greedy top-k landmark recall over a candidate set.
///
/// Candidates are visited by descending benefit (ties: ascending node id).
/// Hop-1 candidates are admitted directly; a hop-2 candidate is admitted when
/// its max_nei is already a landmark, otherwise the pair is parked with the
/// pair's mean benefit as key. Before admitting a hop-1 candidate, parked pairs
/// whose key beats that candidate's benefit are released while |L| < k - 2.
LandmarkSet select_landmarks(const std::vector<Candidate>& candidates, std::size_t k,
                             std::vector<TraceStep>* trace = nullptr);

struct LandmarkRecord {
  BlockId block;
  EntityId node;
  int hop;
  double benefit;
};

/// Recalls landmarks into every block and re-induces the triples.
std::vector<Subgraph> generate_subgraphs(const MergedGraph& m, const Partition& p, const ScoreTable& scores,
                                         std::size_t budget, double lambda,
                                         std::vector<LandmarkRecord>* report = nullptr);

void write_landmark_report(const std::vector<LandmarkRecord>& records, const std::filesystem::path& file);
std::vector<LandmarkRecord> read_landmark_report(const std::filesystem::path& file);

/// Rebuilds subgraphs from a stored partition and landmark report.
std::vector<Subgraph> assemble_subgraphs(const MergedGraph& m, const Partition& p,
                                         const std::vector<LandmarkRecord>& records);

}  // namespace kgalign
