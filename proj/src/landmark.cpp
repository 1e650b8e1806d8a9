#include "kgalign/landmark.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>
#include <unordered_map>

#include "kgalign/log.hpp"
#include "kgalign/parallel.hpp"

namespace kgalign {

ScoreTable label_importance(const MergedGraph& m, const std::vector<EntityId>& seeds, double eta, double floor) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  if (!(floor >= 0.0)) throw ValidationError("labeling floor must be non-negative");
  ScoreTable scores;
  scores.eta = eta;
  scores.labeling_floor = floor;
  const std::size_t n = m.num_nodes();
  scores.importance.assign(n, 0.0);
  scores.influence.assign(n, 0.0);
  if (seeds.empty()) {
    log_warning("no seed nodes: every importance is 0");
    return scores;
  }

  constexpr std::uint32_t kUnreached = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> hops(n, kUnreached);
  std::vector<EntityId> frontier;
  for (EntityId s : seeds) {
    if (s >= n) throw ValidationError("seed node out of range");
    if (hops[s] == kUnreached) {
      hops[s] = 0;
      frontier.push_back(s);
    }
  }
  std::uint32_t d = 0;
  while (!frontier.empty() && 1.0 / (eta + d) >= floor) {
    for (EntityId v : frontier) scores.importance[v] = 1.0 / (eta + d);
    if (1.0 / (eta + d + 1) < floor) break;
    std::vector<EntityId> next;
    for (EntityId v : frontier) {
      auto [begin, end] = m.joint.adjacency(v);
      for (auto it = begin; it != end; ++it) {
        if (hops[it->neighbor] == kUnreached) {
          hops[it->neighbor] = d + 1;
          next.push_back(it->neighbor);
        }
      }
    }
    frontier = std::move(next);
    ++d;
  }
  return scores;
}

void label_influence(const MergedGraph& m, ScoreTable& scores) {
  const std::size_t n = m.num_nodes();
  scores.influence.assign(n, 0.0);
  for (EntityId v = 0; v < n; ++v) {
    double sum = 0.0;
    for (EntityId u : neighbors(m.joint, v)) sum += scores.importance[u];
    scores.influence[v] = sum;
  }
}

BenefitQuery::BenefitQuery(const std::vector<Candidate>& candidates, double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw ValidationError("lambda must lie in (0, 1)");
  for (const Candidate& c : candidates) hops_.emplace_back(c.node, c.hop);
  std::sort(hops_.begin(), hops_.end());
}

int BenefitQuery::hop(EntityId node) const {
  auto it = std::lower_bound(hops_.begin(), hops_.end(), std::make_pair(node, 0));
  if (it == hops_.end() || it->first != node) throw ValidationError("node is not a candidate of this subgraph");
  return it->second;
}

double BenefitQuery::operator()(EntityId node, const ScoreTable& scores) const {
  return benefit(scores.influence.at(node), hop(node), lambda_);
}

std::vector<Candidate> candidate_set(const std::vector<EntityId>& members, const MergedGraph& m,
                                     const ScoreTable& scores, double lambda) {
  enum : std::uint8_t { kOutside = 0, kMember = 1, kHop1 = 2, kHop2 = 3 };
  std::vector<std::uint8_t> state(m.num_nodes(), kOutside);
  for (EntityId v : members) state[v] = kMember;

  std::vector<EntityId> hop1, hop2;
  for (EntityId v : members) {
    auto [begin, end] = m.joint.adjacency(v);
    for (auto it = begin; it != end; ++it) {
      if (state[it->neighbor] == kOutside) {
        state[it->neighbor] = kHop1;
        hop1.push_back(it->neighbor);
      }
    }
  }
  for (EntityId v : hop1) {
    auto [begin, end] = m.joint.adjacency(v);
    for (auto it = begin; it != end; ++it) {
      if (state[it->neighbor] == kOutside) {
        state[it->neighbor] = kHop2;
        hop2.push_back(it->neighbor);
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(hop1.size() + hop2.size());
  for (EntityId v : hop1) out.push_back({v, 1, kNoEntity, benefit(scores.influence[v], 1, lambda)});
  for (EntityId v : hop2) {
    Candidate c{v, 2, kNoEntity, benefit(scores.influence[v], 2, lambda)};
    double best = -1.0;
    auto [begin, end] = m.joint.adjacency(v);
    for (auto it = begin; it != end; ++it) {
      const EntityId u = it->neighbor;
      if (state[u] != kHop1) continue;
      const double b = benefit(scores.influence[u], 1, lambda);
      if (b > best || (b == best && u < c.max_nei)) {
        best = b;
        c.max_nei = u;
      }
    }
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.node < b.node; });
  return out;
}

LandmarkSet select_landmarks(const std::vector<Candidate>& candidates, std::size_t k, std::vector<TraceStep>* trace) {
  LandmarkSet result;
  result.budget = k;
  if (k == 0 || candidates.empty()) return result;

  std::vector<std::uint32_t> order(candidates.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (candidates[a].benefit != candidates[b].benefit) return candidates[a].benefit > candidates[b].benefit;
    return candidates[a].node < candidates[b].node;
  });

  std::unordered_map<EntityId, std::uint32_t> slot;
  slot.reserve(candidates.size());
  for (std::uint32_t i = 0; i < candidates.size(); ++i) slot.emplace(candidates[i].node, i);

  std::vector<std::uint8_t> in_landmarks(candidates.size(), 0);
  std::size_t count = 0;
  auto admit = [&](std::uint32_t i) {
    if (!in_landmarks[i]) {
      in_landmarks[i] = 1;
      ++count;
    }
  };
  auto record = [&](TraceStep::Action a, EntityId node, EntityId partner = kNoEntity) {
    if (trace) trace->push_back({a, node, partner});
  };

  // Parked pairs keyed by mean benefit; earlier insertion wins ties.
  struct Held {
    double key;
    std::size_t seq;
    std::uint32_t node;
    std::uint32_t partner;
    bool operator<(const Held& o) const { return key != o.key ? key < o.key : seq > o.seq; }
  };
  std::priority_queue<Held> held;
  double inter = 0.0;
  const auto budget = static_cast<std::ptrdiff_t>(k);

  for (std::size_t i = 0; i < order.size() && count < k; ++i) {
    const std::uint32_t ci = order[i];
    const Candidate& e = candidates[ci];
    if (e.hop > 1) {
      auto it = e.max_nei == kNoEntity ? slot.end() : slot.find(e.max_nei);
      if (it == slot.end()) {
        record(TraceStep::Action::SkipUnreachable, e.node);
        continue;
      }
      if (in_landmarks[it->second]) {
        admit(ci);
        record(TraceStep::Action::AdmitHop2, e.node, e.max_nei);
      } else {
        const double key = 0.5 * (e.benefit + candidates[it->second].benefit);
        held.push({key, i, ci, it->second});
        inter = std::max(inter, key);
        record(TraceStep::Action::HoldPair, e.node, e.max_nei);
      }
    } else {
      while (e.benefit < inter && static_cast<std::ptrdiff_t>(count) < budget - 2) {
        const Held top = held.top();
        held.pop();
        admit(top.node);
        admit(top.partner);
        record(TraceStep::Action::PopPair, candidates[top.node].node, candidates[top.partner].node);
        inter = held.empty() ? 0.0 : held.top().key;
      }
      admit(ci);
      record(TraceStep::Action::AdmitHop1, e.node);
    }
  }

  for (std::uint32_t i = 0; i < candidates.size(); ++i) {
    if (in_landmarks[i]) result.members.push_back(candidates[i].node);
  }
  std::sort(result.members.begin(), result.members.end());
  return result;
}

std::vector<Subgraph> generate_subgraphs(const MergedGraph& m, const Partition& p, const ScoreTable& scores,
                                         std::size_t budget, double lambda, std::vector<LandmarkRecord>* report) {
  auto subgraphs = induce_subgraphs(p, m);
  if (budget == 0) return subgraphs;
  std::vector<std::vector<LandmarkRecord>> records(subgraphs.size());
  parallel_for(subgraphs.size(), [&](std::size_t i) {
    Subgraph& s = subgraphs[i];
    const auto candidates = candidate_set(s.core, m, scores, lambda);
    const auto chosen = select_landmarks(candidates, budget);
    s.landmarks = chosen.members;
    induce_triples(s, m);
    std::size_t c = 0;
    for (EntityId v : chosen.members) {
      while (candidates[c].node != v) ++c;
      records[i].push_back({s.block, v, candidates[c].hop, candidates[c].benefit});
    }
  });
  if (report) {
    report->clear();
    for (auto& r : records) report->insert(report->end(), r.begin(), r.end());
  }
  return subgraphs;
}

void write_landmark_report(const std::vector<LandmarkRecord>& records, const std::filesystem::path& file) {
  std::FILE* f = std::fopen(file.c_str(), "w");
  if (!f) throw RuntimeFailure("cannot write " + file.string());
  for (const auto& r : records) std::fprintf(f, "%u\t%u\t%d\t%.6f\n", r.block, r.node, r.hop, r.benefit);
  std::fclose(f);
}

std::vector<LandmarkRecord> read_landmark_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open landmark report " + file.string());
  std::vector<LandmarkRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LandmarkRecord r{};
    if (std::sscanf(line.c_str(), "%u\t%u\t%d\t%lf", &r.block, &r.node, &r.hop, &r.benefit) != 4) {
      throw ValidationError("malformed landmark report line: " + line);
    }
    records.push_back(r);
  }
  return records;
}

std::vector<Subgraph> assemble_subgraphs(const MergedGraph& m, const Partition& p,
                                         const std::vector<LandmarkRecord>& records) {
  auto subgraphs = induce_subgraphs(p, m);
  for (const auto& r : records) {
    if (r.block >= subgraphs.size() || r.node >= m.num_nodes() || p.assignment[r.node] == r.block) {
      throw ValidationError("landmark report does not match the partition");
    }
    subgraphs[r.block].landmarks.push_back(r.node);
  }
  for (auto& s : subgraphs) {
    if (s.landmarks.empty()) continue;
    std::sort(s.landmarks.begin(), s.landmarks.end());
    s.landmarks.erase(std::unique(s.landmarks.begin(), s.landmarks.end()), s.landmarks.end());
    induce_triples(s, m);
  }
  return subgraphs;
}

}  // namespace kgalign
