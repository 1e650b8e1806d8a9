#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "kgalign/landmark.hpp"
#include "kgalign/log.hpp"
#include "landmark_reference.hpp"
#include "support.hpp"

using namespace kgalign;
using testing::numbered_graph;
using testing::single_merged;

namespace {

ScoreTable scored(const MergedGraph& m, const std::vector<EntityId>& seeds) {
  auto s = label_importance(m, seeds, 0.001, 0.49);
  label_influence(m, s);
  return s;
}

// Distances from a node set by plain BFS.
std::vector<int> bfs_hops(const KnowledgeGraph& g, const std::vector<EntityId>& from) {
  std::vector<int> d(g.num_entities(), -1);
  std::vector<EntityId> frontier(from.begin(), from.end());
  for (EntityId v : from) d[v] = 0;
  while (!frontier.empty()) {
    std::vector<EntityId> next;
    for (EntityId v : frontier) {
      for (EntityId u : neighbors(g, v)) {
        if (d[u] < 0) {
          d[u] = d[v] + 1;
          next.push_back(u);
        }
      }
    }
    frontier = std::move(next);
  }
  return d;
}

KnowledgeGraph random_connected(std::size_t n, std::size_t extra, std::mt19937_64& rng) {
  std::set<std::pair<int, int>> e;
  for (std::size_t v = 1; v < n; ++v) {
    const int u = static_cast<int>(rng() % v);
    e.insert({u, static_cast<int>(v)});
  }
  while (e.size() < n - 1 + extra) {
    int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
    if (a != b) e.insert({std::min(a, b), std::max(a, b)});
  }
  return numbered_graph(n, {e.begin(), e.end()});
}

}  // namespace

TEST_CASE("importance along a path") {
  const auto m = single_merged(numbered_graph(6, testing::path_edges(6)));
  const auto s = label_importance(m, {0}, 0.001, 0.49);
  CHECK(s.importance[0] == doctest::Approx(1000.0));
  CHECK(s.importance[1] == doctest::Approx(1.0 / 1.001));
  CHECK(s.importance[2] == doctest::Approx(0.49975).epsilon(1e-5));
  CHECK(s.importance[3] == 0.0);
  CHECK(s.importance[4] == 0.0);
  CHECK(s.importance[0] > s.importance[1]);
  CHECK(s.importance[1] > s.importance[2]);

  // Without a floor labeling runs to the end of the path.
  const auto all = label_importance(m, {0}, 0.001, 0.0);
  for (int d = 0; d < 6; ++d) CHECK(all.importance[d] == doctest::Approx(1.0 / (0.001 + d)));
}

TEST_CASE("importance takes the nearest seed") {
  const auto m = single_merged(numbered_graph(7, testing::path_edges(7)));
  const auto s = label_importance(m, {0, 6}, 0.001, 0.3);
  CHECK(s.importance[3] == doctest::Approx(1.0 / 3.001));
  CHECK(s.importance[5] == doctest::Approx(1.0 / 1.001));
  CHECK(s.importance[6] == doctest::Approx(1000.0));
}

TEST_CASE("no seeds means zero importance and a warning") {
  const auto m = single_merged(numbered_graph(4, testing::path_edges(4)));
  const auto before = warning_count();
  auto s = label_importance(m, {}, 0.001, 0.49);
  CHECK(warning_count() == before + 1);
  label_influence(m, s);
  for (double x : s.importance) CHECK(x == 0.0);
  for (double x : s.influence) CHECK(x == 0.0);
  CHECK_THROWS_AS(label_importance(m, {0}, 0.0, 0.49), ValidationError);
  CHECK_THROWS_AS(label_importance(m, {0}, 0.001, -1.0), ValidationError);
}

TEST_CASE("influence sums neighbor importance") {
  // Triangle s-x-y plus an isolated node z: x sees s (1000) and y (1/1.001).
  const auto g = testing::make_graph({{"s", "r", "x"}, {"s", "r", "y"}, {"x", "r", "y"}}, {"z"});
  const auto m = single_merged(g);
  const auto s = scored(m, {g.entities().at("s")});
  CHECK(s.influence[g.entities().at("x")] == doctest::Approx(1000.999).epsilon(1e-6));
  CHECK(s.influence[g.entities().at("z")] == 0.0);
  CHECK(s.influence[g.entities().at("s")] == doctest::Approx(2.0 / 1.001));
}

TEST_CASE("influence matches brute-force summation") {
  SyntheticParams p;
  p.n_entities = 500;
  p.seed = 4;
  const auto d = generate_synthetic_pair(p);
  const auto m = merge_graphs(d.source, d.target, d.alignment.train);
  const auto s = scored(m, m.seed_nodes());
  for (EntityId v = 0; v < m.num_nodes(); ++v) {
    std::set<EntityId> nb;
    auto [b, e] = m.joint.adjacency(v);
    for (auto it = b; it != e; ++it) nb.insert(it->neighbor);
    double sum = 0.0;
    for (EntityId u : nb) sum += s.importance[u];
    CHECK(s.influence[v] == sum);
  }
  for (EntityId v : m.seed_nodes()) CHECK(s.importance[v] == doctest::Approx(1000.0));
}

TEST_CASE("benefit decays with hop") {
  CHECK(benefit(2.0, 1, 0.01) == doctest::Approx(0.02));
  CHECK(benefit(2.0, 2, 0.01) == doctest::Approx(0.0002));
  CHECK(benefit(0.0, 1, 0.01) == 0.0);
  CHECK(benefit(0.0, 2, 0.01) == 0.0);
}

TEST_CASE("candidates on a path") {
  // s - a - b - c with S = {s}.
  const auto m = single_merged(numbered_graph(4, testing::path_edges(4)));
  const auto s = scored(m, {0});
  const auto c = candidate_set(std::vector<EntityId>{0}, m, s, 0.01);
  REQUIRE(c.size() == 2);
  CHECK(c[0].node == 1);
  CHECK(c[0].hop == 1);
  CHECK(c[1].node == 2);
  CHECK(c[1].hop == 2);
  CHECK(c[1].max_nei == 1);

  BenefitQuery q(c, 0.01);
  CHECK(q.hop(1) == 1);
  CHECK(q.hop(2) == 2);
  CHECK(q(1, s) == doctest::Approx(s.influence[1] * 0.01));
  CHECK(q(2, s) == doctest::Approx(s.influence[2] * 0.0001));
  CHECK_THROWS_AS(q.hop(3), ValidationError);
  CHECK_THROWS_AS(BenefitQuery(c, 1.5), ValidationError);

  CHECK(candidate_set(std::vector<EntityId>{0, 1, 2, 3}, m, s, 0.01).empty());
}

TEST_CASE("star leaves are hop-1 candidates") {
  const auto m = single_merged(numbered_graph(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}));
  const auto s = scored(m, {0});
  const auto c = candidate_set(std::vector<EntityId>{0}, m, s, 0.01);
  REQUIRE(c.size() == 5);
  for (const auto& x : c) CHECK(x.hop == 1);
}

TEST_CASE("max_nei is the best hop-1 neighbor") {
  // 0 in S; 1 and 2 are hop-1; 3 touches both, 2 has higher influence.
  const auto m = single_merged(numbered_graph(6, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {2, 4}, {2, 5}}));
  const auto s = scored(m, {0});
  const auto c = candidate_set(std::vector<EntityId>{0}, m, s, 0.01);
  for (const auto& x : c) {
    if (x.node == 3) CHECK(x.max_nei == 2);
  }
}

TEST_CASE("select trivia") {
  const std::vector<Candidate> c = {testing::hop1(1, 0.3), testing::hop1(2, 0.2), testing::hop1(3, 0.1)};
  CHECK(select_landmarks(c, 3).members == std::vector<EntityId>{1, 2, 3});
  CHECK(select_landmarks(c, 10).members == std::vector<EntityId>{1, 2, 3});
  CHECK(select_landmarks(c, 0).members.empty());
  CHECK(select_landmarks({}, 4).members.empty());
  CHECK(select_landmarks(c, 2).members == std::vector<EntityId>{1, 2});
}

TEST_CASE("hand-traced instances") {
  for (const auto& inst : testing::hand_instances()) {
    CAPTURE(inst.name);
    std::vector<TraceStep> trace;
    const auto got = select_landmarks(inst.candidates, inst.k, &trace);
    CHECK(got.members == inst.members);
    CHECK(testing::same_trace(trace, inst.trace));
    CHECK(got.members.size() <= inst.k);

    const auto ref = testing::reference_select(inst.candidates, inst.k);
    CHECK(ref.members == inst.members);
    CHECK(testing::same_trace(ref.trace, inst.trace));
  }
}

TEST_CASE("six-candidate instance on a real graph passes the brute-force connectivity check") {
  // Core {0}; hop-1: 1, 2, 4, 6; hop-2: 3 (via 2), 5 (via 1).
  const auto g = numbered_graph(7, {{0, 1}, {0, 2}, {0, 4}, {0, 6}, {2, 3}, {1, 5}});
  const auto inst = testing::hand_instances().front();
  const auto got = select_landmarks(inst.candidates, inst.k);
  const auto feasible = testing::feasible_subsets(g, {0}, inst.candidates, inst.k);
  CHECK(feasible.count(got.members) == 1);
  CHECK(feasible.count({3, 4, 5}) == 0);
  CHECK(feasible.count({2, 3, 5}) == 0);
}

TEST_CASE("random small instances agree with the reference") {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int round = 0; round < 200 && checked < 60; ++round) {
    const std::size_t n = 8 + rng() % 10;
    const auto g = random_connected(n, rng() % 6, rng);
    const auto m = single_merged(g);
    std::vector<EntityId> seeds;
    for (EntityId v = 0; v < n; ++v)
      if (rng() % 3 == 0) seeds.push_back(v);
    if (seeds.empty()) seeds.push_back(0);
    const auto s = scored(m, seeds);
    const std::vector<EntityId> core = {static_cast<EntityId>(rng() % n)};
    const auto cands = candidate_set(core, m, s, 0.01);
    if (cands.empty() || cands.size() > 12) continue;
    ++checked;

    const auto hops = bfs_hops(g, core);
    for (const auto& c : cands) CHECK(c.hop == hops[c.node]);
    for (EntityId v = 0; v < n; ++v) {
      const bool listed = std::any_of(cands.begin(), cands.end(), [&](const Candidate& c) { return c.node == v; });
      CHECK(listed == (hops[v] == 1 || hops[v] == 2));
    }

    const auto feasible = testing::feasible_subsets(g, core, cands, 5);
    for (std::size_t k = 0; k <= 5; ++k) {
      std::vector<TraceStep> trace;
      const auto got = select_landmarks(cands, k, &trace);
      const auto ref = testing::reference_select(cands, k);
      CHECK(got.members == ref.members);
      CHECK(testing::same_trace(trace, ref.trace));
      CHECK(got.members.size() <= k);
      CHECK(feasible.count(got.members) == 1);

      // Excluded hop-1 candidates never beat one admitted in its own turn.
      double min_in = 1e300;
      for (const auto& step : trace) {
        if (step.action != TraceStep::Action::AdmitHop1) continue;
        for (const auto& c : cands)
          if (c.node == step.node) min_in = std::min(min_in, c.benefit);
      }
      for (const auto& c : cands) {
        if (c.hop == 1 && !std::binary_search(got.members.begin(), got.members.end(), c.node))
          CHECK(c.benefit <= min_in);
      }
    }
  }
  CHECK(checked >= 25);
}

TEST_CASE("zero budget reproduces the plain induced subgraphs") {
  SyntheticParams p;
  p.n_entities = 300;
  p.seed = 9;
  const auto d = generate_synthetic_pair(p);
  const auto m = merge_graphs(d.source, d.target, d.alignment.train);
  const auto part = partition(m, 3, 0.05, 0);
  const auto s = scored(m, m.seed_nodes());
  const auto a = generate_subgraphs(m, part, s, 0, 0.01);
  const auto b = induce_subgraphs(part, m);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].core == b[i].core);
    CHECK(a[i].landmarks.empty());
    CHECK(a[i].triples == b[i].triples);
  }
}

TEST_CASE("large budget recalls every two-hop neighbor and restores cut edges") {
  // 12 nodes: two 6-node blocks joined by two bridges.
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {1, 4},
                                                  {6, 7}, {7, 8}, {8, 9}, {9, 10}, {10, 11}, {11, 6}, {7, 10},
                                                  {2, 8}, {5, 11}};
  const auto g = numbered_graph(12, edges);
  const auto m = single_merged(g);
  std::vector<EntityId> all(12);
  for (EntityId v = 0; v < 12; ++v) all[v] = v;
  const auto s = scored(m, all);
  Partition part;
  part.num_blocks = 2;
  part.assignment = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  part.cut_edges = count_cut(g, part.assignment);
  CHECK(part.cut_edges == 2);

  const auto subs = generate_subgraphs(m, part, s, 100, 0.01);
  for (const auto& sub : subs) {
    const auto hops = bfs_hops(g, sub.core);
    std::vector<EntityId> expect_l;
    for (EntityId v = 0; v < 12; ++v)
      if (hops[v] == 1 || hops[v] == 2) expect_l.push_back(v);
    CHECK(sub.landmarks == expect_l);

    std::set<EntityId> present(sub.core.begin(), sub.core.end());
    present.insert(expect_l.begin(), expect_l.end());
    std::multiset<Triple> expect_t;
    for (const Triple& t : g.triples())
      if (present.count(t.head) && present.count(t.tail)) expect_t.insert(t);
    CHECK(std::multiset<Triple>(sub.triples.begin(), sub.triples.end()) == expect_t);
  }
  // Block 0 recalls 8 and 11 at hop 1, then 7, 9, 6, 10 at hop 2; both bridges come back.
  CHECK(subs[0].landmarks == std::vector<EntityId>{6, 7, 8, 9, 10, 11});
}

TEST_CASE("generated subgraphs keep budget and connectivity") {
  SyntheticParams p;
  p.n_entities = 800;
  p.overlap_fraction = 0.9;
  p.seed = 5;
  const auto d = generate_synthetic_pair(p);
  const auto m = merge_graphs(d.source, d.target, d.alignment.train);
  const auto part = partition(m, 4, 0.05, 3);
  const auto s = scored(m, m.seed_nodes());
  for (std::size_t budget : {5u, 40u, 300u}) {
    std::vector<LandmarkRecord> report;
    const auto subs = generate_subgraphs(m, part, s, budget, 0.01, &report);
    std::size_t total = 0;
    for (const auto& sub : subs) {
      CHECK(sub.landmarks.size() <= budget);
      total += sub.landmarks.size();
      std::vector<EntityId> both;
      std::set_intersection(sub.core.begin(), sub.core.end(), sub.landmarks.begin(), sub.landmarks.end(),
                            std::back_inserter(both));
      CHECK(both.empty());
      CHECK(testing::connected_to_core(m.joint, sub.core, sub.landmarks));
      const auto nodes = sub.nodes();
      for (const Triple& t : sub.triples) {
        CHECK(std::binary_search(nodes.begin(), nodes.end(), t.head));
        CHECK(std::binary_search(nodes.begin(), nodes.end(), t.tail));
      }
    }
    CHECK(report.size() == total);
  }
}

TEST_CASE("landmark report round trip") {
  testing::TempDir dir("landmarks");
  SyntheticParams p;
  p.n_entities = 400;
  p.seed = 8;
  const auto d = generate_synthetic_pair(p);
  const auto m = merge_graphs(d.source, d.target, d.alignment.train);
  const auto part = partition(m, 3, 0.05, 1);
  const auto s = scored(m, m.seed_nodes());
  std::vector<LandmarkRecord> report;
  const auto subs = generate_subgraphs(m, part, s, 50, 0.01, &report);
  write_landmark_report(report, dir / "l.txt");
  const auto back = read_landmark_report(dir / "l.txt");
  REQUIRE(back.size() == report.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].block == report[i].block);
    CHECK(back[i].node == report[i].node);
    CHECK(back[i].hop == report[i].hop);
    CHECK(back[i].benefit == doctest::Approx(report[i].benefit).epsilon(1e-6));
  }
  const auto again = assemble_subgraphs(m, part, back);
  REQUIRE(again.size() == subs.size());
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CHECK(again[i].landmarks == subs[i].landmarks);
    CHECK(again[i].triples == subs[i].triples);
  }
  // Six fractional digits on the benefit column.
  const auto text = testing::read_text(dir / "l.txt");
  const auto line = text.substr(0, text.find('\n'));
  CHECK(line.size() - line.rfind('.') - 1 == 6);

  testing::write_text(dir / "bad.txt", "0\tx\t1\t0.5\n");
  CHECK_THROWS_AS(read_landmark_report(dir / "bad.txt"), ValidationError);
}
