#include "kgalign/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <cstdio>

#include "kgalign/random.hpp"

namespace kgalign {

std::vector<std::size_t> Partition::block_sizes() const {
  std::vector<std::size_t> sizes(num_blocks, 0);
  for (BlockId b : assignment) ++sizes[b];
  return sizes;
}

std::int64_t WeightedGraph::total_weight() const {
  return std::accumulate(vwgt.begin(), vwgt.end(), std::int64_t{0});
}

WeightedGraph WeightedGraph::from(const KnowledgeGraph& g) {
  WeightedGraph w;
  const std::size_t n = g.num_entities();
  w.vwgt.assign(n, 1);
  w.xadj.assign(1, 0);
  std::vector<std::int64_t> acc(n, 0);
  std::vector<std::uint32_t> touched;
  for (EntityId u = 0; u < n; ++u) {
    auto [begin, end] = g.adjacency(u);
    for (auto it = begin; it != end; ++it) {
      if (it->neighbor == u) continue;
      if (acc[it->neighbor]++ == 0) touched.push_back(it->neighbor);
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t v : touched) {
      w.adjncy.push_back(v);
      w.adjwgt.push_back(acc[v]);
      acc[v] = 0;
    }
    touched.clear();
    w.xadj.push_back(w.adjncy.size());
  }
  return w;
}

std::size_t block_capacity(std::size_t nodes, std::uint32_t blocks, double epsilon) {
  return static_cast<std::size_t>(
      std::ceil((1.0 + epsilon) * static_cast<double>(nodes) / static_cast<double>(blocks) - 1e-9));
}

namespace {

constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();

std::vector<std::uint32_t> shuffled_order(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Heavy-edge matching followed by contraction. Fills `cmap` (fine -> coarse).
WeightedGraph coarsen(const WeightedGraph& g, std::int64_t max_vertex_weight, Rng& rng,
                      std::vector<std::uint32_t>& cmap) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint32_t> match(n, kUnset);
  for (std::uint32_t u : shuffled_order(n, rng)) {
    if (match[u] != kUnset) continue;
    std::uint32_t best = u;
    std::int64_t best_w = -1;
    for (std::size_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
      const std::uint32_t v = g.adjncy[e];
      if (match[v] != kUnset || g.vwgt[u] + g.vwgt[v] > max_vertex_weight) continue;
      if (g.adjwgt[e] > best_w) {
        best = v;
        best_w = g.adjwgt[e];
      }
    }
    match[u] = best;
    match[best] = u;
  }

  cmap.assign(n, kUnset);
  std::uint32_t next = 0;
  for (std::uint32_t u = 0; u < n; ++u) {
    if (cmap[u] != kUnset) continue;
    cmap[u] = next;
    cmap[match[u]] = next;
    ++next;
  }

  WeightedGraph c;
  c.vwgt.assign(next, 0);
  for (std::uint32_t u = 0; u < n; ++u) c.vwgt[cmap[u]] += g.vwgt[u];

  std::vector<std::vector<std::uint32_t>> members(next);
  for (std::uint32_t u = 0; u < n; ++u) members[cmap[u]].push_back(u);

  std::vector<std::int64_t> acc(next, 0);
  std::vector<std::uint32_t> touched;
  c.xadj.assign(1, 0);
  for (std::uint32_t cu = 0; cu < next; ++cu) {
    for (std::uint32_t u : members[cu]) {
      for (std::size_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
        const std::uint32_t cv = cmap[g.adjncy[e]];
        if (cv == cu) continue;
        if (acc[cv] == 0) touched.push_back(cv);
        acc[cv] += g.adjwgt[e];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t cv : touched) {
      c.adjncy.push_back(cv);
      c.adjwgt.push_back(acc[cv]);
      acc[cv] = 0;
    }
    touched.clear();
    c.xadj.push_back(c.adjncy.size());
  }
  return c;
}

std::int64_t weighted_cut(const WeightedGraph& g, const std::vector<BlockId>& a) {
  std::int64_t cut = 0;
  for (std::uint32_t u = 0; u < g.num_nodes(); ++u) {
    for (std::size_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
      if (a[u] != a[g.adjncy[e]]) cut += g.adjwgt[e];
    }
  }
  return cut / 2;
}

std::vector<std::int64_t> block_weights(const WeightedGraph& g, const std::vector<BlockId>& a, std::uint32_t k) {
  std::vector<std::int64_t> w(k, 0);
  for (std::uint32_t u = 0; u < g.num_nodes(); ++u) w[a[u]] += g.vwgt[u];
  return w;
}

// Sequential region growing: each block grows breadth-first from a random
// unassigned node until it holds its share of the remaining weight.
std::vector<BlockId> grow_regions(const WeightedGraph& g, std::uint32_t k, Rng& rng) {
  const std::size_t n = g.num_nodes();
  std::vector<BlockId> a(n, kUnset);
  const auto order = shuffled_order(n, rng);
  std::size_t cursor = 0;
  double remaining = static_cast<double>(g.total_weight());
  std::deque<std::uint32_t> queue;
  for (BlockId b = 0; b + 1 < k; ++b) {
    const double target = remaining / static_cast<double>(k - b);
    std::int64_t weight = 0;
    queue.clear();
    while (static_cast<double>(weight) < target) {
      if (queue.empty()) {
        while (cursor < n && a[order[cursor]] != kUnset) ++cursor;
        if (cursor == n) break;
        queue.push_back(order[cursor]);
      }
      const std::uint32_t u = queue.front();
      queue.pop_front();
      if (a[u] != kUnset) continue;
      a[u] = b;
      weight += g.vwgt[u];
      for (std::size_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
        if (a[g.adjncy[e]] == kUnset) queue.push_back(g.adjncy[e]);
      }
    }
    remaining -= static_cast<double>(weight);
  }
  for (auto& b : a) {
    if (b == kUnset) b = k - 1;
  }
  return a;
}

// Connectivity of `u` to each block it touches. `conn` is a dense scratch array.
void gather_connectivity(const WeightedGraph& g, const std::vector<BlockId>& a, std::uint32_t u,
                         std::vector<std::int64_t>& conn, std::vector<BlockId>& touched) {
  touched.clear();
  for (std::size_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
    const BlockId b = a[g.adjncy[e]];
    if (conn[b] == 0) touched.push_back(b);
    conn[b] += g.adjwgt[e];
  }
}

// Moves nodes out of over-capacity blocks, cheapest cut increase first.
void rebalance(const WeightedGraph& g, std::vector<BlockId>& a, std::uint32_t k, std::int64_t cap) {
  auto weights = block_weights(g, a, k);
  std::vector<std::int64_t> conn(k, 0);
  std::vector<BlockId> touched;
  struct Move {
    std::int64_t gain;
    std::uint32_t node;
  };
  for (int round = 0; round < 64; ++round) {
    if (*std::max_element(weights.begin(), weights.end()) <= cap) return;
    std::vector<Move> moves;
    for (std::uint32_t u = 0; u < g.num_nodes(); ++u) {
      if (weights[a[u]] <= cap) continue;
      gather_connectivity(g, a, u, conn, touched);
      std::int64_t best = std::numeric_limits<std::int64_t>::min();
      for (BlockId b : touched) {
        if (b != a[u]) best = std::max(best, conn[b] - conn[a[u]]);
      }
      if (best == std::numeric_limits<std::int64_t>::min()) best = -conn[a[u]];
      for (BlockId b : touched) conn[b] = 0;
      moves.push_back({best, u});
    }
    std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) { return x.gain > y.gain; });
    for (const Move& mv : moves) {
      const std::uint32_t u = mv.node;
      const BlockId from = a[u];
      if (weights[from] <= cap) continue;
      gather_connectivity(g, a, u, conn, touched);
      BlockId dest = kUnset;
      std::int64_t best_gain = std::numeric_limits<std::int64_t>::min();
      for (BlockId b : touched) {
        if (b == from || weights[b] + g.vwgt[u] > cap) continue;
        const std::int64_t gain = conn[b] - conn[from];
        if (gain > best_gain || (gain == best_gain && dest != kUnset && weights[b] < weights[dest])) {
          best_gain = gain;
          dest = b;
        }
      }
      for (BlockId b : touched) conn[b] = 0;
      if (dest == kUnset) {
        // No adjacent block has room; fall back to the lightest block.
        const auto lightest = static_cast<BlockId>(std::min_element(weights.begin(), weights.end()) - weights.begin());
        if (lightest == from || weights[lightest] + g.vwgt[u] > cap) continue;
        dest = lightest;
      }
      weights[from] -= g.vwgt[u];
      weights[dest] += g.vwgt[u];
      a[u] = dest;
    }
  }
}

// Greedy boundary refinement: only strictly cut-reducing, capacity-respecting moves.
void refine(const WeightedGraph& g, std::vector<BlockId>& a, std::uint32_t k, std::int64_t cap, Rng& rng,
            int max_passes = 12) {
  auto weights = block_weights(g, a, k);
  std::vector<std::int64_t> conn(k, 0);
  std::vector<BlockId> touched;
  for (int pass = 0; pass < max_passes; ++pass) {
    std::size_t moved = 0;
    for (std::uint32_t u : shuffled_order(g.num_nodes(), rng)) {
      gather_connectivity(g, a, u, conn, touched);
      const BlockId from = a[u];
      BlockId dest = kUnset;
      std::int64_t best_gain = 0;
      for (BlockId b : touched) {
        if (b == from || weights[b] + g.vwgt[u] > cap) continue;
        const std::int64_t gain = conn[b] - conn[from];
        if (gain > best_gain || (gain == best_gain && dest != kUnset && weights[b] < weights[dest])) {
          best_gain = gain;
          dest = b;
        }
      }
      for (BlockId b : touched) conn[b] = 0;
      if (dest == kUnset) continue;
      weights[from] -= g.vwgt[u];
      weights[dest] += g.vwgt[u];
      a[u] = dest;
      ++moved;
    }
    if (moved == 0) break;
  }
}

std::int64_t capacity_for(std::int64_t total, std::uint32_t k, double epsilon) {
  return static_cast<std::int64_t>(block_capacity(static_cast<std::size_t>(total), k, epsilon));
}

}  // namespace

std::vector<BlockId> partition_weighted(const WeightedGraph& g, const PartitionOptions& opts) {
  const std::uint32_t k = opts.num_blocks;
  const std::size_t n = g.num_nodes();
  if (k == 0 || k > n) throw ValidationError("block count must be in [1, number of nodes]");
  if (!(opts.epsilon >= 0.0)) throw ValidationError("infeasible balance: epsilon must be non-negative");
  if (k == 1) return std::vector<BlockId>(n, 0);

  Rng rng(opts.seed);
  const std::int64_t total = g.total_weight();
  const std::int64_t cap = capacity_for(total, k, opts.epsilon);
  if (cap * static_cast<std::int64_t>(k) < total) throw ValidationError("infeasible balance for block count");

  // Coarsening phase.
  const std::size_t coarse_target = std::max<std::size_t>(20 * k, 64);
  const auto max_vertex_weight = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(1.5 * static_cast<double>(total) / static_cast<double>(coarse_target)));
  std::vector<WeightedGraph> levels;
  std::vector<std::vector<std::uint32_t>> cmaps;
  const WeightedGraph* current = &g;
  while (current->num_nodes() > coarse_target) {
    std::vector<std::uint32_t> cmap;
    WeightedGraph coarse = coarsen(*current, max_vertex_weight, rng, cmap);
    if (static_cast<double>(coarse.num_nodes()) > 0.95 * static_cast<double>(current->num_nodes())) break;
    levels.push_back(std::move(coarse));
    cmaps.push_back(std::move(cmap));
    current = &levels.back();
  }

  // Initial partition on the coarsest graph: best of several grown-and-refined trials.
  const std::size_t trials = current->num_nodes() <= 64 ? std::max<std::size_t>(opts.initial_trials, 32)
                                                        : opts.initial_trials;
  std::vector<BlockId> best;
  std::int64_t best_cut = std::numeric_limits<std::int64_t>::max();
  std::int64_t best_excess = std::numeric_limits<std::int64_t>::max();
  for (std::size_t t = 0; t < std::max<std::size_t>(trials, 1); ++t) {
    auto a = grow_regions(*current, k, rng);
    rebalance(*current, a, k, cap);
    refine(*current, a, k, cap, rng);
    const auto w = block_weights(*current, a, k);
    const std::int64_t excess = std::max<std::int64_t>(0, *std::max_element(w.begin(), w.end()) - cap);
    const std::int64_t cut = weighted_cut(*current, a);
    if (excess < best_excess || (excess == best_excess && cut < best_cut)) {
      best = std::move(a);
      best_cut = cut;
      best_excess = excess;
    }
  }

  // Uncoarsening with refinement at every level.
  std::vector<BlockId> assignment = std::move(best);
  for (std::size_t level = levels.size(); level-- > 0;) {
    const WeightedGraph& finer = level == 0 ? g : levels[level - 1];
    std::vector<BlockId> projected(finer.num_nodes());
    for (std::uint32_t u = 0; u < finer.num_nodes(); ++u) projected[u] = assignment[cmaps[level][u]];
    assignment = std::move(projected);
    rebalance(finer, assignment, k, cap);
    refine(finer, assignment, k, cap, rng);
  }

  rebalance(g, assignment, k, cap);
  const auto w = block_weights(g, assignment, k);
  if (*std::max_element(w.begin(), w.end()) > cap) {
    throw ValidationError("infeasible balance: could not meet block capacity");
  }
  return assignment;
}

std::size_t count_cut(const KnowledgeGraph& g, const std::vector<BlockId>& assignment) {
  std::size_t cut = 0;
  for (const Triple& t : g.triples()) cut += assignment[t.head] != assignment[t.tail] ? 1 : 0;
  return cut;
}

Partition partition_graph(const KnowledgeGraph& g, const PartitionOptions& opts) {
  Partition p;
  p.num_blocks = opts.num_blocks;
  p.assignment = partition_weighted(WeightedGraph::from(g), opts);
  p.cut_edges = count_cut(g, p.assignment);
  return p;
}

Partition partition(const MergedGraph& m, std::uint32_t num_blocks, double epsilon, std::uint64_t seed) {
  PartitionOptions opts;
  opts.num_blocks = num_blocks;
  opts.epsilon = epsilon;
  opts.seed = seed;
  return partition_graph(m.joint, opts);
}

double preserved_alignment_recall(const Partition& p, const MergedGraph& m, const std::vector<EntityPair>& pairs) {
  if (pairs.empty()) return 1.0;
  std::size_t kept = 0;
  for (const auto& pair : pairs) {
    auto [a, b] = m.forward(pair);
    kept += p.assignment[a] == p.assignment[b] ? 1 : 0;
  }
  return static_cast<double>(kept) / static_cast<double>(pairs.size());
}

std::vector<EntityId> Subgraph::nodes() const {
  std::vector<EntityId> all;
  all.reserve(size());
  std::merge(core.begin(), core.end(), landmarks.begin(), landmarks.end(), std::back_inserter(all));
  return all;
}

namespace {

// Emits, for each member node in ascending order, its outgoing triples that stay inside.
template <typename IsMember>
std::vector<Triple> induced(const std::vector<EntityId>& nodes, const KnowledgeGraph& g, IsMember&& member) {
  std::vector<Triple> out;
  for (EntityId u : nodes) {
    auto [begin, end] = g.adjacency(u);
    for (auto it = begin; it != end; ++it) {
      if (it->outgoing && member(it->neighbor)) out.push_back({u, it->relation, it->neighbor});
    }
  }
  return out;
}

}  // namespace

void induce_triples(Subgraph& s, const MergedGraph& m) {
  std::vector<std::uint8_t> mark(m.num_nodes(), 0);
  const auto all = s.nodes();
  for (EntityId v : all) mark[v] = 1;
  s.triples = induced(all, m.joint, [&](EntityId v) { return mark[v] != 0; });
}

std::vector<Subgraph> induce_subgraphs(const Partition& p, const MergedGraph& m) {
  std::vector<Subgraph> subgraphs(p.num_blocks);
  for (BlockId b = 0; b < p.num_blocks; ++b) subgraphs[b].block = b;
  for (EntityId v = 0; v < p.assignment.size(); ++v) subgraphs[p.assignment[v]].core.push_back(v);
  for (auto& s : subgraphs) {
    s.triples = induced(s.core, m.joint, [&](EntityId v) { return p.assignment[v] == s.block; });
  }
  return subgraphs;
}

void write_partition(const Partition& p, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  out << "#nodes=" << p.assignment.size() << " #blocks=" << p.num_blocks << " cut=" << p.cut_edges << '\n';
  for (std::size_t v = 0; v < p.assignment.size(); ++v) out << v << '\t' << p.assignment[v] << '\n';
}

Partition read_partition(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open partition file " + file.string());
  std::string header;
  std::getline(in, header);
  std::size_t nodes = 0;
  Partition p;
  if (std::sscanf(header.c_str(), "#nodes=%zu #blocks=%u cut=%zu", &nodes, &p.num_blocks, &p.cut_edges) != 3) {
    throw ValidationError("malformed partition header in " + file.string());
  }
  p.assignment.assign(nodes, kUnset);
  std::size_t v = 0;
  BlockId b = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::sscanf(line.c_str(), "%zu\t%u", &v, &b) != 2 || v >= nodes || b >= p.num_blocks) {
      throw ValidationError("malformed partition line in " + file.string());
    }
    p.assignment[v] = b;
  }
  if (std::find(p.assignment.begin(), p.assignment.end(), kUnset) != p.assignment.end()) {
    throw ValidationError("partition file does not assign every node");
  }
  return p;
}

}  // namespace kgalign
