#include "kgalign/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "kgalign/random.hpp"

namespace kgalign {

std::uint32_t LabelMap::intern(const std::string& label) {
  auto [it, inserted] = index_.try_emplace(label, static_cast<std::uint32_t>(labels_.size()));
  if (inserted) labels_.push_back(label);
  return it->second;
}

std::uint32_t LabelMap::at(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw ValidationError("unknown label '" + label + "'");
  return it->second;
}

void KnowledgeGraph::Builder::add_triple(const std::string& head, const std::string& relation,
                                         const std::string& tail) {
  Triple t;
  t.head = entities_.intern(head);
  t.relation = relations_.intern(relation);
  t.tail = entities_.intern(tail);
  triples_.push_back(t);
}

namespace {

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = splitmix64(t.head);
    h = splitmix64(h ^ t.relation);
    return splitmix64(h ^ t.tail);
  }
};

}  // namespace

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  KnowledgeGraph g;
  g.entities_ = std::move(entities_);
  g.relations_ = std::move(relations_);

  std::unordered_set<Triple, TripleHash> seen;
  seen.reserve(triples_.size());
  g.triples_.reserve(triples_.size());
  for (const Triple& t : triples_) {
    if (t.head >= g.entities_.size() || t.tail >= g.entities_.size() ||
        t.relation >= g.relations_.size()) {
      throw ValidationError("triple references an unknown entity or relation");
    }
    if (seen.insert(t).second) {
      g.triples_.push_back(t);
    } else {
      ++g.dropped_duplicates_;
    }
  }
  triples_.clear();

  const std::size_t n = g.entities_.size();
  std::vector<std::size_t> counts(n + 1, 0);
  for (const Triple& t : g.triples_) {
    ++counts[t.head + 1];
    ++counts[t.tail + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  g.offsets_ = counts;
  g.adjacency_.resize(g.offsets_[n]);
  std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const Triple& t : g.triples_) {
    g.adjacency_[cursor[t.head]++] = {t.tail, t.relation, true};
    g.adjacency_[cursor[t.tail]++] = {t.head, t.relation, false};
  }
  return g;
}

std::size_t KnowledgeGraph::num_isolated() const {
  std::size_t count = 0;
  for (EntityId e = 0; e < num_entities(); ++e) count += is_isolated(e) ? 1 : 0;
  return count;
}

std::vector<EntityId> neighbors(const KnowledgeGraph& g, EntityId e) {
  if (e >= g.num_entities()) throw ValidationError("invalid entity id " + std::to_string(e));
  std::vector<EntityId> out;
  auto [begin, end] = g.adjacency(e);
  for (auto it = begin; it != end; ++it) out.push_back(it->neighbor);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::ifstream open_input(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  return in;
}

// Yields (line number, fields) for each non-empty line.
template <typename Fn>
void for_each_record(const std::filesystem::path& file, std::size_t expected_fields, Fn&& fn) {
  auto in = open_input(file);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != expected_fields) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(expected_fields) + " fields, got " +
                            std::to_string(fields.size()));
    }
    fn(lineno, fields);
  }
}

void check_one_to_one(const std::vector<EntityPair>& pairs, const std::string& what) {
  std::unordered_set<EntityId> src, tgt;
  for (auto [s, t] : pairs) {
    if (!src.insert(s).second || !tgt.insert(t).second) {
      throw ValidationError(what + ": alignment is not one-to-one");
    }
  }
}

}  // namespace

KnowledgeGraph read_triples(const std::filesystem::path& file) {
  KnowledgeGraph::Builder builder;
  for_each_record(file, 3, [&](std::size_t, const std::vector<std::string>& f) {
    builder.add_triple(f[0], f[1], f[2]);
  });
  return std::move(builder).build();
}

std::vector<EntityPair> read_links(const std::filesystem::path& file, const KnowledgeGraph& source,
                                   const KnowledgeGraph& target) {
  std::vector<EntityPair> links;
  for_each_record(file, 2, [&](std::size_t lineno, const std::vector<std::string>& f) {
    if (!source.entities().contains(f[0]) || !target.entities().contains(f[1])) {
      throw ValidationError(file.string() + ":" + std::to_string(lineno) +
                            ": link references unknown entity");
    }
    links.emplace_back(source.entities().at(f[0]), target.entities().at(f[1]));
  });
  return links;
}

void write_triples(const KnowledgeGraph& g, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  for (const Triple& t : g.triples()) {
    out << g.entities().label(t.head) << '\t' << g.relations().label(t.relation) << '\t'
        << g.entities().label(t.tail) << '\n';
  }
}

void write_links(const std::vector<EntityPair>& links, const KnowledgeGraph& source,
                 const KnowledgeGraph& target, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw RuntimeFailure("cannot write " + file.string());
  for (auto [s, t] : links) {
    out << source.entities().label(s) << '\t' << target.entities().label(t) << '\n';
  }
}

AlignmentSet split_alignment(std::vector<EntityPair> gold, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0) || !(fractions.valid > 0.0) || fractions.train + fractions.valid >= 1.0) {
    throw ValidationError("split fractions must be positive and sum below 1");
  }
  check_one_to_one(gold, "gold links");
  std::sort(gold.begin(), gold.end());
  Rng rng(seed);
  std::shuffle(gold.begin(), gold.end(), rng);

  const auto n = gold.size();
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_train,
                                static_cast<std::size_t>(std::llround(fractions.valid * static_cast<double>(n))));
  AlignmentSet a;
  a.train.assign(gold.begin(), gold.begin() + n_train);
  a.valid.assign(gold.begin() + n_train, gold.begin() + n_train + n_valid);
  a.test.assign(gold.begin() + n_train + n_valid, gold.end());
  std::sort(a.train.begin(), a.train.end());
  std::sort(a.valid.begin(), a.valid.end());
  std::sort(a.test.begin(), a.test.end());
  return a;
}

Dataset load_dataset(const std::filesystem::path& dir, SplitFractions fractions, std::uint64_t seed) {
  for (const char* name : {"rel_triples_1", "rel_triples_2", "ent_links"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw ValidationError("missing dataset file " + (dir / name).string());
    }
  }
  Dataset d;
  d.source = read_triples(dir / "rel_triples_1");
  d.target = read_triples(dir / "rel_triples_2");
  d.alignment = split_alignment(read_links(dir / "ent_links", d.source, d.target), fractions, seed);
  return d;
}

void write_splits(const Dataset& data, const std::filesystem::path& dir) {
  write_links(data.alignment.train, data.source, data.target, dir / "train_links");
  write_links(data.alignment.valid, data.source, data.target, dir / "valid_links");
  write_links(data.alignment.test, data.source, data.target, dir / "test_links");
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_triples(data.source, dir / "rel_triples_1");
  write_triples(data.target, dir / "rel_triples_2");
  std::vector<EntityPair> all = data.alignment.train;
  all.insert(all.end(), data.alignment.valid.begin(), data.alignment.valid.end());
  all.insert(all.end(), data.alignment.test.begin(), data.alignment.test.end());
  std::sort(all.begin(), all.end());
  write_links(all, data.source, data.target, dir / "ent_links");
  write_splits(data, dir);
}

Dataset generate_synthetic_pair(const SyntheticParams& p) {
  if (p.n_entities < 2) throw ValidationError("synthetic generator needs at least 2 entities");
  if (p.n_relations < 1) throw ValidationError("synthetic generator needs at least 1 relation");
  if (!(p.overlap_fraction > 0.0) || p.overlap_fraction > 1.0) {
    throw ValidationError("overlap_fraction must be in (0, 1]");
  }
  const double n = static_cast<double>(p.n_entities);
  const auto n_triples = static_cast<std::size_t>(std::llround(n * p.avg_degree / 2.0));
  if (!(p.avg_degree > 0.0) || n_triples == 0) {
    throw ValidationError("avg_degree too low: the synthetic graph would be edgeless");
  }
  const double capacity = n * (n - 1.0) * static_cast<double>(p.n_relations);
  if (static_cast<double>(n_triples) > capacity / 2.0) {
    throw ValidationError("avg_degree too high for the number of entities and relations");
  }

  Rng rng(p.seed);
  auto random_triples = [&](std::size_t count, std::size_t n_nodes, auto&& pick_head, std::set<Triple>& seen,
                            std::vector<Triple>& out) {
    while (count > 0) {
      Triple t{pick_head(), static_cast<RelationId>(uniform_index(rng, p.n_relations)),
               static_cast<EntityId>(uniform_index(rng, n_nodes))};
      if (t.head == t.tail) continue;
      if (uniform_index(rng, 2) == 1) std::swap(t.head, t.tail);
      if (!seen.insert(t).second) continue;
      out.push_back(t);
      --count;
    }
  };

  // Source graph.
  std::set<Triple> source_seen;
  std::vector<Triple> source_triples;
  random_triples(n_triples, p.n_entities,
                 [&] { return static_cast<EntityId>(uniform_index(rng, p.n_entities)); }, source_seen,
                 source_triples);

  // Triple files carry no entity list, so every entity needs at least one triple.
  auto attach_isolated = [&](std::vector<Triple>& triples, std::set<Triple>& seen, std::size_t n_nodes) {
    std::vector<bool> touched(n_nodes, false);
    for (const Triple& t : triples) touched[t.head] = touched[t.tail] = true;
    for (EntityId e = 0; e < n_nodes; ++e) {
      if (touched[e]) continue;
      random_triples(1, n_nodes, [e] { return e; }, seen, triples);
      touched[triples.back().head] = touched[triples.back().tail] = true;
    }
  };
  attach_isolated(source_triples, source_seen, p.n_entities);

  // Matched subset and relabeling maps.
  const auto n_matched = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(p.overlap_fraction * n)));
  std::vector<EntityId> order(p.n_entities);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<EntityId> target_ids(p.n_entities);
  std::iota(target_ids.begin(), target_ids.end(), 0);
  std::shuffle(target_ids.begin(), target_ids.end(), rng);
  std::vector<EntityId> to_target(p.n_entities, kNoEntity);
  for (std::size_t i = 0; i < n_matched; ++i) to_target[order[i]] = target_ids[i];
  std::vector<RelationId> rel_map(p.n_relations);
  std::iota(rel_map.begin(), rel_map.end(), 0);
  std::shuffle(rel_map.begin(), rel_map.end(), rng);

  std::set<Triple> target_seen;
  std::vector<Triple> target_triples;
  for (const Triple& t : source_triples) {
    if (to_target[t.head] == kNoEntity || to_target[t.tail] == kNoEntity) continue;
    Triple mapped{to_target[t.head], rel_map[t.relation], to_target[t.tail]};
    target_seen.insert(mapped);
    target_triples.push_back(mapped);
  }
  // Fresh, non-matchable entities attach to the copy through perturbation triples.
  const std::size_t n_fresh = p.n_entities - n_matched;
  if (n_fresh > 0) {
    const auto n_perturb = static_cast<std::size_t>(std::llround(static_cast<double>(n_fresh) * p.avg_degree / 2.0));
    std::vector<EntityId> fresh(target_ids.begin() + static_cast<std::ptrdiff_t>(n_matched), target_ids.end());
    random_triples(std::max<std::size_t>(n_perturb, 1), p.n_entities,
                   [&] { return fresh[uniform_index(rng, fresh.size())]; }, target_seen, target_triples);
  }

  attach_isolated(target_triples, target_seen, p.n_entities);

  Dataset d;
  {
    KnowledgeGraph::Builder b;
    for (std::size_t i = 0; i < p.n_entities; ++i) b.add_entity("s" + std::to_string(i));
    for (std::size_t r = 0; r < p.n_relations; ++r) b.add_relation("r" + std::to_string(r));
    for (const Triple& t : source_triples) b.add_triple(t);
    d.source = std::move(b).build();
  }
  {
    KnowledgeGraph::Builder b;
    for (std::size_t i = 0; i < p.n_entities; ++i) b.add_entity("t" + std::to_string(i));
    for (std::size_t r = 0; r < p.n_relations; ++r) b.add_relation("q" + std::to_string(r));
    for (const Triple& t : target_triples) b.add_triple(t);
    d.target = std::move(b).build();
  }
  std::vector<EntityPair> gold;
  gold.reserve(n_matched);
  for (std::size_t i = 0; i < n_matched; ++i) gold.emplace_back(order[i], to_target[order[i]]);
  d.alignment = split_alignment(std::move(gold), p.split, derive_seed(p.seed, "split"));
  return d;
}

}  // namespace kgalign
