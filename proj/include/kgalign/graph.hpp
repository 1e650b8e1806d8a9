#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kgalign {

/// Raised for bad input data or parameters (CLI exit code 1).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a stage fails at run time (CLI exit code 2).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
inline constexpr EntityId kNoEntity = static_cast<EntityId>(-1);

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct AdjacencyEntry {
  EntityId neighbor;
  RelationId relation;
  bool outgoing;  // true when the owning entity is the head
};

/// Dense-id bijection between opaque labels and contiguous identifiers.
class LabelMap {
 public:
  std::uint32_t intern(const std::string& label);
  std::uint32_t at(const std::string& label) const;
  bool contains(const std::string& label) const { return index_.count(label) != 0; }
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> labels_;
};

/// Directed multi-relational graph with CSR adjacency in both directions.
///
/// Built once through a `Builder` and read-only afterwards.
class KnowledgeGraph {
 public:
  class Builder {
   public:
    EntityId add_entity(const std::string& label) { return entities_.intern(label); }
    RelationId add_relation(const std::string& label) { return relations_.intern(label); }
    void add_triple(const std::string& head, const std::string& relation, const std::string& tail);
    void add_triple(Triple t) { triples_.push_back(t); }
    KnowledgeGraph build() &&;

   private:
    LabelMap entities_;
    LabelMap relations_;
    std::vector<Triple> triples_;
  };

  KnowledgeGraph() = default;

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }
  const LabelMap& entities() const { return entities_; }
  const LabelMap& relations() const { return relations_; }

  /// Adjacency entries of `e`, one per incident triple end.
  std::pair<const AdjacencyEntry*, const AdjacencyEntry*> adjacency(EntityId e) const {
    return {adjacency_.data() + offsets_[e], adjacency_.data() + offsets_[e + 1]};
  }
  std::size_t degree(EntityId e) const { return offsets_[e + 1] - offsets_[e]; }
  bool is_isolated(EntityId e) const { return degree(e) == 0; }
  std::size_t num_isolated() const;
  /// Number of duplicate triples dropped while building.
  std::size_t dropped_duplicates() const { return dropped_duplicates_; }

 private:
  LabelMap entities_;
  LabelMap relations_;
  std::vector<Triple> triples_;
  std::vector<std::size_t> offsets_{0};
  std::vector<AdjacencyEntry> adjacency_;
  std::size_t dropped_duplicates_ = 0;
};

/// Undirected neighbor set of `e`, sorted ascending.
std::vector<EntityId> neighbors(const KnowledgeGraph& g, EntityId e);

using EntityPair = std::pair<EntityId, EntityId>;

struct AlignmentSet {
  std::vector<EntityPair> train;
  std::vector<EntityPair> valid;
  std::vector<EntityPair> test;

  std::size_t size() const { return train.size() + valid.size() + test.size(); }
};

struct SplitFractions {
  double train = 0.3;
  double valid = 0.1;
};

/// Deterministic seeded split of the gold links into train/valid/test.
AlignmentSet split_alignment(std::vector<EntityPair> gold, SplitFractions fractions, std::uint64_t seed);

struct Dataset {
  KnowledgeGraph source;
  KnowledgeGraph target;
  AlignmentSet alignment;
};

/// Reads rel_triples_1, rel_triples_2 and ent_links from `dir`.
Dataset load_dataset(const std::filesystem::path& dir, SplitFractions fractions, std::uint64_t seed);

/// Reads one TAB-separated triple file into a graph.
KnowledgeGraph read_triples(const std::filesystem::path& file);
void write_triples(const KnowledgeGraph& g, const std::filesystem::path& file);
void write_links(const std::vector<EntityPair>& links, const KnowledgeGraph& source,
                 const KnowledgeGraph& target, const std::filesystem::path& file);
std::vector<EntityPair> read_links(const std::filesystem::path& file, const KnowledgeGraph& source,
                                   const KnowledgeGraph& target);

/// Writes rel_triples_1/2, ent_links and the three split files.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Writes train_links, valid_links, test_links.
void write_splits(const Dataset& data, const std::filesystem::path& dir);

struct SyntheticParams {
  std::size_t n_entities = 1000;
  std::size_t n_relations = 20;
  double avg_degree = 4.0;
  double overlap_fraction = 1.0;
  std::uint64_t seed = 0;
  SplitFractions split{};
};

/// Random source graph plus a relabeled partial copy as target; gold links are the copy map.
Dataset generate_synthetic_pair(const SyntheticParams& params);

}  // namespace kgalign
