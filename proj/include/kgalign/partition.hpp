#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kgalign/graph.hpp"
#include "kgalign/merge.hpp"

namespace kgalign {

using BlockId = std::uint32_t;

struct Partition {
  std::vector<BlockId> assignment;  // joint node -> block
  std::uint32_t num_blocks = 0;
  std::size_t cut_edges = 0;        // triples whose endpoints lie in different blocks

  std::vector<std::size_t> block_sizes() const;
};

/// Undirected weighted graph in CSR form; parallel edges collapse to multiplicity.
struct WeightedGraph {
  std::vector<std::size_t> xadj{0};
  std::vector<std::uint32_t> adjncy;
  std::vector<std::int64_t> adjwgt;
  std::vector<std::int64_t> vwgt;

  std::size_t num_nodes() const { return vwgt.size(); }
  std::int64_t total_weight() const;

  static WeightedGraph from(const KnowledgeGraph& g);
};

struct PartitionOptions {
  std::uint32_t num_blocks = 5;
  double epsilon = 0.05;
  std::uint64_t seed = 0;
  std::size_t initial_trials = 8;
};

/// Largest allowed block size: ceil((1 + epsilon) * nodes / blocks).
std::size_t block_capacity(std::size_t nodes, std::uint32_t blocks, double epsilon);

/// Multilevel balanced k-way min-cut partitioning of an undirected weighted graph.
std::vector<BlockId> partition_weighted(const WeightedGraph& g, const PartitionOptions& opts);

/// Partitions any knowledge graph (structure only, direction ignored).
Partition partition_graph(const KnowledgeGraph& g, const PartitionOptions& opts);

/// Partitions the joint graph of a merge.
Partition partition(const MergedGraph& m, std::uint32_t num_blocks, double epsilon, std::uint64_t seed);

/// Counts triples of `g` whose endpoints fall into different blocks.
std::size_t count_cut(const KnowledgeGraph& g, const std::vector<BlockId>& assignment);

/// Fraction of pairs whose joint nodes share a block; 1.0 for an empty set.
double preserved_alignment_recall(const Partition& p, const MergedGraph& m, const std::vector<EntityPair>& pairs);

/// A training mini-batch: one partition block plus the landmarks recalled into it.
struct Subgraph {
  BlockId block = 0;
  std::vector<EntityId> core;       // sorted joint nodes of the block
  std::vector<EntityId> landmarks;  // sorted joint nodes recalled from outside
  std::vector<Triple> triples;      // joint triples with both ends in core ∪ landmarks

  /// Sorted union of core and landmarks.
  std::vector<EntityId> nodes() const;
  std::size_t size() const { return core.size() + landmarks.size(); }
};

/// Re-derives `s.triples` from the joint graph for the current node set.
void induce_triples(Subgraph& s, const MergedGraph& m);

std::vector<Subgraph> induce_subgraphs(const Partition& p, const MergedGraph& m);

void write_partition(const Partition& p, const std::filesystem::path& file);
Partition read_partition(const std::filesystem::path& file);

}  // namespace kgalign
