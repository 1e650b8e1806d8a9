#pragma once

#include <vector>

#include "kgalign/graph.hpp"

namespace kgalign {

/// Joint graph obtained by collapsing every seed pair into one node.
///
/// Node layout: joint ids 0..|E1|-1 are the source entities (a seed pair sits at
/// its source id), followed by the non-seed target entities in target id order.
/// Relations are tagged per graph: source relation r keeps id r, target relation
/// r becomes `source_relations + r`.
struct MergedGraph {
  KnowledgeGraph joint;
  std::vector<EntityId> source_to_joint;
  std::vector<EntityId> target_to_joint;
  std::vector<EntityId> joint_source;  // kNoEntity when the node has no source side
  std::vector<EntityId> joint_target;  // kNoEntity when the node has no target side
  std::size_t source_relations = 0;

  std::size_t num_nodes() const { return joint.num_entities(); }
  bool is_seed(EntityId node) const {
    return joint_source[node] != kNoEntity && joint_target[node] != kNoEntity;
  }
  std::vector<EntityId> seed_nodes() const;
  /// Joint nodes of a (source, target) pair, in that order.
  EntityPair forward(EntityPair pair) const { return {source_to_joint[pair.first], target_to_joint[pair.second]}; }
};

MergedGraph merge_graphs(const KnowledgeGraph& source, const KnowledgeGraph& target,
                         const std::vector<EntityPair>& train);

}  // namespace kgalign
