#include "kgalign/merge.hpp"

namespace kgalign {

std::vector<EntityId> MergedGraph::seed_nodes() const {
  std::vector<EntityId> seeds;
  for (EntityId v = 0; v < num_nodes(); ++v) {
    if (is_seed(v)) seeds.push_back(v);
  }
  return seeds;
}

MergedGraph merge_graphs(const KnowledgeGraph& source, const KnowledgeGraph& target,
                         const std::vector<EntityPair>& train) {
  const std::size_t n1 = source.num_entities();
  const std::size_t n2 = target.num_entities();
  MergedGraph m;
  m.source_to_joint.resize(n1);
  m.target_to_joint.assign(n2, kNoEntity);
  m.source_relations = source.num_relations();

  std::vector<EntityId> partner_of_source(n1, kNoEntity);
  for (auto [s, t] : train) {
    if (s >= n1 || t >= n2) throw ValidationError("seed pair references an invalid entity");
    if (partner_of_source[s] != kNoEntity || m.target_to_joint[t] != kNoEntity) {
      throw ValidationError("seed entity appears in more than one pair");
    }
    partner_of_source[s] = t;
    m.target_to_joint[t] = s;
  }

  KnowledgeGraph::Builder builder;
  for (EntityId s = 0; s < n1; ++s) {
    std::string label = "1:" + source.entities().label(s);
    if (partner_of_source[s] != kNoEntity) label += "|2:" + target.entities().label(partner_of_source[s]);
    m.source_to_joint[s] = builder.add_entity(label);
    m.joint_source.push_back(s);
    m.joint_target.push_back(partner_of_source[s]);
  }
  for (EntityId t = 0; t < n2; ++t) {
    if (m.target_to_joint[t] != kNoEntity) continue;
    m.target_to_joint[t] = builder.add_entity("2:" + target.entities().label(t));
    m.joint_source.push_back(kNoEntity);
    m.joint_target.push_back(t);
  }
  for (RelationId r = 0; r < source.num_relations(); ++r) builder.add_relation("1:" + source.relations().label(r));
  for (RelationId r = 0; r < target.num_relations(); ++r) builder.add_relation("2:" + target.relations().label(r));

  for (const Triple& t : source.triples()) {
    builder.add_triple({m.source_to_joint[t.head], t.relation, m.source_to_joint[t.tail]});
  }
  const auto offset = static_cast<RelationId>(m.source_relations);
  for (const Triple& t : target.triples()) {
    builder.add_triple({m.target_to_joint[t.head], offset + t.relation, m.target_to_joint[t.tail]});
  }
  m.joint = std::move(builder).build();
  return m;
}

}  // namespace kgalign
