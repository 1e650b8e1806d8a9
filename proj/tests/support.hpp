#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kgalign/graph.hpp"
#include "kgalign/merge.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    path_ = fs::temp_directory_path() / ("kgalign_" + tag + "_" + std::to_string(gen()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using LabeledTriple = std::tuple<std::string, std::string, std::string>;

inline kgalign::KnowledgeGraph make_graph(const std::vector<LabeledTriple>& triples,
                                          const std::vector<std::string>& extra_entities = {}) {
  kgalign::KnowledgeGraph::Builder b;
  for (const auto& [h, r, t] : triples) b.add_triple(h, r, t);
  for (const auto& e : extra_entities) b.add_entity(e);
  return std::move(b).build();
}

/// Graph on entities "0".."n-1" with one relation and the given undirected edges.
inline kgalign::KnowledgeGraph numbered_graph(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  kgalign::KnowledgeGraph::Builder b;
  for (std::size_t i = 0; i < n; ++i) b.add_entity(std::to_string(i));
  b.add_relation("r");
  for (auto [u, v] : edges) b.add_triple({static_cast<kgalign::EntityId>(u), 0, static_cast<kgalign::EntityId>(v)});
  return std::move(b).build();
}

/// Joint view of a single graph: merge against an empty graph, so joint ids equal entity ids.
inline kgalign::MergedGraph single_merged(const kgalign::KnowledgeGraph& g) {
  return kgalign::merge_graphs(g, kgalign::KnowledgeGraph{}, {});
}

inline std::vector<std::pair<int, int>> path_edges(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return e;
}

}  // namespace testing
