#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seedprompt/entity.hpp"

namespace seedprompt {

struct Neighbor {
  Entity target;
  double weight = 0.0;
};

// Out-edges of one source, strongest first; equal weights ordered by
// ascending entity string.
struct NeighborList {
  Entity source;
  std::vector<Neighbor> targets;
};

// Directed co-occurrence graph. An edge i -> j counts the training instances
// whose question/options mention e_i while the analysis mentions e_j. Its
// weight is the row-normalized count damped by log10(m / (1 + c_j)), where m
// is the node count and c_j the number of analyses mentioning e_j.
// Immutable once built.
class KnowledgeGraph {
 public:
  struct Edge {
    std::uint32_t target = 0;
    std::uint64_t count = 0;
    double weight = 0.0;
  };

  KnowledgeGraph() = default;

  // `nodes` strictly ascending; `counts` keyed by (source, target) node index
  // with counts >= 1; `analysis_freq` one entry per node.
  KnowledgeGraph(std::vector<Entity> nodes,
                 const std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>& counts,
                 std::vector<std::uint64_t> analysis_freq);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const std::vector<Entity>& nodes() const { return nodes_; }
  std::optional<std::uint32_t> index_of(const Entity& e) const;

  // Raw co-occurrence count, or -1 for an absent pair.
  std::int64_t raw_count(const Entity& source, const Entity& target) const;
  std::optional<double> weight(const Entity& source, const Entity& target) const;
  std::uint64_t analysis_freq(const Entity& e) const;
  std::uint64_t analysis_freq(std::uint32_t node) const { return analysis_freq_[node]; }

  // Edges of a source sorted by target index.
  std::span<const Edge> out_edges(std::uint32_t source) const;

  // Neighbor order, 0-based positions into out_edges() sorted by weight.
  std::span<const std::uint32_t> ranked_targets(std::uint32_t source) const;

  NeighborList neighbors(const Entity& e) const;

  // 1-based position of `target` in the neighbor order of `source`, or
  // nullopt when there is no such edge.
  std::optional<std::size_t> rank_position(const Entity& source, const Entity& target) const;
  std::size_t out_degree(const Entity& source) const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b);

 private:
  std::vector<Entity> nodes_;
  std::vector<std::uint64_t> analysis_freq_;
  std::vector<std::size_t> row_offsets_;          // CSR offsets, size m + 1
  std::vector<Edge> edges_;                       // target-sorted per row
  std::vector<std::uint32_t> ranked_;             // per row: edge positions by rank
  std::vector<std::uint32_t> rank_of_edge_;       // per edge: 1-based rank
  std::size_t edge_count_ = 0;
};

// Accumulates counts from annotated instances. Builders over disjoint shards
// merge into the same graph a single pass would give.
class GraphBuilder {
 public:
  void add(const AnnotatedInstance& instance);
  void merge(const GraphBuilder& other);
  KnowledgeGraph finish() const;

 private:
  std::set<Entity> nodes_;
  std::map<std::pair<Entity, Entity>, std::uint64_t> counts_;
  std::map<Entity, std::uint64_t> analysis_freq_;
};

KnowledgeGraph build_graph(const std::vector<AnnotatedInstance>& train,
                           std::size_t workers = 1);

// Binary layout (little endian):
//   magic "KSGRAPH\0", u32 version, u64 node count, u64 edge count,
//   nodes  : (u32 byte length, UTF-8 bytes) per node, ascending
//   edges  : (u32 source, u32 target, u64 count) sorted by (source, target)
//   freqs  : u64 per node
//   trailer: SHA-256 of every preceding byte
inline constexpr std::uint32_t kGraphFormatVersion = 1;

std::string serialize_graph(const KnowledgeGraph& graph);
KnowledgeGraph deserialize_graph(std::string_view bytes);
void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);
KnowledgeGraph load_graph(const std::filesystem::path& path);

}  // namespace seedprompt
