#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seedprompt/graph.hpp"

namespace seedprompt {

inline constexpr std::size_t kDefaultSeedCount = 10;

// Position of a candidate in one query entity's neighbor list. Unconnected
// candidates get the finite penalty out_degree + 1.
struct RankPosition {
  std::size_t value = 0;
  bool connected = false;
};

RankPosition rank_of(const KnowledgeGraph& graph, const Entity& query, const Entity& candidate);

// Sum of rank_of over every query entity. Lower is better.
// Throws ConfigError on an empty query.
std::uint64_t aggregate_score(const KnowledgeGraph& graph, const EntitySet& query,
                              const Entity& candidate);

struct Seed {
  Entity entity;
  std::uint64_t score = 0;
  double incoming_weight = 0.0;  // sum of weights of edges from the query

  friend bool operator==(const Seed&, const Seed&) = default;
};

struct SeedResult {
  std::vector<Seed> seeds;  // ascending score
  std::size_t k = kDefaultSeedCount;

  EntitySet entities() const;
  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

// Candidates are every neighbor of a query entity that is not itself in the
// query. Order: ascending aggregate score, then descending incoming weight,
// then ascending entity string. The first k are returned.
SeedResult mine_seeds(const KnowledgeGraph& graph, const EntitySet& query,
                      std::size_t k = kDefaultSeedCount);

// Seeds sidecar: one {"id", "seeds", "scores"} record per line.
std::string serialize_seed_records(const std::vector<std::pair<std::string, SeedResult>>& records);
std::map<std::string, SeedResult> load_seed_records(const std::filesystem::path& path);

}  // namespace seedprompt
