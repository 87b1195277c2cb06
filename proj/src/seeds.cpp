#include "seedprompt/seeds.hpp"

#include <algorithm>

#include "seedprompt/errors.hpp"

namespace seedprompt {

RankPosition rank_of(const KnowledgeGraph& graph, const Entity& query, const Entity& candidate) {
  if (auto position = graph.rank_position(query, candidate)) return {*position, true};
  return {graph.out_degree(query) + 1, false};
}

std::uint64_t aggregate_score(const KnowledgeGraph& graph, const EntitySet& query,
                              const Entity& candidate) {
  if (query.empty()) throw ConfigError("aggregate_score needs at least one query entity");
  std::uint64_t total = 0;
  for (const Entity& x : query) total += rank_of(graph, x, candidate).value;
  return total;
}

EntitySet SeedResult::entities() const {
  EntitySet out;
  for (const Seed& s : seeds) out.insert(s.entity);
  return out;
}

SeedResult mine_seeds(const KnowledgeGraph& graph, const EntitySet& query, std::size_t k) {
  if (k == 0) throw ConfigError("seed count k must be >= 1");
  SeedResult result;
  result.k = k;
  if (query.empty()) return result;

  // Candidate pool, with incoming weights summed in query order.
  std::map<Entity, double> pool;
  for (const Entity& x : query) {
    auto source = graph.index_of(x);
    if (!source) continue;
    for (const auto& edge : graph.out_edges(*source)) {
      const Entity& target = graph.nodes()[edge.target];
      if (query.contains(target)) continue;
      pool[target] += edge.weight;
    }
  }

  std::vector<Seed> candidates;
  candidates.reserve(pool.size());
  for (const auto& [entity, weight] : pool) {
    candidates.push_back(Seed{entity, aggregate_score(graph, query, entity), weight});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Seed& a, const Seed& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.incoming_weight != b.incoming_weight) return a.incoming_weight > b.incoming_weight;
    return a.entity < b.entity;
  });
  if (candidates.size() > k) candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());
  result.seeds = std::move(candidates);
  return result;
}

std::string serialize_seed_records(
    const std::vector<std::pair<std::string, SeedResult>>& records) {
  std::string out;
  for (const auto& [id, result] : records) {
    nlohmann::ordered_json record;
    record["id"] = id;
    std::vector<std::string> seeds;
    std::vector<std::uint64_t> scores;
    for (const Seed& s : result.seeds) {
      seeds.push_back(s.entity.str());
      scores.push_back(s.score);
    }
    record["k"] = result.k;
    record["seeds"] = seeds;
    record["scores"] = scores;
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::map<std::string, SeedResult> load_seed_records(const std::filesystem::path& path) {
  std::map<std::string, SeedResult> out;
  for (const auto& [line_no, line] : read_nonblank_lines(path)) {
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
        !record["id"].is_string() || !record.contains("seeds") ||
        !record["seeds"].is_array() || !record.contains("scores") ||
        !record["scores"].is_array() || record["seeds"].size() != record["scores"].size()) {
      throw DataError(path.string() + ": expected {id, seeds, scores} with equal lengths",
                      line_no);
    }
    SeedResult result;
    result.k = record.value("k", std::max<std::size_t>(kDefaultSeedCount,
                                                       record["seeds"].size()));
    for (std::size_t i = 0; i < record["seeds"].size(); ++i) {
      const auto& seed = record["seeds"][i];
      const auto& score = record["scores"][i];
      if (!seed.is_string() || !score.is_number_unsigned()) {
        throw DataError(path.string() + ": bad seed entry " + std::to_string(i), line_no);
      }
      result.seeds.push_back(
          Seed{normalize_entity(seed.get<std::string>()), score.get<std::uint64_t>(), 0.0});
    }
    const std::string id = record["id"].get<std::string>();
    if (!out.emplace(id, std::move(result)).second) {
      throw DataError(path.string() + ": duplicate id '" + id + "'", line_no, "id");
    }
  }
  return out;
}

}  // namespace seedprompt
