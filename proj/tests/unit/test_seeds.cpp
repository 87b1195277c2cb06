#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "seedprompt/errors.hpp"
#include "seedprompt/seeds.hpp"
#include "test_helpers.hpp"

using namespace seedprompt;

namespace {

Entity E(const char* s) { return normalize_entity(s); }

KnowledgeGraph toy_graph() {
  return build_graph(oracle::to_annotated({{{"a", "b"}, {"c", "d"}}, {{"a"}, {"c"}}, {{"b", "e"}, {"d"}}}));
}

}  // namespace

TEST_CASE("toy corpus seeds") {
  const KnowledgeGraph g = toy_graph();
  const SeedResult r = mine_seeds(g, {E("a"), E("b")});
  REQUIRE(r.seeds.size() == 2);
  CHECK(r.seeds[0].entity.str() == "c");
  CHECK(r.seeds[1].entity.str() == "d");
  CHECK(r.seeds[0].score == 3);
  CHECK(r.seeds[1].score == 3);
  // Scores and incoming weights both tie (a favours c, b favours d); the name decides.
  CHECK(r.seeds[0].incoming_weight == r.seeds[1].incoming_weight);
}

TEST_CASE("rank positions and penalty") {
  const KnowledgeGraph g = toy_graph();
  CHECK(rank_of(g, E("a"), E("c")).value == 1);
  CHECK(rank_of(g, E("a"), E("c")).connected);
  const RankPosition missing = rank_of(g, E("e"), E("c"));
  CHECK_FALSE(missing.connected);
  CHECK(missing.value == g.out_degree(E("e")) + 1);
  CHECK(aggregate_score(g, {E("a"), E("b")}, E("c")) == 3);
  CHECK_THROWS_AS(aggregate_score(g, {}, E("c")), ConfigError);
}

TEST_CASE("k truncates, empty query returns nothing, k = 0 is rejected") {
  const KnowledgeGraph g = toy_graph();
  CHECK(mine_seeds(g, {E("a"), E("b")}, 1).seeds.size() == 1);
  CHECK(mine_seeds(g, {}).seeds.empty());
  CHECK_THROWS_AS(mine_seeds(g, {E("a")}, 0), ConfigError);
}

TEST_CASE("query entities absent from the graph only add a constant") {
  const KnowledgeGraph g = toy_graph();
  const SeedResult with = mine_seeds(g, {E("a"), E("b"), E("zzz")});
  const SeedResult without = mine_seeds(g, {E("a"), E("b")});
  REQUIRE(with.seeds.size() == without.seeds.size());
  for (std::size_t i = 0; i < with.seeds.size(); ++i) {
    CHECK(with.seeds[i].entity == without.seeds[i].entity);
    CHECK(with.seeds[i].score == without.seeds[i].score + 1);
  }
}

TEST_CASE("seeds never contain query entities") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto corpus = oracle::random_corpus(rng, 20, 15);
    const KnowledgeGraph g = build_graph(oracle::to_annotated(corpus));
    for (const auto& inst : corpus) {
      EntitySet x;
      for (const auto& e : inst.qo) x.insert(E(e.c_str()));
      for (const Seed& s : mine_seeds(g, x).seeds) CHECK_FALSE(x.contains(s.entity));
    }
  }
}

TEST_CASE("mined seeds equal exhaustive scoring") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto corpus = oracle::random_corpus(rng, 20, 15);
    const KnowledgeGraph g = build_graph(oracle::to_annotated(corpus));
    const oracle::Graph o = oracle::build_graph(corpus);
    std::uniform_int_distribution<std::size_t> qsize(1, 5), pick(0, 16), kdist(1, 12);
    std::set<std::string> query;
    for (std::size_t n = qsize(rng); n > 0; --n) query.insert(oracle::entity_name(pick(rng)));
    const std::size_t k = kdist(rng);

    EntitySet x;
    for (const auto& q : query) x.insert(E(q.c_str()));
    const SeedResult got = mine_seeds(g, x, k);
    const auto want = oracle::mine_seeds(o, query, k);
    REQUIRE(got.seeds.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.seeds[i].entity.str() == want[i].entity);
      CHECK(got.seeds[i].score == want[i].score);
      CHECK(std::abs(got.seeds[i].incoming_weight - want[i].incoming) <= 1e-9);
    }
  }
}

TEST_CASE("seed sidecar round trip") {
  TempDir dir;
  const KnowledgeGraph g = toy_graph();
  const SeedResult r = mine_seeds(g, {E("a"), E("b")}, 5);
  write_file_atomic(dir / "seeds.jsonl", serialize_seed_records({{"I1", r}}));
  const auto back = load_seed_records(dir / "seeds.jsonl");
  REQUIRE(back.contains("I1"));
  CHECK(back.at("I1").entities() == r.entities());
  CHECK(back.at("I1").k == 5);
  CHECK(back.at("I1").seeds[0].score == 3);
  CHECK(serialize_seed_records({{"I1", r}}) ==
        "{\"id\":\"I1\",\"k\":5,\"seeds\":[\"c\",\"d\"],\"scores\":[3,3]}\n");
}

TEST_CASE("toy corpus examples for ranks and scores") {
  const KnowledgeGraph g = toy_graph();
  CHECK(rank_of(g, E("a"), E("d")).value == 2);
  CHECK(rank_of(g, E("a"), E("e")).value == 3);
  CHECK(rank_of(g, E("unknown"), E("c")).value == 1);
  CHECK(aggregate_score(g, {E("a"), E("b")}, E("d")) == 3);
  CHECK(aggregate_score(g, {E("e")}, E("d")) == 1);

  const SeedResult r = mine_seeds(g, {E("a"), E("b")});
  CHECK(r.seeds[0].incoming_weight == doctest::Approx(0.22179).epsilon(1e-4));
  CHECK(mine_seeds(g, {E("q")}).seeds.empty());
  const SeedResult top = mine_seeds(g, {E("a"), E("b")}, 1);
  REQUIRE(top.seeds.size() == 1);
  CHECK(top.seeds[0].entity.str() == "c");
}
