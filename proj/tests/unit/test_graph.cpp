#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "seedprompt/errors.hpp"
#include "seedprompt/graph.hpp"
#include "test_helpers.hpp"

using namespace seedprompt;

namespace {

// Toy corpus T: I1 qo={a,b} r={c,d}; I2 qo={a} r={c}; I3 qo={b,e} r={d}.
std::vector<oracle::RawInstance> toy() {
  return {{{"a", "b"}, {"c", "d"}}, {{"a"}, {"c"}}, {{"b", "e"}, {"d"}}};
}

Entity E(const char* s) { return normalize_entity(s); }

void check_matches_oracle(const std::vector<oracle::RawInstance>& corpus, std::size_t workers) {
  const KnowledgeGraph g = build_graph(oracle::to_annotated(corpus), workers);
  const oracle::Graph o = oracle::build_graph(corpus);
  REQUIRE(g.node_count() == o.nodes.size());
  std::size_t edges = 0;
  for (std::size_t i = 0; i < o.nodes.size(); ++i) {
    CHECK(g.nodes()[i].str() == o.nodes[i]);
    CHECK(g.analysis_freq(E(o.nodes[i].c_str())) == o.freq.at(o.nodes[i]));
  }
  for (const auto& [pair, count] : o.count) {
    const Entity s = E(pair.first.c_str());
    const Entity t = E(pair.second.c_str());
    CHECK(g.raw_count(s, t) == count);
    if (count > 0) {
      ++edges;
      REQUIRE(g.weight(s, t).has_value());
      CHECK(std::abs(*g.weight(s, t) - o.weight.at(pair)) <= 1e-9);
    } else {
      CHECK_FALSE(g.weight(s, t).has_value());
    }
  }
  CHECK(g.edge_count() == edges);
}

}  // namespace

TEST_CASE("toy corpus weights") {
  const KnowledgeGraph g = build_graph(oracle::to_annotated(toy()));
  CHECK(g.node_count() == 5);
  CHECK(g.raw_count(E("a"), E("c")) == 2);
  CHECK(g.raw_count(E("a"), E("d")) == 1);
  CHECK(g.raw_count(E("c"), E("a")) == -1);
  CHECK(g.analysis_freq(E("c")) == 2);
  CHECK(*g.weight(E("a"), E("c")) == doctest::Approx(2.0 / 3.0 * std::log10(5.0 / 3.0)).epsilon(1e-12));
  CHECK(*g.weight(E("a"), E("c")) == doctest::Approx(0.14786).epsilon(1e-4));
  CHECK(*g.weight(E("a"), E("d")) == doctest::Approx(0.07393).epsilon(1e-4));
  // log10(5/3) is shared by c and d, so the row shares decide the order.
  CHECK(g.rank_position(E("a"), E("c")) == 1u);
  CHECK(g.rank_position(E("a"), E("d")) == 2u);
  CHECK_FALSE(g.rank_position(E("c"), E("a")).has_value());
}

TEST_CASE("entity that is never an analysis target has no incoming edges") {
  const KnowledgeGraph g = build_graph(oracle::to_annotated(toy()));
  for (const Entity& n : g.nodes()) CHECK_FALSE(g.weight(n, E("e")).has_value());
  CHECK(g.out_degree(E("e")) == 1);
}

TEST_CASE("empty corpus gives an empty graph") {
  const KnowledgeGraph g = build_graph({});
  CHECK(g.node_count() == 0);
  CHECK(g.edge_count() == 0);
  CHECK(deserialize_graph(serialize_graph(g)) == g);
}

TEST_CASE("neighbor lists sort by weight with name tie-break") {
  // x -> {p, q} with equal counts and equal frequencies.
  const std::vector<oracle::RawInstance> corpus = {{{"x"}, {"q", "p"}}};
  const KnowledgeGraph g = build_graph(oracle::to_annotated(corpus));
  const NeighborList list = g.neighbors(E("x"));
  REQUIRE(list.targets.size() == 2);
  CHECK(list.targets[0].target.str() == "p");
  CHECK(list.targets[1].target.str() == "q");
  CHECK(list.targets[0].weight == list.targets[1].weight);
}

TEST_CASE("graph matches the triple-loop oracle on fuzzed corpora") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto corpus = oracle::random_corpus(rng, 20, 15);
    check_matches_oracle(corpus, 1 + static_cast<std::size_t>(trial % 4));
  }
}

TEST_CASE("sharded build equals a single pass") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto annotated = oracle::to_annotated(oracle::random_corpus(rng, 40, 15));
    CHECK(build_graph(annotated, 1) == build_graph(annotated, 7));
  }
}

TEST_CASE("save and load round trip") {
  TempDir dir;
  std::mt19937_64 rng(9);
  const KnowledgeGraph g = build_graph(oracle::to_annotated(oracle::random_corpus(rng, 20, 15)));
  save_graph(g, dir / "g.bin");
  CHECK(load_graph(dir / "g.bin") == g);
  CHECK(serialize_graph(g) == serialize_graph(load_graph(dir / "g.bin")));
}

TEST_CASE("corrupt graph files are rejected by kind") {
  const KnowledgeGraph g = build_graph(oracle::to_annotated(toy()));
  const std::string bytes = serialize_graph(g);
  auto kind_of = [](const std::string& data) {
    try {
      deserialize_graph(data);
    } catch (const GraphFormatError& e) {
      return e.kind();
    }
    FAIL("expected GraphFormatError");
    return GraphFormatError::Kind::kInvalid;
  };

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(kind_of(bad_magic) == GraphFormatError::Kind::kVersion);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK(kind_of(bad_version) == GraphFormatError::Kind::kVersion);

  CHECK(kind_of(bytes.substr(0, bytes.size() - 5)) == GraphFormatError::Kind::kTruncated);
  CHECK(kind_of(bytes.substr(0, 30)) == GraphFormatError::Kind::kTruncated);

  std::string flipped = bytes;
  flipped[bytes.size() - 40] ^= 0x01;
  CHECK(kind_of(flipped) == GraphFormatError::Kind::kChecksum);

  CHECK(kind_of(bytes + "x") == GraphFormatError::Kind::kInvalid);
}
