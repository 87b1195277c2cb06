#include <set>

#include "doctest.h"
#include "seedprompt/corpus.hpp"
#include "seedprompt/errors.hpp"
#include "test_helpers.hpp"

using namespace seedprompt;

namespace {

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " w" : "w") + std::to_string(i);
  return out;
}

Dataset numbered(std::size_t n) {
  std::vector<Instance> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(make_instance("q" + std::to_string(i)));
  return Dataset(v);
}

std::vector<std::string> ids(const Dataset& d) {
  std::vector<std::string> out;
  for (const auto& i : d) out.push_back(i.id);
  return out;
}

}  // namespace

TEST_CASE("load keeps record order and accepts an empty file") {
  TempDir dir;
  const Dataset d = numbered(3);
  save_dataset(d, dir / "d.jsonl");
  const Dataset back = load_dataset(dir / "d.jsonl");
  CHECK(back.size() == 3);
  CHECK(ids(back) == std::vector<std::string>{"q0", "q1", "q2"});

  write_file_atomic(dir / "empty.jsonl", "");
  CHECK(load_dataset(dir / "empty.jsonl").empty());
}

TEST_CASE("serialize then parse reproduces every field") {
  Instance a = make_instance("x1", "分析内容");
  a.metadata = {{"discipline", "内科"}, {"competency", "诊断"}};
  a.answer = 'C';
  const Dataset d({a, make_instance("x2")});
  const Dataset back = parse_dataset(serialize_dataset(d));
  CHECK(back.instances() == d.instances());
}

TEST_CASE("golden record layout") {
  Instance a = make_instance("id-1", "because", 2);
  a.metadata = {{"discipline", "surgery"}};
  CHECK(serialize_dataset(Dataset({a})) ==
        R"({"id":"id-1","question":"question text","options":{"A":"option A","B":"option B"},)"
        R"("answer":"A","analysis":"because","metadata":{"discipline":"surgery"}})"
        "\n");
}

TEST_CASE("answer outside the options names the record") {
  const std::string line =
      R"({"id":"bad-7","question":"q","options":{"A":"1","B":"2","C":"3","D":"4","E":"5"},"answer":"F","analysis":"r"})";
  try {
    parse_dataset(line);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("answer label not among options") != std::string::npos);
    CHECK(std::string(e.what()).find("bad-7") != std::string::npos);
    CHECK(e.line() == 1);
  }
}

TEST_CASE("malformed records report line and field") {
  const std::string content =
      "\n" R"({"id":"a","question":"q","options":{"A":"1"},"answer":"A","analysis":"r"})" "\n"
      R"({"id":"b","question":"  ","options":{"A":"1"},"answer":"A","analysis":"r"})" "\n";
  try {
    parse_dataset(content);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.line() == 3);
    CHECK(e.field() == "question");
  }
  CHECK_THROWS_AS(parse_dataset("{not json"), DataError);
}

TEST_CASE("duplicate ids are rejected") {
  CHECK_THROWS_AS(Dataset({make_instance("same"), make_instance("same")}), DataError);
}

TEST_CASE("labels are normalized on ingest") {
  CHECK(normalize_label("a") == 'A');
  CHECK(normalize_label("Ｅ") == 'E');
  CHECK(normalize_label("ｃ") == 'C');
  CHECK(normalize_label("F") == 0);
  const std::string line =
      R"({"id":"x","question":"q","options":{"ａ":"1","b":"2"},"answer":"Ｂ","analysis":"r"})";
  const Dataset d = parse_dataset(line);
  CHECK(d[0].answer == 'B');
  CHECK(d[0].options.contains('A'));
}

TEST_CASE("filter keeps analyses over the word threshold") {
  const Dataset d({make_instance("w10", words(10)), make_instance("w31", words(31)),
                   make_instance("w50", words(50)), make_instance("w30", words(30))});
  CHECK(ids(filter_instances(d, 5, 30)) == std::vector<std::string>{"w31", "w50"});
}

TEST_CASE("filter drops records with the wrong option count") {
  const Dataset d({make_instance("four", "r", 4), make_instance("five", "r", 5)});
  CHECK(ids(filter_instances(d, 5, 0)) == std::vector<std::string>{"five"});
  CHECK(filter_instances(d, 0, 0).size() == 2);
}

TEST_CASE("filter with zero threshold is the identity on conforming data") {
  const Dataset d = numbered(4);
  CHECK(filter_instances(d, 5, 0).instances() == d.instances());
}

TEST_CASE("filter counts CJK characters individually by default") {
  std::string analysis;
  for (int i = 0; i < 31; ++i) analysis += "字";
  const Dataset cjk({make_instance("cjk", analysis)});
  CHECK(filter_instances(cjk, 5, 30).size() == 1);
  CHECK(filter_instances(cjk, 5, 30, text::WordCountMode::kWhitespace).empty());
}

TEST_CASE("filter is idempotent") {
  std::vector<Instance> v;
  for (std::size_t i = 0; i < 40; ++i) v.push_back(make_instance("i" + std::to_string(i), words(i), 3 + i % 3));
  const Dataset d(v);
  for (std::size_t threshold : {0, 5, 20}) {
    const Dataset once = filter_instances(d, 5, threshold);
    CHECK(filter_instances(once, 5, threshold).instances() == once.instances());
  }
}

TEST_CASE("split is deterministic and partitions the dataset") {
  const Dataset d = numbered(10);
  const auto [t1, r1] = split_sample(d, 3, 7);
  const auto [t2, r2] = split_sample(d, 3, 7);
  CHECK(ids(t1) == ids(t2));
  CHECK(ids(r1) == ids(r2));
  CHECK(t1.size() == 3);
  CHECK(r1.size() == 7);
  CHECK(t1.split() == Split::kTest);
  CHECK(r1.split() == Split::kTrain);
  std::set<std::string> all;
  for (const auto& id : ids(t1)) all.insert(id);
  for (const auto& id : ids(r1)) all.insert(id);
  CHECK(all.size() == 10);
}

TEST_CASE("split boundaries") {
  const Dataset d = numbered(6);
  const auto [none, everything] = split_sample(d, 0, 1);
  CHECK(none.empty());
  CHECK(everything.instances() == d.instances());
  const auto [all_test, empty_train] = split_sample(d, 6, 1);
  CHECK(all_test.instances() == d.instances());
  CHECK(empty_train.empty());
  CHECK_THROWS_AS(split_sample(d, 7, 1), ConfigError);
}

TEST_CASE("split keeps original relative order in both halves") {
  const Dataset d = numbered(50);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [test, train] = split_sample(d, 17, seed);
    for (const Dataset* part : {&test, &train}) {
      const auto v = ids(*part);
      for (std::size_t i = 1; i < v.size(); ++i) {
        CHECK(std::stoi(v[i - 1].substr(1)) < std::stoi(v[i].substr(1)));
      }
    }
  }
}

TEST_CASE("different seeds usually give different splits") {
  const Dataset d = numbered(30);
  CHECK(ids(split_sample(d, 10, 1).first) != ids(split_sample(d, 10, 2).first));
}

TEST_CASE("stratified split allocates by group share") {
  std::vector<Instance> v;
  for (int i = 0; i < 20; ++i) {
    Instance inst = make_instance("s" + std::to_string(i));
    if (i < 10) inst.metadata["discipline"] = "a";
    else if (i < 16) inst.metadata["discipline"] = "b";
    v.push_back(inst);  // the last four have no discipline
  }
  const auto [test, train] = split_sample(Dataset(v), 10, 3, {.stratify_by = "discipline"});
  std::map<std::string, int> counts;
  for (const auto& inst : test) {
    auto it = inst.metadata.find("discipline");
    ++counts[it == inst.metadata.end() ? "unknown" : it->second];
  }
  CHECK(counts["a"] == 5);
  CHECK(counts["b"] == 3);
  CHECK(counts["unknown"] == 2);
  CHECK(train.size() == 10);
}
