#include <cstdlib>

#include "doctest.h"
#include "seedprompt/errors.hpp"
#include "seedprompt/prompt.hpp"
#include "test_helpers.hpp"

using namespace seedprompt;

namespace {

Instance sample() {
  Instance inst;
  inst.id = "p1";
  inst.question = "Which drug?";
  inst.options = {{'A', "aspirin"}, {'B', "heparin"}, {'C', "c"}, {'D', "d"}, {'E', "e"}};
  inst.answer = 'A';
  inst.analysis = "r";
  return inst;
}

SeedResult seeds_cd() {
  SeedResult s;
  s.seeds = {{normalize_entity("c"), 3, 0.2}, {normalize_entity("d"), 3, 0.2}};
  return s;
}

const std::vector<Exemplar>& shipped_exemplars() {
  static const auto ex = load_exemplars(source_path("data/exemplars/fewshot.jsonl"));
  return ex;
}

bool contains(const std::string& hay, std::string_view needle) {
  return hay.find(needle) != std::string::npos;
}

void check_snapshot(const std::string& name, const std::string& actual) {
  const auto path = source_path("tests/fixtures/snapshots/" + name);
  if (std::getenv("SEEDPROMPT_UPDATE_SNAPSHOTS")) write_file_atomic(path, actual);
  CHECK(read_file(path) == actual);
}

constexpr std::string_view kStepInstruction = "step by step";
constexpr std::string_view kStepFashion = "step-by-step";
constexpr std::string_view kDirectAnswer = "output the correct answer";
constexpr std::string_view kSeedBlock = "knowledge seeds:";

}  // namespace

TEST_CASE("zero-shot standard QA prompt") {
  const RenderedPrompt p = compose(sample(), PromptSpec{});
  CHECK(p.text ==
        "Here is a multi-choice question about medical knowledge, please output the correct "
        "answer according to the question.\n\n"
        "Question: Which drug?\nA. aspirin\nB. heparin\nC. c\nD. d\nE. e");
  CHECK_FALSE(contains(p.text, "Analysis"));
  CHECK(p.estimated_tokens == estimate_tokens(p.text));
  CHECK(p.exemplars_used == 0);
}

TEST_CASE("zero-shot ICP prompt ends with the seed block") {
  PromptSpec spec;
  spec.mode = PromptMode::kIcp;
  const RenderedPrompt p = compose(sample(), spec, seeds_cd());
  CHECK(p.text.ends_with("E. e\nknowledge seeds: c、d"));
  CHECK(p.text.starts_with("Here is a clinical question, please refer to the knowledge seeds "
                           "related to question-solving, and analyze this question step by step."));
}

TEST_CASE("rendering is deterministic") {
  PromptSpec spec;
  spec.mode = PromptMode::kIcp;
  spec.shots = Shots::kFew;
  spec.exemplars = shipped_exemplars();
  CHECK(compose(sample(), spec, seeds_cd()) == compose(sample(), spec, seeds_cd()));
}

TEST_CASE("mode separation holds for every mode and shot setting") {
  for (Shots shots : {Shots::kZero, Shots::kFew}) {
    for (PromptMode mode : {PromptMode::kStandardQa, PromptMode::kCot, PromptMode::kIcp}) {
      PromptSpec spec;
      spec.mode = mode;
      spec.shots = shots;
      spec.exemplars = shipped_exemplars();
      const auto seeds = mode == PromptMode::kIcp ? std::optional(seeds_cd()) : std::nullopt;
      const std::string text = compose(sample(), spec, seeds).text;
      switch (mode) {
        case PromptMode::kStandardQa:
          CHECK_FALSE(contains(text, kStepInstruction));
          CHECK_FALSE(contains(text, kStepFashion));
          CHECK_FALSE(contains(text, kSeedBlock));
          CHECK_FALSE(contains(text, "Analysis:"));
          break;
        case PromptMode::kCot:
          CHECK_FALSE(contains(text, kSeedBlock));
          CHECK_FALSE(contains(text, kDirectAnswer));
          CHECK(contains(text, kStepFashion));
          break;
        case PromptMode::kIcp:
          CHECK(contains(text, kSeedBlock));
          CHECK_FALSE(contains(text, kDirectAnswer));
          break;
      }
    }
  }
}

TEST_CASE("few-shot snapshots") {
  PromptSpec spec;
  spec.shots = Shots::kFew;
  spec.exemplars = shipped_exemplars();
  REQUIRE(spec.exemplars.size() == 6);
  check_snapshot("standard_qa_few.txt", compose(sample(), spec).text);
  spec.mode = PromptMode::kCot;
  check_snapshot("cot_few.txt", compose(sample(), spec).text);
  spec.mode = PromptMode::kIcp;
  const RenderedPrompt icp = compose(sample(), spec, seeds_cd());
  check_snapshot("icp_few.txt", icp.text);
  CHECK(icp.exemplars_used == 6);
  CHECK(icp.estimated_tokens <= kDefaultPromptBudget);
}

TEST_CASE("exemplars keep configuration order") {
  PromptSpec spec;
  spec.shots = Shots::kFew;
  spec.mode = PromptMode::kCot;
  spec.exemplars = shipped_exemplars();
  const std::string text = compose(sample(), spec).text;
  std::size_t last = 0;
  for (std::size_t i = 0; i < spec.exemplars.size(); ++i) {
    const std::size_t at = text.find(spec.exemplars[i].question);
    REQUIRE(at != std::string::npos);
    CHECK(at >= last);
    last = at;
    CHECK(contains(text, "Example " + std::to_string(i + 1) + ":"));
  }
}

TEST_CASE("token estimate heuristic") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("abcdefgh") == 2);
  CHECK(estimate_tokens("帕金森病人") == 5);
  CHECK(estimate_tokens("abc中de") == 3);
  CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("token estimate is subadditive with one token of slack") {
  const std::vector<std::string> pieces = {"", "a", "abc", "abcd", "中", "ab中cd", "xyz ", "文本"};
  for (const auto& a : pieces) {
    for (const auto& b : pieces) {
      CHECK(estimate_tokens(a + b) <= estimate_tokens(a) + estimate_tokens(b) + 1);
    }
  }
}

TEST_CASE("token estimate is monotone in prefix length") {
  const std::string s = "使用 levodopa 治疗帕金森病, dose 100mg 每日三次";
  std::size_t prev = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) continue;
    const std::size_t t = estimate_tokens(s.substr(0, i));
    CHECK(t >= prev);
    prev = t;
  }
}

TEST_CASE("budget fitting drops whole exemplars from the end") {
  PromptParts parts;
  parts.instruction = "instr";
  parts.core = "core";
  for (int i = 0; i < 6; ++i) parts.exemplar_blocks.push_back("exemplar-" + std::to_string(i) + std::string(40, 'x'));

  const RenderedPrompt all = fit_to_budget(parts, 10000);
  CHECK(all.exemplars_used == 6);
  CHECK(all.text == assemble(parts, 6));

  const std::size_t four = estimate_tokens(assemble(parts, 4));
  const RenderedPrompt cut = fit_to_budget(parts, four);
  CHECK(cut.exemplars_used == 4);
  CHECK(cut.text.find("exemplar-3") != std::string::npos);
  CHECK(cut.text.find("exemplar-4") == std::string::npos);
  CHECK(cut.text.find("exemplar-0") < cut.text.find("exemplar-3"));

  CHECK_THROWS_AS(fit_to_budget(parts, estimate_tokens(assemble(parts, 0)) - 1), BudgetError);
}

TEST_CASE("compose contract errors") {
  PromptSpec icp;
  icp.mode = PromptMode::kIcp;
  CHECK_THROWS_AS(compose(sample(), icp), PromptError);
  CHECK_THROWS_AS(compose(sample(), PromptSpec{}, seeds_cd()), PromptError);
  PromptSpec few;
  few.shots = Shots::kFew;
  CHECK_THROWS_AS(compose(sample(), few), PromptError);
  PromptSpec tiny;
  tiny.token_budget = 5;
  CHECK_THROWS_AS(compose(sample(), tiny), BudgetError);
}

TEST_CASE("pluggable counter") {
  PromptSpec spec;
  spec.counter = [](std::string_view s) { return s.size(); };
  CHECK(compose(sample(), spec).estimated_tokens == compose(sample(), spec).text.size());
}

TEST_CASE("template file round trip and validation") {
  const PromptTemplate& def = default_template();
  const PromptTemplate back = parse_template(template_to_json(def));
  CHECK(template_to_json(back) == template_to_json(def));
  CHECK(read_file(source_path("data/templates/default.json")) == template_to_json(def));

  nlohmann::json custom = nlohmann::json::parse(template_to_json(def));
  custom["question"] = "Q {{literal}}: {question}";
  PromptTemplate t = parse_template(custom.dump());
  PromptSpec spec;
  spec.templates = t;
  CHECK(contains(compose(sample(), spec).text, "Q {literal}: Which drug?"));

  custom["question"] = "Q: {nonsense}";
  CHECK_THROWS_AS(parse_template(custom.dump()), ConfigError);
}

TEST_CASE("few-shot prompts for every shipped exemplar set fit the context window") {
  for (PromptMode mode : {PromptMode::kStandardQa, PromptMode::kCot, PromptMode::kIcp}) {
    PromptSpec spec;
    spec.mode = mode;
    spec.shots = Shots::kFew;
    spec.exemplars = shipped_exemplars();
    const auto p = compose(sample(), spec, mode == PromptMode::kIcp ? std::optional(seeds_cd())
                                                                   : std::nullopt);
    CHECK(p.estimated_tokens + default_max_tokens(p.estimated_tokens) <= kContextWindowTokens);
  }
}
