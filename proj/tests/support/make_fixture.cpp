// Builds the replay fixture for the 20-instance end-to-end test.
//
// Input is a records file from a replay run against an empty fixture: every
// record then carries the digest of the request it would have sent. Each
// digest gets a canned response whose outcome is fixed by instance position,
// so the expected accuracy is known in advance (13 of 20 correct).
//
//   make_fixture <records.jsonl> <test.jsonl> <fixture.jsonl>

#include <array>
#include <iostream>
#include <set>

#include "seedprompt/corpus.hpp"
#include "seedprompt/evaluation.hpp"
#include "seedprompt/llm_client.hpp"

namespace sp = seedprompt;

namespace {

constexpr std::array<std::size_t, 3> kUnresolved = {2, 11, 19};
constexpr std::array<std::size_t, 4> kWrong = {5, 8, 14, 17};

char other_label(const sp::Instance& instance) {
  for (const auto& [label, text] : instance.options) {
    if (label != instance.answer) return label;
  }
  return instance.answer;
}

std::string closing(std::size_t index, char label) {
  switch (index % 4) {
    case 0: return std::string("所以答案是") + label + "。";
    case 1: return std::string("Answer: ") + label;
    case 2: return std::string("综上，正确答案为") + label + "。";
    default: return std::string("\n") + label;
  }
}

std::string response_for(std::size_t index, const sp::Instance& instance, sp::PromptMode mode) {
  std::string body;
  if (mode != sp::PromptMode::kStandardQa) {
    // First sentence of the gold analysis, so text metrics are non-trivial.
    const std::string& analysis = instance.analysis;
    const std::size_t stop = analysis.find("。");
    body = analysis.substr(0, stop == std::string::npos ? analysis.size() : stop + 3);
  }
  const std::set<std::size_t> unresolved(kUnresolved.begin(), kUnresolved.end());
  const std::set<std::size_t> wrong(kWrong.begin(), kWrong.end());
  if (unresolved.contains(index)) {
    return body + "本题既可能是" + instance.options.begin()->first + "也可能是" +
           instance.options.rbegin()->first + "，需要更多信息";
  }
  const char label = wrong.contains(index) ? other_label(instance) : instance.answer;
  return body + closing(index, label);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_fixture <records.jsonl> <test.jsonl> <fixture.jsonl>\n";
    return 1;
  }
  try {
    const auto records = sp::load_records(argv[1]);
    const sp::Dataset test = sp::load_dataset(argv[2]);
    if (records.size() != test.size()) throw sp::Error("records and dataset differ in length");

    std::vector<sp::FixtureEntry> entries;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].id != test[i].id) throw sp::Error("record order does not match dataset");
      if (records[i].prompt_digest.empty()) throw sp::Error("record without digest: " + test[i].id);
      entries.push_back({records[i].prompt_digest, response_for(i, test[i], records[i].mode),
                         "stop"});
    }
    sp::write_file_atomic(argv[3], sp::serialize_fixture(entries));
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
