#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seedprompt/corpus.hpp"
#include "seedprompt/llm_client.hpp"
#include "seedprompt/seeds.hpp"

namespace seedprompt {

enum class PromptMode { kStandardQa, kCot, kIcp };
enum class Shots { kZero, kFew };

std::string_view to_string(PromptMode mode);
std::string_view to_string(Shots shots);
PromptMode parse_mode(std::string_view s);
Shots parse_shots(std::string_view s);

// Scaffolding strings around the instruction sentences. Fields may use the
// placeholders {index}, {question}, {label}, {text}, {seeds}, {analysis},
// {answer}; which ones are legal depends on the field.
struct PromptTemplate {
  int version = 1;
  std::string standard_qa_instruction;
  std::string cot_instruction;
  std::string icp_instruction;
  std::string exemplar_header;  // {index}
  std::string question_line;    // {question}
  std::string option_line;      // {label} {text}
  std::string seeds_line;       // {seeds}
  std::string seed_delimiter;
  std::string analysis_line;    // {analysis}
  std::string answer_line;      // {answer}
  std::string block_separator;

  const std::string& instruction(PromptMode mode) const;
};

const PromptTemplate& default_template();
PromptTemplate parse_template(std::string_view json_text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string template_to_json(const PromptTemplate& tmpl);

struct Exemplar {
  std::string question;
  std::map<char, std::string> options;
  std::optional<std::vector<std::string>> seeds;
  std::string analysis;
  char answer = 0;
};

// Same record layout as datasets plus an optional "seeds" array.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);
std::vector<Exemplar> parse_exemplars(std::string_view content);

using TokenCounter = std::function<std::size_t(std::string_view)>;

// One token per CJK codepoint; every maximal run of other codepoints costs
// ceil(length / 4).
std::size_t estimate_tokens(std::string_view text);

inline constexpr std::size_t kDefaultPromptBudget = kContextWindowTokens - kMinResponseTokens;

struct PromptSpec {
  PromptMode mode = PromptMode::kStandardQa;
  Shots shots = Shots::kZero;
  std::vector<Exemplar> exemplars;
  std::size_t token_budget = kDefaultPromptBudget;
  PromptTemplate templates = default_template();
  TokenCounter counter = estimate_tokens;
};

struct RenderedPrompt {
  std::string text;
  std::size_t estimated_tokens = 0;
  PromptMode mode = PromptMode::kStandardQa;
  Shots shots = Shots::kZero;
  std::size_t exemplars_used = 0;

  friend bool operator==(const RenderedPrompt& a, const RenderedPrompt& b) {
    return a.text == b.text && a.estimated_tokens == b.estimated_tokens &&
           a.mode == b.mode && a.shots == b.shots && a.exemplars_used == b.exemplars_used;
  }
};

struct PromptParts {
  std::string instruction;
  std::vector<std::string> exemplar_blocks;
  std::string core;  // target question, options and seeds
  std::string separator = "\n\n";
};

std::string assemble(const PromptParts& parts, std::size_t exemplar_count);

// Drops whole exemplars from the end until the prompt fits. Throws
// BudgetError when instruction plus core alone do not fit.
RenderedPrompt fit_to_budget(const PromptParts& parts, std::size_t budget,
                             const TokenCounter& counter = estimate_tokens);

// Seeds must be given exactly when spec.mode is kIcp.
RenderedPrompt compose(const Instance& instance, const PromptSpec& spec,
                       const std::optional<SeedResult>& seeds = std::nullopt);

}  // namespace seedprompt
