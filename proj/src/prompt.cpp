#include "seedprompt/prompt.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "seedprompt/errors.hpp"
#include "seedprompt/text.hpp"

namespace seedprompt {

using nlohmann::json;

std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kStandardQa:
      return "standard_qa";
    case PromptMode::kCot:
      return "cot";
    case PromptMode::kIcp:
      return "icp";
  }
  return "standard_qa";
}

std::string_view to_string(Shots shots) { return shots == Shots::kZero ? "zero" : "few"; }

PromptMode parse_mode(std::string_view s) {
  if (s == "standard_qa" || s == "qa") return PromptMode::kStandardQa;
  if (s == "cot") return PromptMode::kCot;
  if (s == "icp") return PromptMode::kIcp;
  throw ConfigError("unknown prompt mode '" + std::string(s) +
                    "' (expected standard_qa, cot or icp)");
}

Shots parse_shots(std::string_view s) {
  if (s == "zero") return Shots::kZero;
  if (s == "few") return Shots::kFew;
  throw ConfigError("unknown shots setting '" + std::string(s) + "' (expected zero or few)");
}

const std::string& PromptTemplate::instruction(PromptMode mode) const {
  switch (mode) {
    case PromptMode::kCot:
      return cot_instruction;
    case PromptMode::kIcp:
      return icp_instruction;
    case PromptMode::kStandardQa:
      break;
  }
  return standard_qa_instruction;
}

namespace {

using Bindings = std::map<std::string_view, std::string_view>;

std::string fill(std::string_view pattern, const Bindings& bindings) {
  std::string out;
  out.reserve(pattern.size());
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (c == '{' && i + 1 < pattern.size() && pattern[i + 1] == '{') {
      out.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else if (c == '{') {
      const std::size_t close = pattern.find('}', i);
      if (close == std::string_view::npos) {
        throw PromptError("unterminated placeholder in template '" + std::string(pattern) + "'");
      }
      const std::string_view name = pattern.substr(i + 1, close - i - 1);
      auto it = bindings.find(name);
      if (it == bindings.end()) {
        throw PromptError("unknown placeholder {" + std::string(name) + "} in template '" +
                          std::string(pattern) + "'");
      }
      out += it->second;
      i = close;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

// Renders with dummy values so unknown placeholders surface at load time.
void check_placeholders(const std::string& pattern, std::initializer_list<std::string_view> names) {
  Bindings bindings;
  for (std::string_view n : names) bindings.emplace(n, "");
  fill(pattern, bindings);
}

void validate_template(const PromptTemplate& t) {
  if (t.version != 1) {
    throw ConfigError("unsupported template version " + std::to_string(t.version));
  }
  check_placeholders(t.standard_qa_instruction, {});
  check_placeholders(t.cot_instruction, {});
  check_placeholders(t.icp_instruction, {});
  check_placeholders(t.exemplar_header, {"index"});
  check_placeholders(t.question_line, {"question"});
  check_placeholders(t.option_line, {"label", "text"});
  check_placeholders(t.seeds_line, {"seeds"});
  check_placeholders(t.analysis_line, {"analysis"});
  check_placeholders(t.answer_line, {"answer"});
}

}  // namespace

const PromptTemplate& default_template() {
  static const PromptTemplate tmpl = [] {
    PromptTemplate t;
    t.standard_qa_instruction =
        "Here is a multi-choice question about medical knowledge, please output the correct "
        "answer according to the question.";
    t.cot_instruction =
        "Here is a multi-choice question about medical knowledge, please analyze it in a "
        "step-by-step fashion and deduce the correct answer.";
    t.icp_instruction =
        "Here is a clinical question, please refer to the knowledge seeds related to "
        "question-solving, and analyze this question step by step.";
    t.exemplar_header = "Example {index}:";
    t.question_line = "Question: {question}";
    t.option_line = "{label}. {text}";
    t.seeds_line = "knowledge seeds: {seeds}";
    t.seed_delimiter = "、";
    t.analysis_line = "Analysis: {analysis}";
    t.answer_line = "Answer: {answer}";
    t.block_separator = "\n\n";
    return t;
  }();
  return tmpl;
}

PromptTemplate parse_template(std::string_view json_text) {
  json in = json::parse(json_text, nullptr, false);
  if (in.is_discarded() || !in.is_object()) throw ConfigError("template file is not a JSON object");
  PromptTemplate t = default_template();
  t.version = in.value("version", 1);
  auto field = [&](const char* name, std::string& slot) {
    if (!in.contains(name)) return;
    if (!in[name].is_string()) throw ConfigError(std::string("template field '") + name +
                                                 "' must be a string");
    slot = in[name].get<std::string>();
  };
  if (in.contains("instructions")) {
    const json& ins = in["instructions"];
    if (!ins.is_object()) throw ConfigError("template 'instructions' must be an object");
    auto instruction = [&](const char* name, std::string& slot) {
      if (ins.contains(name)) {
        if (!ins[name].is_string()) {
          throw ConfigError(std::string("instruction '") + name + "' must be a string");
        }
        slot = ins[name].get<std::string>();
      }
    };
    instruction("standard_qa", t.standard_qa_instruction);
    instruction("cot", t.cot_instruction);
    instruction("icp", t.icp_instruction);
  }
  field("exemplar_header", t.exemplar_header);
  field("question", t.question_line);
  field("option", t.option_line);
  field("seeds", t.seeds_line);
  field("seed_delimiter", t.seed_delimiter);
  field("analysis", t.analysis_line);
  field("answer", t.answer_line);
  field("block_separator", t.block_separator);
  try {
    validate_template(t);
  } catch (const PromptError& e) {
    throw ConfigError(e.what());
  }
  return t;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  try {
    return parse_template(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string template_to_json(const PromptTemplate& t) {
  nlohmann::ordered_json out;
  out["version"] = t.version;
  out["instructions"] = {{"standard_qa", t.standard_qa_instruction},
                         {"cot", t.cot_instruction},
                         {"icp", t.icp_instruction}};
  out["exemplar_header"] = t.exemplar_header;
  out["question"] = t.question_line;
  out["option"] = t.option_line;
  out["seeds"] = t.seeds_line;
  out["seed_delimiter"] = t.seed_delimiter;
  out["analysis"] = t.analysis_line;
  out["answer"] = t.answer_line;
  out["block_separator"] = t.block_separator;
  return out.dump(2) + "\n";
}

std::vector<Exemplar> parse_exemplars(std::string_view content) {
  std::vector<Exemplar> out;
  for (const auto& [line_no, line] : split_nonblank_lines(content)) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) throw DataError("malformed exemplar JSON", line_no);
    const Instance base = instance_from_json(record, line_no);
    Exemplar ex{base.question, base.options, std::nullopt, base.analysis, base.answer};
    if (record.contains("seeds") && !record["seeds"].is_null()) {
      if (!record["seeds"].is_array()) throw DataError("expected an array", line_no, "seeds");
      std::vector<std::string> seeds;
      for (const json& s : record["seeds"]) {
        if (!s.is_string() || text::is_blank(s.get_ref<const std::string&>())) {
          throw DataError("seed must be non-empty text", line_no, "seeds");
        }
        seeds.push_back(s.get<std::string>());
      }
      ex.seeds = std::move(seeds);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
  try {
    return parse_exemplars(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::size_t estimate_tokens(std::string_view s) {
  std::size_t tokens = 0;
  std::size_t run = 0;
  for (char32_t c : text::decode_utf8(s)) {
    if (text::is_cjk(c)) {
      tokens += (run + 3) / 4;
      run = 0;
      ++tokens;
    } else {
      ++run;
    }
  }
  return tokens + (run + 3) / 4;
}

std::string assemble(const PromptParts& parts, std::size_t exemplar_count) {
  std::string out = parts.instruction;
  for (std::size_t i = 0; i < exemplar_count && i < parts.exemplar_blocks.size(); ++i) {
    out += parts.separator;
    out += parts.exemplar_blocks[i];
  }
  out += parts.separator;
  out += parts.core;
  return out;
}

RenderedPrompt fit_to_budget(const PromptParts& parts, std::size_t budget,
                             const TokenCounter& counter) {
  std::size_t count = parts.exemplar_blocks.size();
  while (true) {
    std::string text = assemble(parts, count);
    const std::size_t tokens = counter(text);
    if (tokens <= budget) {
      RenderedPrompt out;
      out.text = std::move(text);
      out.estimated_tokens = tokens;
      out.exemplars_used = count;
      return out;
    }
    if (count == 0) {
      throw BudgetError("prompt core needs " + std::to_string(tokens) +
                        " tokens, over the budget of " + std::to_string(budget));
    }
    --count;
  }
}

namespace {

std::string join(const std::vector<std::string>& items, const std::string& delimiter) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += delimiter;
    out += items[i];
  }
  return out;
}

void append_question(std::string& block, const PromptTemplate& t, const std::string& question,
                     const std::map<char, std::string>& options) {
  block += fill(t.question_line, {{"question", question}});
  for (const auto& [label, option_text] : options) {
    const std::string label_text(1, label);
    block += '\n';
    block += fill(t.option_line, {{"label", label_text}, {"text", option_text}});
  }
}

std::string render_exemplar(const Exemplar& ex, std::size_t index, PromptMode mode,
                            const PromptTemplate& t) {
  const std::string index_text = std::to_string(index);
  std::string block = fill(t.exemplar_header, {{"index", index_text}});
  if (!block.empty()) block += '\n';
  append_question(block, t, ex.question, ex.options);
  if (mode == PromptMode::kIcp && ex.seeds) {
    const std::string seeds = join(*ex.seeds, t.seed_delimiter);
    block += '\n';
    block += fill(t.seeds_line, {{"seeds", seeds}});
  }
  if (mode != PromptMode::kStandardQa) {
    block += '\n';
    block += fill(t.analysis_line, {{"analysis", ex.analysis}});
  }
  const std::string answer(1, ex.answer);
  block += '\n';
  block += fill(t.answer_line, {{"answer", answer}});
  return block;
}

}  // namespace

RenderedPrompt compose(const Instance& instance, const PromptSpec& spec,
                       const std::optional<SeedResult>& seeds) {
  if (spec.mode == PromptMode::kIcp && !seeds) {
    throw PromptError("icp prompts need mined seeds");
  }
  if (spec.mode != PromptMode::kIcp && seeds) {
    throw PromptError(std::string(to_string(spec.mode)) + " prompts take no seeds");
  }
  if (spec.shots == Shots::kFew && spec.exemplars.empty()) {
    throw PromptError("few-shot prompts need at least one exemplar");
  }
  const PromptTemplate& t = spec.templates;

  PromptParts parts;
  parts.instruction = t.instruction(spec.mode);
  parts.separator = t.block_separator;
  if (spec.shots == Shots::kFew) {
    for (std::size_t i = 0; i < spec.exemplars.size(); ++i) {
      parts.exemplar_blocks.push_back(render_exemplar(spec.exemplars[i], i + 1, spec.mode, t));
    }
  }
  append_question(parts.core, t, instance.question, instance.options);
  if (seeds) {
    std::vector<std::string> names;
    for (const Seed& s : seeds->seeds) names.push_back(s.entity.str());
    const std::string joined = join(names, t.seed_delimiter);
    parts.core += '\n';
    parts.core += fill(t.seeds_line, {{"seeds", joined}});
  }

  RenderedPrompt rendered = fit_to_budget(parts, spec.token_budget, spec.counter);
  rendered.mode = spec.mode;
  rendered.shots = spec.shots;
  return rendered;
}

}  // namespace seedprompt
