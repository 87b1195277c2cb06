#include "seedprompt/entity.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "seedprompt/errors.hpp"
#include "seedprompt/text.hpp"

namespace seedprompt {

using nlohmann::json;

Entity normalize_entity(std::string_view raw) {
  std::string normalized = text::trim(text::normalize(raw));
  if (normalized.empty()) throw DataError("entity is empty after trimming");
  return Entity(std::move(normalized));
}

EntitySet make_entity_set(const std::vector<std::string>& raw) {
  EntitySet out;
  for (const std::string& s : raw) out.insert(normalize_entity(s));
  return out;
}

std::vector<std::string> to_strings(const EntitySet& entities) {
  std::vector<std::string> out;
  out.reserve(entities.size());
  for (const Entity& e : entities) out.push_back(e.str());
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

Lexicon::Lexicon(const std::vector<std::string>& entries,
                 const std::vector<std::pair<std::string, std::string>>& aliases) {
  for (const std::string& raw : entries) {
    if (text::is_blank(raw)) throw DataError("lexicon entry is empty");
    entries_.insert(normalize_entity(raw));
  }
  if (entries_.empty()) throw DataError("lexicon has no entries");
  for (const auto& [raw_alias, raw_canonical] : aliases) {
    if (text::is_blank(raw_alias) || text::is_blank(raw_canonical)) {
      throw DataError("lexicon alias or canonical is empty");
    }
    Entity alias = normalize_entity(raw_alias);
    Entity canonical = normalize_entity(raw_canonical);
    if (!entries_.contains(canonical)) {
      throw DataError("alias '" + alias.str() + "' maps to unknown entry '" +
                      canonical.str() + "'");
    }
    if (alias == canonical) continue;
    if (entries_.contains(alias)) {
      throw DataError("alias '" + alias.str() + "' is itself a canonical entry");
    }
    auto [it, inserted] = aliases_.emplace(alias, canonical);
    if (!inserted && it->second != canonical) {
      throw DataError("alias '" + alias.str() + "' maps to two canonical entries");
    }
  }

  trie_.emplace_back();
  for (const Entity& e : entries_) insert(e.str(), e);
  for (const auto& [alias, canonical] : aliases_) insert(alias.str(), canonical);
}

void Lexicon::insert(const std::string& surface, const Entity& canonical) {
  std::size_t node = 0;
  for (char32_t c : text::decode_utf8(surface)) {
    auto it = trie_[node].next.find(c);
    if (it == trie_[node].next.end()) {
      trie_.emplace_back();
      it = trie_[node].next.emplace(c, trie_.size() - 1).first;
    }
    node = it->second;
  }
  trie_[node].canonical = canonical;
}

EntitySet Lexicon::match(std::string_view raw_text) const {
  const std::u32string cps = text::decode_utf8(text::normalize(raw_text));
  EntitySet found;
  std::size_t pos = 0;
  while (pos < cps.size()) {
    std::size_t node = 0;
    std::size_t best_len = 0;
    const Entity* best = nullptr;
    for (std::size_t k = pos; k < cps.size(); ++k) {
      auto it = trie_[node].next.find(cps[k]);
      if (it == trie_[node].next.end()) break;
      node = it->second;
      if (trie_[node].canonical) {
        best_len = k - pos + 1;
        best = &*trie_[node].canonical;
      }
    }
    if (best) {
      found.insert(*best);
      pos += best_len;
    } else {
      ++pos;
    }
  }
  return found;
}

Lexicon parse_lexicon(std::string_view content) {
  std::vector<std::string> entries;
  std::vector<std::pair<std::string, std::string>> aliases;
  for (const auto& [line_no, line] : split_nonblank_lines(content)) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (text::is_blank(fields[0])) throw DataError("empty canonical entry", line_no);
    entries.push_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!text::is_blank(fields[i])) aliases.emplace_back(fields[i], fields[0]);
    }
  }
  return Lexicon(entries, aliases);
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  try {
    return parse_lexicon(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

EntitySet extract_entities_lexicon(std::string_view text, const Lexicon& lexicon) {
  return lexicon.match(text);
}

// ---------------------------------------------------------------------------
// LLM-prompted extraction

namespace {

constexpr std::string_view kExtractionInstruction =
    "请从下面的医学文本中抽取医学实体，包括疾病、症状、药物以及其他医学概念。"
    "只输出一行，实体之间用“、”分隔；如果没有医学实体，输出“无”。";
constexpr std::string_view kTextMarker = "文本：";
constexpr std::string_view kEntityMarker = "实体：";

// Markers and "no entity" phrases, compared after text::normalize().
const std::vector<std::string>& list_markers() {
  static const std::vector<std::string> markers = {
      text::normalize("医学实体："), text::normalize("实体："), "entities:", "entity list:"};
  return markers;
}

bool is_none_phrase(std::string_view s) {
  static const std::vector<std::string> phrases = {
      "无", "没有", "none", "n/a", "no entities", "no entities found",
      "no entity", "no medical entities", "no medical entities found"};
  std::string cleaned = text::trim(text::normalize(s));
  while (!cleaned.empty() && (cleaned.back() == '.' || cleaned.back() == '!')) {
    cleaned.pop_back();
  }
  const std::string cjk_period = "。";
  if (cleaned.size() >= cjk_period.size() &&
      cleaned.compare(cleaned.size() - cjk_period.size(), cjk_period.size(), cjk_period) == 0) {
    cleaned.resize(cleaned.size() - cjk_period.size());
  }
  return std::find(phrases.begin(), phrases.end(), cleaned) != phrases.end();
}

std::string strip_item_decoration(std::string item) {
  static const std::vector<std::string> decorations = {
      "\"", "'", "[", "]", "(", ")", "“", "”", "‘", "’", "《", "》", "「", "」",
      "【", "】", "。", ".", "*", "-"};
  bool changed = true;
  while (changed && !item.empty()) {
    changed = false;
    item = text::trim(item);
    for (const std::string& d : decorations) {
      if (item.size() >= d.size() && item.compare(0, d.size(), d) == 0) {
        item.erase(0, d.size());
        changed = true;
      }
      if (item.size() >= d.size() &&
          item.compare(item.size() - d.size(), d.size(), d) == 0) {
        item.resize(item.size() - d.size());
        changed = true;
      }
    }
  }
  return text::trim(item);
}

std::vector<std::string> split_list(const std::string& line) {
  // After normalization full-width commas and semicolons are ASCII.
  static const std::vector<std::string> delimiters = {"、", ",", ";"};
  std::vector<std::string> items;
  std::string current;
  std::size_t i = 0;
  while (i < line.size()) {
    bool split = false;
    for (const std::string& d : delimiters) {
      if (line.compare(i, d.size(), d) == 0) {
        items.push_back(current);
        current.clear();
        i += d.size();
        split = true;
        break;
      }
    }
    if (!split) current.push_back(line[i++]);
  }
  items.push_back(current);
  return items;
}

}  // namespace

std::string render_extraction_prompt(std::string_view text,
                                     const std::vector<ExtractionExemplar>& exemplars) {
  std::string prompt(kExtractionInstruction);
  prompt += "\n\n";
  for (const ExtractionExemplar& exemplar : exemplars) {
    prompt += kTextMarker;
    prompt += exemplar.text;
    prompt += '\n';
    prompt += kEntityMarker;
    if (exemplar.entities.empty()) {
      prompt += "无";
    } else {
      for (std::size_t i = 0; i < exemplar.entities.size(); ++i) {
        if (i > 0) prompt += "、";
        prompt += exemplar.entities[i];
      }
    }
    prompt += "\n\n";
  }
  prompt += kTextMarker;
  prompt += text;
  prompt += '\n';
  prompt += kEntityMarker;
  return prompt;
}

EntitySet parse_entity_response(std::string_view response) {
  const std::string raw(response);
  if (text::is_blank(response)) throw ExtractionError("empty extractor response", raw);
  if (is_none_phrase(response)) return {};

  std::vector<std::string> lines;
  for (const auto& [line_no, line] : split_nonblank_lines(text::normalize(response))) {
    lines.push_back(text::trim(line));
  }

  std::optional<std::string> list;
  for (auto it = lines.rbegin(); it != lines.rend() && !list; ++it) {
    const std::string lowered = *it;  // normalize() already folded Latin case
    for (const std::string& marker : list_markers()) {
      const std::size_t at = lowered.find(marker);
      if (at != std::string::npos) {
        list = it->substr(at + marker.size());
        break;
      }
    }
  }
  if (!list) {
    if (lines.size() == 1) {
      list = lines[0];
    } else {
      throw ExtractionError("no entity list line in extractor response", raw);
    }
  }
  if (is_none_phrase(*list)) return {};

  EntitySet entities;
  for (const std::string& item : split_list(*list)) {
    std::string cleaned = strip_item_decoration(item);
    if (cleaned.empty() || is_none_phrase(cleaned)) continue;
    entities.insert(normalize_entity(cleaned));
  }
  return entities;
}

EntitySet extract_entities_llm(std::string_view text,
                               const std::vector<ExtractionExemplar>& exemplars,
                               ChatClient& client,
                               const LlmExtractionSettings& settings) {
  if (exemplars.empty()) throw ConfigError("LLM entity extraction needs at least one exemplar");
  CompletionRequest request;
  request.model = settings.model;
  request.prompt = render_extraction_prompt(text, exemplars);
  request.temperature = settings.temperature;
  request.max_tokens = settings.max_tokens;
  const CompletionResponse response = client.complete(request);
  return parse_entity_response(response.text);
}

std::vector<ExtractionExemplar> load_extraction_exemplars(const std::filesystem::path& path) {
  std::vector<ExtractionExemplar> exemplars;
  for (const auto& [line_no, line] : read_nonblank_lines(path)) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("text") ||
        !record["text"].is_string() || !record.contains("entities") ||
        !record["entities"].is_array()) {
      throw DataError(path.string() + ": expected {text, entities}", line_no);
    }
    ExtractionExemplar exemplar;
    exemplar.text = record["text"].get<std::string>();
    for (const json& e : record["entities"]) {
      if (!e.is_string()) throw DataError(path.string() + ": entity must be a string", line_no);
      exemplar.entities.push_back(e.get<std::string>());
    }
    exemplars.push_back(std::move(exemplar));
  }
  return exemplars;
}

LlmExtractor::LlmExtractor(std::shared_ptr<ChatClient> client,
                           std::vector<ExtractionExemplar> exemplars,
                           LlmExtractionSettings settings)
    : client_(std::move(client)),
      exemplars_(std::move(exemplars)),
      settings_(std::move(settings)) {
  if (exemplars_.empty()) {
    throw ConfigError("LLM entity extraction needs at least one exemplar");
  }
}

// ---------------------------------------------------------------------------
// Dataset annotation

std::string question_with_options(const Instance& instance) {
  std::string out = instance.question;
  for (const auto& [label, option_text] : instance.options) {
    out += '\n';
    out += option_text;
  }
  return out;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(run);
    for (std::thread& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

[[noreturn]] void rethrow_for_instance(const std::string& id, std::exception_ptr error) {
  const std::string prefix = "instance '" + id + "': ";
  try {
    std::rethrow_exception(error);
  } catch (const UpstreamExhaustedError& e) {
    throw UpstreamExhaustedError(prefix + e.what(), e.status(), e.body());
  } catch (const ExtractionError& e) {
    throw ExtractionError(prefix + e.what(), e.raw_response());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace

AnnotationResult annotate_dataset(const Dataset& dataset, const EntityExtractor& extractor,
                                  const AnnotateOptions& options) {
  struct Slot {
    std::optional<AnnotatedInstance> value;
    std::exception_ptr error;
    std::string message;
  };
  std::vector<Slot> slots(dataset.size());
  std::atomic<bool> abort{false};

  parallel_for(dataset.size(), options.workers, [&](std::size_t i) {
    if (abort.load()) return;
    const Instance& instance = dataset[i];
    try {
      AnnotatedInstance annotated{instance, extractor.extract(question_with_options(instance)),
                                  {}};
      if (options.extract_analysis) annotated.r_entities = extractor.extract(instance.analysis);
      slots[i].value = std::move(annotated);
    } catch (const std::exception& e) {
      slots[i].error = std::current_exception();
      slots[i].message = e.what();
      if (options.on_failure == FailurePolicy::kAbort) abort.store(true);
    }
  });

  AnnotationResult result;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) {
      if (options.on_failure == FailurePolicy::kAbort) {
        rethrow_for_instance(dataset[i].id, slots[i].error);
      }
      result.failures.push_back({dataset[i].id, slots[i].message});
    } else if (slots[i].value) {
      result.instances.push_back(std::move(*slots[i].value));
    }
  }
  return result;
}

nlohmann::ordered_json annotated_to_json(const AnnotatedInstance& annotated) {
  nlohmann::ordered_json record = instance_to_json(annotated.base);
  record["qo_entities"] = to_strings(annotated.qo_entities);
  record["r_entities"] = to_strings(annotated.r_entities);
  return record;
}

namespace {

EntitySet entity_array(const json& record, const char* field, std::size_t line) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_array()) {
    throw DataError("expected an array of entity strings", line, field);
  }
  EntitySet out;
  for (const json& value : *it) {
    if (!value.is_string()) throw DataError("entity must be a string", line, field);
    const std::string& raw = value.get_ref<const std::string&>();
    if (text::is_blank(raw)) throw DataError("entity is empty", line, field);
    Entity e = normalize_entity(raw);
    if (e.str() != raw) throw DataError("entity '" + raw + "' is not normalized", line, field);
    if (!out.insert(std::move(e)).second) {
      throw DataError("duplicate entity '" + raw + "'", line, field);
    }
  }
  return out;
}

}  // namespace

AnnotatedInstance annotated_from_json(const json& record, std::size_t line) {
  AnnotatedInstance annotated;
  annotated.base = instance_from_json(record, line);
  annotated.qo_entities = entity_array(record, "qo_entities", line);
  annotated.r_entities = entity_array(record, "r_entities", line);
  return annotated;
}

std::string serialize_annotated(const std::vector<AnnotatedInstance>& annotated) {
  std::string out;
  for (const AnnotatedInstance& a : annotated) {
    out += annotated_to_json(a).dump();
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedInstance> parse_annotated(std::string_view content) {
  std::vector<AnnotatedInstance> out;
  std::set<std::string> seen;
  for (const auto& [line_no, line] : split_nonblank_lines(content)) {
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    AnnotatedInstance a = annotated_from_json(record, line_no);
    if (!seen.insert(a.base.id).second) {
      throw DataError("duplicate id '" + a.base.id + "'", line_no, "id");
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AnnotatedInstance> load_annotated(const std::filesystem::path& path) {
  try {
    return parse_annotated(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_annotated(const std::vector<AnnotatedInstance>& annotated,
                    const std::filesystem::path& path) {
  write_file_atomic(path, serialize_annotated(annotated));
}

}  // namespace seedprompt
