#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seedprompt/corpus.hpp"
#include "seedprompt/llm_client.hpp"

namespace seedprompt {

// A normalized entity surface. Only normalize_entity() creates one, so every
// value is a fixed point of normalization.
class Entity {
 public:
  const std::string& str() const { return surface_; }

  friend bool operator==(const Entity&, const Entity&) = default;
  friend std::strong_ordering operator<=>(const Entity& a, const Entity& b) {
    return a.surface_.compare(b.surface_) <=> 0;
  }

 private:
  explicit Entity(std::string surface) : surface_(std::move(surface)) {}
  friend Entity normalize_entity(std::string_view raw);

  std::string surface_;
};

// NFKC, Latin case folding, surrounding whitespace stripped.
// Throws DataError when nothing is left after trimming.
Entity normalize_entity(std::string_view raw);

using EntitySet = std::set<Entity>;

EntitySet make_entity_set(const std::vector<std::string>& raw);
std::vector<std::string> to_strings(const EntitySet& entities);

class Lexicon {
 public:
  // `aliases` maps alias -> canonical; every canonical must be among `entries`.
  explicit Lexicon(const std::vector<std::string>& entries,
                   const std::vector<std::pair<std::string, std::string>>& aliases = {});

  const EntitySet& entries() const { return entries_; }
  const std::map<Entity, Entity>& aliases() const { return aliases_; }

  // Greedy longest match over normalized text. Matches nested inside an
  // accepted longer match are suppressed.
  EntitySet match(std::string_view text) const;

 private:
  struct TrieNode {
    std::map<char32_t, std::size_t> next;
    std::optional<Entity> canonical;
  };

  void insert(const std::string& surface, const Entity& canonical);

  EntitySet entries_;
  std::map<Entity, Entity> aliases_;
  std::vector<TrieNode> trie_;
};

// One canonical entry per line; optional tab-separated aliases after it.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::string_view content);

EntitySet extract_entities_lexicon(std::string_view text, const Lexicon& lexicon);

struct ExtractionExemplar {
  std::string text;
  std::vector<std::string> entities;
};

// Prompt used to ask a chat model for entities, one delimited line.
std::string render_extraction_prompt(std::string_view text,
                                     const std::vector<ExtractionExemplar>& exemplars);

// Tolerant parse of a delimited entity list ("、" or ","). Throws
// ExtractionError with the raw text attached when no list can be found.
EntitySet parse_entity_response(std::string_view response);

struct LlmExtractionSettings {
  std::string model;
  double temperature = 0.0;
  std::size_t max_tokens = kMinResponseTokens;
};

EntitySet extract_entities_llm(std::string_view text,
                               const std::vector<ExtractionExemplar>& exemplars,
                               ChatClient& client,
                               const LlmExtractionSettings& settings);

std::vector<ExtractionExemplar> load_extraction_exemplars(const std::filesystem::path& path);

class EntityExtractor {
 public:
  virtual ~EntityExtractor() = default;
  virtual EntitySet extract(std::string_view text) const = 0;
};

class LexiconExtractor : public EntityExtractor {
 public:
  explicit LexiconExtractor(std::shared_ptr<const Lexicon> lexicon)
      : lexicon_(std::move(lexicon)) {}

  EntitySet extract(std::string_view text) const override {
    return extract_entities_lexicon(text, *lexicon_);
  }

 private:
  std::shared_ptr<const Lexicon> lexicon_;
};

class LlmExtractor : public EntityExtractor {
 public:
  LlmExtractor(std::shared_ptr<ChatClient> client, std::vector<ExtractionExemplar> exemplars,
               LlmExtractionSettings settings);

  EntitySet extract(std::string_view text) const override {
    return extract_entities_llm(text, exemplars_, *client_, settings_);
  }

 private:
  std::shared_ptr<ChatClient> client_;
  std::vector<ExtractionExemplar> exemplars_;
  LlmExtractionSettings settings_;
};

struct AnnotatedInstance {
  Instance base;
  EntitySet qo_entities;
  EntitySet r_entities;

  friend bool operator==(const AnnotatedInstance&, const AnnotatedInstance&) = default;
};

// Question followed by every option text, newline-separated.
std::string question_with_options(const Instance& instance);

enum class FailurePolicy { kAbort, kSkip };

struct AnnotateOptions {
  bool extract_analysis = true;  // false leaves r_entities empty (withheld analyses)
  FailurePolicy on_failure = FailurePolicy::kAbort;
  std::size_t workers = 1;
};

struct AnnotationFailure {
  std::string instance_id;
  std::string message;
};

struct AnnotationResult {
  std::vector<AnnotatedInstance> instances;  // input order, failures omitted
  std::vector<AnnotationFailure> failures;
};

AnnotationResult annotate_dataset(const Dataset& dataset, const EntityExtractor& extractor,
                                  const AnnotateOptions& options = {});

nlohmann::ordered_json annotated_to_json(const AnnotatedInstance& annotated);
AnnotatedInstance annotated_from_json(const nlohmann::json& record, std::size_t line = 0);

std::string serialize_annotated(const std::vector<AnnotatedInstance>& annotated);
std::vector<AnnotatedInstance> parse_annotated(std::string_view content);
std::vector<AnnotatedInstance> load_annotated(const std::filesystem::path& path);
void save_annotated(const std::vector<AnnotatedInstance>& annotated,
                    const std::filesystem::path& path);

// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
// exception thrown by any call is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace seedprompt

template <>
struct std::hash<seedprompt::Entity> {
  std::size_t operator()(const seedprompt::Entity& e) const noexcept {
    return std::hash<std::string>{}(e.str());
  }
};
