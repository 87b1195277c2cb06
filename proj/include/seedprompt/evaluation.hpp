#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedprompt/corpus.hpp"
#include "seedprompt/entity.hpp"
#include "seedprompt/graph.hpp"
#include "seedprompt/llm_client.hpp"
#include "seedprompt/metrics.hpp"
#include "seedprompt/prompt.hpp"
#include "seedprompt/seeds.hpp"

namespace seedprompt {

struct EvalRecord {
  std::string id;
  PromptMode mode = PromptMode::kStandardQa;
  Shots shots = Shots::kZero;
  std::string prompt_digest;
  std::string response;
  std::optional<char> extracted_answer;  // nullopt = unresolved
  char gold_answer = 0;
  bool correct = false;
  std::size_t response_length = 0;  // metric tokens in the response
  std::optional<TextMetrics> metrics;       // absent for standard_qa
  std::optional<std::vector<std::string>> seeds;
  std::optional<SeedQuality> seed_quality;
  std::map<std::string, std::string> metadata;
  std::optional<std::string> error;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct MeanMetrics {
  std::size_t count = 0;
  TextMetrics mean;
};

struct MeanSeedQuality {
  std::size_t count = 0;
  SeedQuality mean;
};

struct GroupStats {
  std::size_t count = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // percent, 2 decimals
  std::optional<MeanMetrics> metrics;
};

// One side of the correct-vs-incorrect comparison.
struct OutcomeStats {
  std::size_t count = 0;
  std::optional<double> rouge_l;
  std::optional<double> bleu_4;  // [0, 1]
  std::optional<double> length;
  std::optional<double> seed_count;
  std::optional<SeedQuality> seed_quality;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unresolved = 0;
  std::size_t failed = 0;
  std::optional<double> accuracy;  // percent rounded to 2 decimals; nullopt when total == 0
  std::optional<MeanMetrics> metrics;
  std::optional<MeanSeedQuality> seed_quality;
  // group key -> group value -> stats
  std::map<std::string, std::map<std::string, GroupStats>> groups;
  OutcomeStats correct_outcome;
  OutcomeStats incorrect_outcome;
};

std::optional<double> accuracy_percent(std::size_t correct, std::size_t total);
std::string format_percent(std::optional<double> percent);

EvalReport build_report(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& group_by);

nlohmann::ordered_json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& in, std::size_t line = 0);
std::string serialize_records(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records(const std::filesystem::path& path);

nlohmann::ordered_json report_to_json(const EvalReport& report);
std::string serialize_report(const EvalReport& report);
// Human-readable tables: overall, per group, correct vs incorrect.
std::string report_markdown(const EvalReport& report);

struct EvalConfig {
  PromptSpec prompt;
  std::string model = "gpt-3.5-turbo-0613";
  double temperature = 0.0;
  std::optional<std::string> system_message;
  std::size_t k = kDefaultSeedCount;
  std::size_t workers = 1;
  std::vector<std::string> group_by;
};

// Everything is borrowed; the caller keeps it alive for the run.
struct EvalResources {
  ChatClient* client = nullptr;
  const KnowledgeGraph* graph = nullptr;
  const EntityExtractor* extractor = nullptr;
  // Precomputed entities by instance id (qo for seed queries, r for gold seeds).
  const std::map<std::string, AnnotatedInstance>* annotations = nullptr;
  // Precomputed seeds by instance id.
  const std::map<std::string, SeedResult>* seeds = nullptr;
};

struct EvalRun {
  std::vector<EvalRecord> records;  // dataset order
  EvalReport report;
};

// Throws ConfigError before any request when the setup cannot work, and
// UpstreamExhaustedError when the API stops answering. Every other
// per-instance failure is recorded as an unresolved record with an error note.
EvalRun run_eval(const Dataset& test, const EvalConfig& config, const EvalResources& resources);

}  // namespace seedprompt
