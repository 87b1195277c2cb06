#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedprompt/llm_client.hpp"
#include "seedprompt/prompt.hpp"
#include "seedprompt/seeds.hpp"

namespace seedprompt {

// One experiment: a JSON config file plus command-line overrides. Paths are
// kept as given (relative to the working directory).
struct RunConfig {
  // Inputs and outputs.
  std::string dataset;
  std::string annotated;
  std::string lexicon;
  std::string graph;
  std::string seeds;
  std::string exemplars;
  std::string templates;
  std::string extraction_exemplars;
  std::string fixture;
  std::string cache_dir;
  std::string records;
  std::string output;      // single-file outputs (annotate, build-graph, mine-seeds)
  std::string output_dir;  // multi-file outputs (prepare, run, report)

  // Prompting.
  std::string mode = "standard_qa";
  std::string shots = "zero";
  std::size_t token_budget = kDefaultPromptBudget;
  std::size_t k = kDefaultSeedCount;

  // Chat client.
  std::string backend = "replay";
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo-0613";
  double temperature = 0.0;
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<std::string> system_message;
  std::size_t max_retries = 2;
  std::int64_t backoff_ms = 1000;
  std::int64_t timeout_s = 120;

  // Entity extraction.
  std::string extractor = "lexicon";  // lexicon | llm
  std::string extractor_model = "baichuan2-7b-chat";
  bool withhold_analysis = false;
  bool skip_failures = false;

  // Dataset preparation.
  std::size_t test_size = 600;
  std::size_t min_options = 5;
  std::size_t min_analysis_words = 30;
  std::string word_count = "script";  // script | whitespace
  std::string stratify_by;

  // Execution and reporting.
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> group_by;
  bool log_prompts = false;
};

nlohmann::ordered_json run_config_to_json(const RunConfig& config);
// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& in);
RunConfig load_run_config(const std::filesystem::path& path);

ClientConfig client_config(const RunConfig& config, const std::string& model);

}  // namespace seedprompt
