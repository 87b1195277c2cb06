#include "seedprompt/run_config.hpp"

#include "seedprompt/corpus.hpp"
#include "seedprompt/errors.hpp"

namespace seedprompt {

using nlohmann::json;
using nlohmann::ordered_json;

// Field table shared by both directions of the JSON mapping.
#define SEEDPROMPT_RUN_CONFIG_FIELDS(X) \
  X(dataset)                            \
  X(annotated)                          \
  X(lexicon)                            \
  X(graph)                              \
  X(seeds)                              \
  X(exemplars)                          \
  X(templates)                          \
  X(extraction_exemplars)               \
  X(fixture)                            \
  X(cache_dir)                          \
  X(records)                            \
  X(output)                             \
  X(output_dir)                         \
  X(mode)                               \
  X(shots)                              \
  X(token_budget)                       \
  X(k)                                  \
  X(backend)                            \
  X(base_url)                           \
  X(model)                              \
  X(temperature)                        \
  X(api_key_env)                        \
  X(max_retries)                        \
  X(backoff_ms)                         \
  X(timeout_s)                          \
  X(extractor)                          \
  X(extractor_model)                    \
  X(withhold_analysis)                  \
  X(skip_failures)                      \
  X(test_size)                          \
  X(min_options)                        \
  X(min_analysis_words)                 \
  X(word_count)                         \
  X(stratify_by)                        \
  X(workers)                            \
  X(seed)                               \
  X(group_by)                           \
  X(log_prompts)

ordered_json run_config_to_json(const RunConfig& config) {
  ordered_json out;
#define X(name) out[#name] = config.name;
  SEEDPROMPT_RUN_CONFIG_FIELDS(X)
#undef X
  out["system_message"] =
      config.system_message ? ordered_json(*config.system_message) : ordered_json(nullptr);
  return out;
}

RunConfig run_config_from_json(const json& in) {
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig config;
  for (const auto& [key, value] : in.items()) {
    try {
      if (key == "code_version") continue;  // provenance stamp of dumped configs
      if (key == "system_message") {
        if (value.is_null()) {
          config.system_message.reset();
        } else {
          config.system_message = value.get<std::string>();
        }
        continue;
      }
#define X(name)                                   \
  if (key == #name) {                             \
    value.get_to(config.name);                    \
    continue;                                     \
  }
      SEEDPROMPT_RUN_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
    }
    throw ConfigError("unknown config key '" + key + "'");
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json in = json::parse(read_file(path), nullptr, false);
  if (in.is_discarded()) throw ConfigError("config '" + path.string() + "' is not valid JSON");
  try {
    return run_config_from_json(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ClientConfig client_config(const RunConfig& config, const std::string& model) {
  ClientConfig client;
  client.backend = parse_backend(config.backend);
  client.base_url = config.base_url;
  client.model = model;
  client.retry.max_retries = config.max_retries;
  client.retry.backoff_base = std::chrono::milliseconds(config.backoff_ms);
  client.max_in_flight = std::max<std::size_t>(1, config.workers);
  client.cache_path = config.cache_dir;
  client.fixture_path = config.fixture;
  client.api_key_env = config.api_key_env;
  client.system_message = config.system_message;
  client.timeout = std::chrono::seconds(config.timeout_s);
  return client;
}

}  // namespace seedprompt
