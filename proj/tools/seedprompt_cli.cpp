// Command-line front end. Every subcommand accepts --config plus flag
// overrides; flags win over the file.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "seedprompt/commands.hpp"
#include "seedprompt/errors.hpp"

namespace sp = seedprompt;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kUpstream = 2 };

// Flag values collected before the config file is read.
struct Overrides {
  std::string config;
  std::optional<std::string> dataset, annotated, lexicon, graph, seeds, exemplars, templates,
      extraction_exemplars, fixture, cache_dir, records, output, output_dir, mode, shots,
      backend, base_url, model, extractor, extractor_model, word_count, stratify_by,
      system_message;
  std::optional<std::size_t> k, workers, test_size, min_options, min_analysis_words,
      token_budget, max_retries;
  std::optional<std::uint64_t> seed;
  std::optional<double> temperature;
  std::vector<std::string> group_by;
  bool withhold_analysis = false;
  bool skip_failures = false;
  bool log_prompts = false;
};

template <typename T>
void apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

sp::RunConfig resolve(const Overrides& o) {
  sp::RunConfig c = o.config.empty() ? sp::RunConfig{} : sp::load_run_config(o.config);
  apply(o.dataset, c.dataset);
  apply(o.annotated, c.annotated);
  apply(o.lexicon, c.lexicon);
  apply(o.graph, c.graph);
  apply(o.seeds, c.seeds);
  apply(o.exemplars, c.exemplars);
  apply(o.templates, c.templates);
  apply(o.extraction_exemplars, c.extraction_exemplars);
  apply(o.fixture, c.fixture);
  apply(o.cache_dir, c.cache_dir);
  apply(o.records, c.records);
  apply(o.output, c.output);
  apply(o.output_dir, c.output_dir);
  apply(o.mode, c.mode);
  apply(o.shots, c.shots);
  apply(o.backend, c.backend);
  apply(o.base_url, c.base_url);
  apply(o.model, c.model);
  apply(o.extractor, c.extractor);
  apply(o.extractor_model, c.extractor_model);
  apply(o.word_count, c.word_count);
  apply(o.stratify_by, c.stratify_by);
  if (o.system_message) c.system_message = *o.system_message;
  apply(o.k, c.k);
  apply(o.workers, c.workers);
  apply(o.test_size, c.test_size);
  apply(o.min_options, c.min_options);
  apply(o.min_analysis_words, c.min_analysis_words);
  apply(o.token_budget, c.token_budget);
  apply(o.max_retries, c.max_retries);
  apply(o.seed, c.seed);
  apply(o.temperature, c.temperature);
  if (!o.group_by.empty()) c.group_by = o.group_by;
  if (o.withhold_analysis) c.withhold_analysis = true;
  if (o.skip_failures) c.skip_failures = true;
  if (o.log_prompts) c.log_prompts = true;
  if (c.workers == 0) throw sp::ConfigError("workers must be >= 1");
  return c;
}

void add_client_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--backend", o.backend, "live | cached-live | replay");
  cmd->add_option("--fixture", o.fixture, "Replay fixture (JSONL)");
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory");
  cmd->add_option("--base-url", o.base_url, "Chat completions endpoint root");
  cmd->add_option("--temperature", o.temperature);
  cmd->add_option("--max-retries", o.max_retries);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-seed prompting for clinical multiple-choice QA"};
  app.set_version_flag("--version", std::string(SEEDPROMPT_VERSION));
  app.require_subcommand(1);
  Overrides o;

  auto common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--workers", o.workers, "Parallel workers");
  };

  auto* prepare = app.add_subcommand("prepare", "Filter a dataset and split train/test");
  common(prepare);
  prepare->add_option("--dataset", o.dataset);
  prepare->add_option("--output-dir", o.output_dir);
  prepare->add_option("--test-size", o.test_size);
  prepare->add_option("--seed", o.seed);
  prepare->add_option("--min-options", o.min_options, "0 disables the option filter");
  prepare->add_option("--min-analysis-words", o.min_analysis_words);
  prepare->add_option("--word-count", o.word_count, "script | whitespace");
  prepare->add_option("--stratify-by", o.stratify_by, "Metadata key");

  auto* annotate = app.add_subcommand("annotate", "Extract entities for every instance");
  common(annotate);
  annotate->add_option("--dataset", o.dataset);
  annotate->add_option("--output", o.output);
  annotate->add_option("--extractor", o.extractor, "lexicon | llm");
  annotate->add_option("--lexicon", o.lexicon);
  annotate->add_option("--extraction-exemplars", o.extraction_exemplars);
  annotate->add_option("--model", o.extractor_model, "Extraction model");
  annotate->add_flag("--withhold-analysis", o.withhold_analysis);
  annotate->add_flag("--skip-failures", o.skip_failures);
  add_client_flags(annotate, o);

  auto* build = app.add_subcommand("build-graph", "Build the entity graph from annotations");
  common(build);
  build->add_option("--annotated", o.annotated);
  build->add_option("--output", o.output);

  auto* mine = app.add_subcommand("mine-seeds", "Rank knowledge seeds for each instance");
  common(mine);
  mine->add_option("--annotated", o.annotated);
  mine->add_option("--graph", o.graph);
  mine->add_option("--k", o.k);
  mine->add_option("--output", o.output);

  auto* run = app.add_subcommand("run", "Prompt the model and score the answers");
  common(run);
  run->add_option("--dataset", o.dataset);
  run->add_option("--annotated", o.annotated);
  run->add_option("--graph", o.graph);
  run->add_option("--seeds", o.seeds);
  run->add_option("--lexicon", o.lexicon);
  run->add_option("--extractor", o.extractor, "lexicon | llm");
  run->add_option("--extraction-exemplars", o.extraction_exemplars);
  run->add_option("--exemplars", o.exemplars);
  run->add_option("--templates", o.templates);
  run->add_option("--mode", o.mode, "standard_qa | cot | icp");
  run->add_option("--shots", o.shots, "zero | few");
  run->add_option("--k", o.k);
  run->add_option("--token-budget", o.token_budget);
  run->add_option("--model", o.model);
  run->add_option("--system-message", o.system_message);
  run->add_option("--group-by", o.group_by, "Metadata keys for breakdowns");
  run->add_option("--output-dir", o.output_dir);
  run->add_flag("--log-prompts", o.log_prompts);
  add_client_flags(run, o);

  auto* report = app.add_subcommand("report", "Rebuild reports from a records file");
  common(report);
  report->add_option("--records", o.records);
  report->add_option("--group-by", o.group_by);
  report->add_option("--output-dir", o.output_dir);

  auto* fixture = app.add_subcommand("export-fixture", "Turn a response cache into a fixture");
  common(fixture);
  fixture->add_option("--cache-dir", o.cache_dir);
  fixture->add_option("--output", o.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const sp::RunConfig config = resolve(o);
    if (*prepare) sp::commands::prepare(config);
    else if (*annotate) sp::commands::annotate(config);
    else if (*build) sp::commands::build_graph(config);
    else if (*mine) sp::commands::mine_seeds(config);
    else if (*run) sp::commands::run(config);
    else if (*report) sp::commands::report(config);
    else if (*fixture) sp::commands::export_fixture(config);
  } catch (const sp::UpstreamExhaustedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUpstream;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
