#include "seedprompt/commands.hpp"

#include <iostream>

#include "seedprompt/errors.hpp"
#include "seedprompt/graph.hpp"

namespace seedprompt::commands {

namespace {

void log(const std::string& message) { std::cerr << "[seedprompt] " << message << '\n'; }

void require_set(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required setting: ") + what);
}

void require_file(const std::string& path, const char* what) {
  require_set(path, what);
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError(std::string(what) + " '" + path + "' does not exist");
  }
}

void require_output_dir(const std::string& dir) {
  require_set(dir, "output_dir");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + dir + "'");
  }
}

void require_output_file(const std::string& path) {
  require_set(path, "output");
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
    if (ec) throw ConfigError("cannot create directory for '" + path + "'");
  }
}

text::WordCountMode word_count_mode(const std::string& s) {
  if (s == "script") return text::WordCountMode::kScriptAware;
  if (s == "whitespace") return text::WordCountMode::kWhitespace;
  throw ConfigError("unknown word_count mode '" + s + "' (expected script or whitespace)");
}

struct ExtractorBundle {
  std::shared_ptr<ChatClient> client;
  std::unique_ptr<EntityExtractor> extractor;
};

// Validation half: throws before any work starts.
void validate_extractor(const RunConfig& config) {
  if (config.extractor == "lexicon") {
    require_file(config.lexicon, "lexicon");
  } else if (config.extractor == "llm") {
    require_file(config.extraction_exemplars, "extraction_exemplars");
    validate_client_config(client_config(config, config.extractor_model));
  } else {
    throw ConfigError("unknown extractor '" + config.extractor + "' (expected lexicon or llm)");
  }
}

ExtractorBundle make_extractor(const RunConfig& config) {
  ExtractorBundle bundle;
  if (config.extractor == "lexicon") {
    bundle.extractor = std::make_unique<LexiconExtractor>(
        std::make_shared<const Lexicon>(load_lexicon(config.lexicon)));
  } else {
    bundle.client = make_client(client_config(config, config.extractor_model));
    LlmExtractionSettings settings;
    settings.model = config.extractor_model;
    bundle.extractor = std::make_unique<LlmExtractor>(
        bundle.client, load_extraction_exemplars(config.extraction_exemplars), settings);
  }
  return bundle;
}

std::string effective_config_text(const RunConfig& config) {
  nlohmann::ordered_json dumped = run_config_to_json(config);
  dumped["code_version"] = SEEDPROMPT_VERSION;
  return dumped.dump(2) + "\n";
}

}  // namespace

void prepare(const RunConfig& config) {
  require_file(config.dataset, "dataset");
  require_output_dir(config.output_dir);
  const auto mode = word_count_mode(config.word_count);

  const Dataset all = load_dataset(config.dataset);
  const Dataset kept =
      filter_instances(all, config.min_options, config.min_analysis_words, mode);
  SplitOptions options;
  if (!config.stratify_by.empty()) options.stratify_by = config.stratify_by;
  auto [test, train] = split_sample(kept, config.test_size, config.seed, options);

  const std::filesystem::path dir(config.output_dir);
  save_dataset(train, dir / "train.jsonl");
  save_dataset(test, dir / "test.jsonl");
  write_file_atomic(dir / "effective_config.json", effective_config_text(config));
  log("prepare: " + std::to_string(all.size()) + " loaded, " + std::to_string(kept.size()) +
      " kept, " + std::to_string(test.size()) + " test / " + std::to_string(train.size()) +
      " train");
}

void annotate(const RunConfig& config) {
  require_file(config.dataset, "dataset");
  validate_extractor(config);
  require_output_file(config.output);

  const Dataset dataset = load_dataset(config.dataset);
  ExtractorBundle bundle = make_extractor(config);
  AnnotateOptions options;
  options.extract_analysis = !config.withhold_analysis;
  options.on_failure = config.skip_failures ? FailurePolicy::kSkip : FailurePolicy::kAbort;
  options.workers = config.workers;

  AnnotationResult result = annotate_dataset(dataset, *bundle.extractor, options);
  for (const AnnotationFailure& failure : result.failures) {
    log("annotate: skipped '" + failure.instance_id + "': " + failure.message);
  }
  save_annotated(result.instances, config.output);
  log("annotate: wrote " + std::to_string(result.instances.size()) + " records to " +
      config.output);
}

void build_graph(const RunConfig& config) {
  require_file(config.annotated, "annotated");
  require_output_file(config.output);
  const auto train = load_annotated(config.annotated);
  const KnowledgeGraph graph = seedprompt::build_graph(train, config.workers);
  save_graph(graph, config.output);
  log("build-graph: " + std::to_string(graph.node_count()) + " nodes, " +
      std::to_string(graph.edge_count()) + " edges from " + std::to_string(train.size()) +
      " instances");
}

void mine_seeds(const RunConfig& config) {
  require_file(config.annotated, "annotated");
  require_file(config.graph, "graph");
  require_output_file(config.output);
  if (config.k == 0) throw ConfigError("k must be >= 1");

  const auto annotated = load_annotated(config.annotated);
  const KnowledgeGraph graph = load_graph(config.graph);
  std::vector<std::pair<std::string, SeedResult>> records(annotated.size());
  parallel_for(annotated.size(), config.workers, [&](std::size_t i) {
    records[i] = {annotated[i].base.id,
                  seedprompt::mine_seeds(graph, annotated[i].qo_entities, config.k)};
  });
  write_file_atomic(config.output, serialize_seed_records(records));
  log("mine-seeds: wrote " + std::to_string(records.size()) + " records to " + config.output);
}

EvalRun run(const RunConfig& config) {
  // Validation: nothing below may call the API before this block finishes.
  EvalConfig eval;
  eval.prompt.mode = parse_mode(config.mode);
  eval.prompt.shots = parse_shots(config.shots);
  eval.prompt.token_budget = config.token_budget;
  if (config.token_budget > kContextWindowTokens) {
    throw ConfigError("token_budget exceeds the " + std::to_string(kContextWindowTokens) +
                      "-token context window");
  }
  if (config.dataset.empty() && config.annotated.empty()) {
    throw ConfigError("missing required setting: dataset or annotated");
  }
  if (!config.dataset.empty()) require_file(config.dataset, "dataset");
  if (!config.annotated.empty()) require_file(config.annotated, "annotated");
  require_output_dir(config.output_dir);
  if (eval.prompt.shots == Shots::kFew) require_file(config.exemplars, "exemplars");
  if (!config.templates.empty()) require_file(config.templates, "templates");
  if (config.k == 0) throw ConfigError("k must be >= 1");

  const bool icp = eval.prompt.mode == PromptMode::kIcp;
  bool want_extractor = false;
  if (icp) {
    if (config.seeds.empty()) {
      require_file(config.graph, "graph");
    } else {
      require_file(config.seeds, "seeds");
      if (!config.graph.empty()) require_file(config.graph, "graph");
    }
    if (config.annotated.empty()) {
      const bool has_extractor = !config.lexicon.empty() || config.extractor == "llm";
      if (!has_extractor && config.seeds.empty()) {
        throw ConfigError("icp needs annotated input, a seeds file, or an entity extractor");
      }
      if (has_extractor) {
        validate_extractor(config);
        want_extractor = true;
      }
    }
  }
  validate_client_config(client_config(config, config.model));

  // Loading.
  if (!config.templates.empty()) eval.prompt.templates = load_template(config.templates);
  if (eval.prompt.shots == Shots::kFew) eval.prompt.exemplars = load_exemplars(config.exemplars);
  eval.model = config.model;
  eval.temperature = config.temperature;
  eval.system_message = config.system_message;
  eval.k = config.k;
  eval.workers = config.workers;
  eval.group_by = config.group_by;

  std::map<std::string, AnnotatedInstance> annotations;
  Dataset test;
  if (!config.annotated.empty()) {
    std::vector<Instance> instances;
    for (AnnotatedInstance& a : load_annotated(config.annotated)) {
      instances.push_back(a.base);
      annotations.emplace(a.base.id, std::move(a));
    }
    test = config.dataset.empty() ? Dataset(std::move(instances), Split::kTest)
                                  : load_dataset(config.dataset, DatasetFormat::kJsonLines,
                                                 Split::kTest);
  } else {
    test = load_dataset(config.dataset, DatasetFormat::kJsonLines, Split::kTest);
  }

  std::optional<KnowledgeGraph> graph;
  if (icp && !config.graph.empty()) graph = load_graph(config.graph);
  std::optional<std::map<std::string, SeedResult>> seeds;
  if (icp && !config.seeds.empty()) seeds = load_seed_records(config.seeds);
  ExtractorBundle extractor;
  if (want_extractor) extractor = make_extractor(config);

  auto client = make_client(client_config(config, config.model));
  EvalResources resources;
  resources.client = client.get();
  resources.graph = graph ? &*graph : nullptr;
  resources.extractor = extractor.extractor.get();
  resources.annotations = annotations.empty() ? nullptr : &annotations;
  resources.seeds = seeds ? &*seeds : nullptr;

  log("run: " + std::to_string(test.size()) + " instances, mode " + config.mode + ", " +
      config.shots + "-shot, backend " + config.backend + ", " +
      std::to_string(config.workers) + " worker(s)");
  EvalRun result = run_eval(test, eval, resources);

  const std::filesystem::path dir(config.output_dir);
  write_file_atomic(dir / "records.jsonl", serialize_records(result.records));
  write_file_atomic(dir / "report.json", serialize_report(result.report));
  write_file_atomic(dir / "report.md", report_markdown(result.report));
  write_file_atomic(dir / "effective_config.json", effective_config_text(config));

  for (const EvalRecord& r : result.records) {
    if (r.error) log("run: instance '" + r.id + "' failed: " + *r.error);
    if (config.log_prompts) log("run: instance '" + r.id + "' response: " + r.response);
  }
  log("run: accuracy " + format_percent(result.report.accuracy) + "% (" +
      std::to_string(result.report.correct) + "/" + std::to_string(result.report.total) +
      "), " + std::to_string(result.report.unresolved) + " unresolved");
  return result;
}

EvalReport report(const RunConfig& config) {
  require_file(config.records, "records");
  require_output_dir(config.output_dir);
  const EvalReport result = build_report(load_records(config.records), config.group_by);
  const std::filesystem::path dir(config.output_dir);
  write_file_atomic(dir / "report.json", serialize_report(result));
  write_file_atomic(dir / "report.md", report_markdown(result));
  log("report: " + std::to_string(result.total) + " records, accuracy " +
      format_percent(result.accuracy) + "%");
  return result;
}

void export_fixture(const RunConfig& config) {
  require_set(config.cache_dir, "cache_dir");
  if (!std::filesystem::is_directory(config.cache_dir)) {
    throw ConfigError("cache directory '" + config.cache_dir + "' does not exist");
  }
  require_output_file(config.output);
  const auto entries = export_cache(config.cache_dir);
  write_file_atomic(config.output, serialize_fixture(entries));
  log("export-fixture: " + std::to_string(entries.size()) + " entries");
}

}  // namespace seedprompt::commands
