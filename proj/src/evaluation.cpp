#include "seedprompt/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>

#include "seedprompt/errors.hpp"
#include "seedprompt/text.hpp"

namespace seedprompt {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<double> accuracy_percent(std::size_t correct, std::size_t total) {
  if (total == 0) return std::nullopt;
  return std::round(10000.0 * static_cast<double>(correct) / static_cast<double>(total)) / 100.0;
}

std::string format_percent(std::optional<double> percent) {
  if (!percent) return "undefined";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", *percent);
  return buffer;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

class MetricAccumulator {
 public:
  void add(const TextMetrics& m) {
    ++count_;
    for (std::size_t i = 0; i < 4; ++i) sum_.bleu[i] += m.bleu[i];
    sum_.rouge_1 += m.rouge_1;
    sum_.rouge_2 += m.rouge_2;
    sum_.rouge_l += m.rouge_l;
  }

  std::optional<MeanMetrics> mean() const {
    if (count_ == 0) return std::nullopt;
    const double n = static_cast<double>(count_);
    MeanMetrics out{count_, sum_};
    for (double& b : out.mean.bleu) b /= n;
    out.mean.rouge_1 /= n;
    out.mean.rouge_2 /= n;
    out.mean.rouge_l /= n;
    return out;
  }

 private:
  std::size_t count_ = 0;
  TextMetrics sum_;
};

class SeedAccumulator {
 public:
  void add(const SeedQuality& q) {
    ++count_;
    sum_.precision += q.precision;
    sum_.recall += q.recall;
    sum_.f1 += q.f1;
  }

  std::optional<MeanSeedQuality> mean() const {
    if (count_ == 0) return std::nullopt;
    const double n = static_cast<double>(count_);
    return MeanSeedQuality{count_, {sum_.precision / n, sum_.recall / n, sum_.f1 / n}};
  }

 private:
  std::size_t count_ = 0;
  SeedQuality sum_;
};

class MeanAccumulator {
 public:
  void add(double v) {
    ++count_;
    sum_ += v;
  }
  std::optional<double> mean() const {
    if (count_ == 0) return std::nullopt;
    return sum_ / static_cast<double>(count_);
  }

 private:
  std::size_t count_ = 0;
  double sum_ = 0.0;
};

OutcomeStats outcome_stats(const std::vector<const EvalRecord*>& records) {
  OutcomeStats out;
  out.count = records.size();
  MeanAccumulator rouge_l, bleu_4, length, seed_count;
  SeedAccumulator seeds;
  for (const EvalRecord* r : records) {
    if (r->metrics) {
      rouge_l.add(r->metrics->rouge_l);
      bleu_4.add(r->metrics->bleu[3]);
    }
    if (!r->error) length.add(static_cast<double>(r->response_length));
    if (r->seeds) seed_count.add(static_cast<double>(r->seeds->size()));
    if (r->seed_quality) seeds.add(*r->seed_quality);
  }
  out.rouge_l = rouge_l.mean();
  out.bleu_4 = bleu_4.mean();
  out.length = length.mean();
  out.seed_count = seed_count.mean();
  if (auto mean = seeds.mean()) out.seed_quality = mean->mean;
  return out;
}

}  // namespace

EvalReport build_report(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& group_by) {
  EvalReport report;
  report.total = records.size();
  MetricAccumulator metrics;
  SeedAccumulator seeds;
  std::map<std::string, std::map<std::string, MetricAccumulator>> group_metrics;
  std::vector<const EvalRecord*> correct;
  std::vector<const EvalRecord*> incorrect;

  for (const EvalRecord& r : records) {
    if (r.correct) ++report.correct;
    if (!r.extracted_answer) ++report.unresolved;
    if (r.error) ++report.failed;
    if (r.metrics) metrics.add(*r.metrics);
    if (r.seed_quality) seeds.add(*r.seed_quality);
    (r.correct ? correct : incorrect).push_back(&r);
    for (const std::string& key : group_by) {
      auto it = r.metadata.find(key);
      const std::string value = it == r.metadata.end() ? "unknown" : it->second;
      GroupStats& stats = report.groups[key][value];
      ++stats.count;
      if (r.correct) ++stats.correct;
      if (r.metrics) group_metrics[key][value].add(*r.metrics);
    }
  }
  for (const std::string& key : group_by) report.groups.try_emplace(key);
  for (auto& [key, values] : report.groups) {
    for (auto& [value, stats] : values) {
      stats.accuracy = accuracy_percent(stats.correct, stats.count);
      stats.metrics = group_metrics[key][value].mean();
    }
  }
  report.accuracy = accuracy_percent(report.correct, report.total);
  report.metrics = metrics.mean();
  report.seed_quality = seeds.mean();
  report.correct_outcome = outcome_stats(correct);
  report.incorrect_outcome = outcome_stats(incorrect);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ordered_json metrics_json(const TextMetrics& m) {
  ordered_json out;
  out["bleu_1"] = m.bleu[0];
  out["bleu_2"] = m.bleu[1];
  out["bleu_3"] = m.bleu[2];
  out["bleu_4"] = m.bleu[3];
  out["rouge_1"] = m.rouge_1;
  out["rouge_2"] = m.rouge_2;
  out["rouge_l"] = m.rouge_l;
  return out;
}

TextMetrics metrics_from_json(const json& in) {
  TextMetrics m;
  m.bleu = {in.at("bleu_1").get<double>(), in.at("bleu_2").get<double>(),
            in.at("bleu_3").get<double>(), in.at("bleu_4").get<double>()};
  m.rouge_1 = in.at("rouge_1").get<double>();
  m.rouge_2 = in.at("rouge_2").get<double>();
  m.rouge_l = in.at("rouge_l").get<double>();
  return m;
}

ordered_json seed_quality_json(const SeedQuality& q) {
  ordered_json out;
  out["precision"] = q.precision;
  out["recall"] = q.recall;
  out["f1"] = q.f1;
  return out;
}

ordered_json optional_number(std::optional<double> v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json mean_metrics_json(const std::optional<MeanMetrics>& m) {
  if (!m) return nullptr;
  ordered_json out;
  out["count"] = m->count;
  const ordered_json means = metrics_json(m->mean);
  for (const auto& [k, v] : means.items()) out[k] = v;
  return out;
}

ordered_json outcome_json(const OutcomeStats& o) {
  ordered_json out;
  out["count"] = o.count;
  out["rouge_l"] = optional_number(o.rouge_l);
  out["bleu_4"] = optional_number(o.bleu_4);
  out["length"] = optional_number(o.length);
  out["seed_count"] = optional_number(o.seed_count);
  out["seed_precision"] = optional_number(o.seed_quality ? std::optional(o.seed_quality->precision)
                                                         : std::nullopt);
  out["seed_recall"] =
      optional_number(o.seed_quality ? std::optional(o.seed_quality->recall) : std::nullopt);
  out["seed_f1"] =
      optional_number(o.seed_quality ? std::optional(o.seed_quality->f1) : std::nullopt);
  return out;
}

}  // namespace

ordered_json record_to_json(const EvalRecord& r) {
  ordered_json out;
  out["id"] = r.id;
  out["mode"] = to_string(r.mode);
  out["shots"] = to_string(r.shots);
  out["prompt_digest"] = r.prompt_digest;
  out["response"] = r.response;
  out["extracted_answer"] =
      r.extracted_answer ? ordered_json(std::string(1, *r.extracted_answer)) : ordered_json(nullptr);
  out["gold_answer"] = std::string(1, r.gold_answer);
  out["correct"] = r.correct;
  out["response_length"] = r.response_length;
  if (r.metrics) out["metrics"] = metrics_json(*r.metrics);
  if (r.seeds) out["seeds"] = *r.seeds;
  if (r.seed_quality) out["seed_quality"] = seed_quality_json(*r.seed_quality);
  if (!r.metadata.empty()) out["metadata"] = r.metadata;
  if (r.error) out["error"] = *r.error;
  return out;
}

EvalRecord record_from_json(const json& in, std::size_t line) {
  try {
    EvalRecord r;
    r.id = in.at("id").get<std::string>();
    r.mode = parse_mode(in.at("mode").get<std::string>());
    r.shots = parse_shots(in.at("shots").get<std::string>());
    r.prompt_digest = in.at("prompt_digest").get<std::string>();
    r.response = in.at("response").get<std::string>();
    if (!in.at("extracted_answer").is_null()) {
      const std::string a = in.at("extracted_answer").get<std::string>();
      r.extracted_answer = normalize_label(a);
      if (*r.extracted_answer == 0) throw DataError("bad label", line, "extracted_answer");
    }
    r.gold_answer = normalize_label(in.at("gold_answer").get<std::string>());
    if (r.gold_answer == 0) throw DataError("bad label", line, "gold_answer");
    r.correct = in.at("correct").get<bool>();
    r.response_length = in.at("response_length").get<std::size_t>();
    if (in.contains("metrics")) r.metrics = metrics_from_json(in["metrics"]);
    if (in.contains("seeds")) r.seeds = in["seeds"].get<std::vector<std::string>>();
    if (in.contains("seed_quality")) {
      const json& q = in["seed_quality"];
      r.seed_quality = SeedQuality{q.at("precision").get<double>(), q.at("recall").get<double>(),
                                   q.at("f1").get<double>()};
    }
    if (in.contains("metadata")) {
      r.metadata = in["metadata"].get<std::map<std::string, std::string>>();
    }
    if (in.contains("error")) r.error = in["error"].get<std::string>();
    if (r.correct && r.extracted_answer != r.gold_answer) {
      throw DataError("record marked correct but answers differ", line, "correct");
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed eval record: ") + e.what(), line);
  } catch (const ConfigError& e) {
    throw DataError(e.what(), line);
  }
}

std::string serialize_records(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const EvalRecord& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::vector<EvalRecord> out;
  for (const auto& [line_no, line] : read_nonblank_lines(path)) {
    json in = json::parse(line, nullptr, false);
    if (in.is_discarded()) throw DataError(path.string() + ": malformed JSON", line_no);
    out.push_back(record_from_json(in, line_no));
  }
  return out;
}

ordered_json report_to_json(const EvalReport& report) {
  ordered_json out;
  out["total"] = report.total;
  out["correct"] = report.correct;
  out["unresolved"] = report.unresolved;
  out["failed"] = report.failed;
  out["accuracy_defined"] = report.accuracy.has_value();
  out["accuracy"] = optional_number(report.accuracy);
  out["accuracy_text"] = format_percent(report.accuracy);
  out["mean_metrics"] = mean_metrics_json(report.metrics);
  if (report.seed_quality) {
    ordered_json q = seed_quality_json(report.seed_quality->mean);
    q["count"] = report.seed_quality->count;
    out["mean_seed_quality"] = q;
  } else {
    out["mean_seed_quality"] = nullptr;
  }
  ordered_json groups = ordered_json::object();
  for (const auto& [key, values] : report.groups) {
    ordered_json table = ordered_json::object();
    for (const auto& [value, stats] : values) {
      ordered_json row;
      row["count"] = stats.count;
      row["correct"] = stats.correct;
      row["accuracy"] = optional_number(stats.accuracy);
      row["mean_metrics"] = mean_metrics_json(stats.metrics);
      table[value] = row;
    }
    groups[key] = table;
  }
  out["groups"] = groups;
  out["outcome_split"] = {{"correct", outcome_json(report.correct_outcome)},
                          {"incorrect", outcome_json(report.incorrect_outcome)}};
  return out;
}

std::string serialize_report(const EvalReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

namespace {

std::string fixed(std::optional<double> v, int digits = 2) {
  if (!v) return "/";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, *v);
  return buffer;
}

std::string metric_cells(const std::optional<MeanMetrics>& m) {
  if (!m) return "/ | / | / | / | / | / | /";
  const TextMetrics& t = m->mean;
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) out += fixed(100.0 * t.bleu[i]) + " | ";
  out += fixed(t.rouge_1) + " | " + fixed(t.rouge_2) + " | " + fixed(t.rouge_l);
  return out;
}

std::string outcome_row(const std::string& label, const OutcomeStats& o) {
  auto seed = [&](double SeedQuality::*field) -> std::optional<double> {
    if (!o.seed_quality) return std::nullopt;
    return (*o.seed_quality).*field;
  };
  return "| " + label + " | " + std::to_string(o.count) + " | " + fixed(o.rouge_l) + " | " +
         fixed(o.bleu_4 ? std::optional(*o.bleu_4 * 100.0) : std::nullopt) + " | " +
         fixed(o.length) + " | " + fixed(o.seed_count) + " | " +
         fixed(seed(&SeedQuality::precision), 3) + " | " + fixed(seed(&SeedQuality::recall), 3) +
         " | " + fixed(seed(&SeedQuality::f1), 3) + " |\n";
}

}  // namespace

std::string report_markdown(const EvalReport& report) {
  const std::string header =
      "| Acc(%) | BLEU-1 | BLEU-2 | BLEU-3 | BLEU-4 | ROUGE-1 | ROUGE-2 | ROUGE-L |\n";
  std::string out = "# Evaluation report\n\n";
  out += "Total " + std::to_string(report.total) + ", correct " + std::to_string(report.correct) +
         ", unresolved " + std::to_string(report.unresolved) + ", failed " +
         std::to_string(report.failed) + ".\n\n";
  out += header;
  out += "|---|---|---|---|---|---|---|---|\n";
  out += "| " + format_percent(report.accuracy) + " | " + metric_cells(report.metrics) + " |\n";

  for (const auto& [key, values] : report.groups) {
    out += "\n## By " + key + "\n\n";
    out += "| " + key + " | Count " + header;
    out += "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& [value, stats] : values) {
      out += "| " + value + " | " + std::to_string(stats.count) + " | " +
             format_percent(stats.accuracy) + " | " + metric_cells(stats.metrics) + " |\n";
    }
  }

  out += "\n## Correct vs incorrect\n\n";
  out += "| | Count | ROUGE-L | BLEU-4 | Length | Count of KS | Precision of KS | "
         "Recall of KS | F1 of KS |\n";
  out += "|---|---|---|---|---|---|---|---|---|\n";
  out += outcome_row("Correct", report.correct_outcome);
  out += outcome_row("Incorrect", report.incorrect_outcome);
  return out;
}

// ---------------------------------------------------------------------------
// Run loop

namespace {

void validate_eval(const EvalConfig& config, const EvalResources& resources) {
  if (!resources.client) throw ConfigError("evaluation needs a chat client");
  if (config.model.empty()) throw ConfigError("evaluation needs a model id");
  if (config.k == 0) throw ConfigError("seed count k must be >= 1");
  if (config.prompt.shots == Shots::kFew && config.prompt.exemplars.empty()) {
    throw ConfigError("few-shot evaluation needs exemplars");
  }
  if (config.prompt.mode == PromptMode::kIcp) {
    if (!resources.seeds && !resources.graph) {
      throw ConfigError("icp evaluation needs a knowledge graph or a seeds file");
    }
    if (!resources.seeds && !resources.annotations && !resources.extractor) {
      throw ConfigError("icp evaluation needs an entity extractor or annotated input");
    }
  }
}

const AnnotatedInstance* find_annotation(const EvalResources& resources, const std::string& id) {
  if (!resources.annotations) return nullptr;
  auto it = resources.annotations->find(id);
  return it == resources.annotations->end() ? nullptr : &it->second;
}

std::set<char> option_labels(const Instance& instance) {
  std::set<char> labels;
  for (const auto& [label, option_text] : instance.options) labels.insert(label);
  return labels;
}

EvalRecord evaluate_one(const Instance& instance, const EvalConfig& config,
                        const EvalResources& resources) {
  EvalRecord record;
  record.id = instance.id;
  record.mode = config.prompt.mode;
  record.shots = config.prompt.shots;
  record.gold_answer = instance.answer;
  record.metadata = instance.metadata;

  try {
    std::optional<SeedResult> seeds;
    const AnnotatedInstance* annotation = find_annotation(resources, instance.id);
    if (config.prompt.mode == PromptMode::kIcp) {
      if (resources.seeds && resources.seeds->contains(instance.id)) {
        seeds = resources.seeds->at(instance.id);
      } else {
        if (!resources.graph) throw Error("no seeds recorded for this instance");
        EntitySet query;
        if (annotation) {
          query = annotation->qo_entities;
        } else if (resources.extractor) {
          query = resources.extractor->extract(question_with_options(instance));
        } else {
          throw Error("no entities for this instance");
        }
        seeds = mine_seeds(*resources.graph, query, config.k);
      }
      std::vector<std::string> names;
      for (const Seed& s : seeds->seeds) names.push_back(s.entity.str());
      record.seeds = std::move(names);
    }

    const RenderedPrompt prompt = compose(instance, config.prompt, seeds);
    CompletionRequest request;
    request.model = config.model;
    request.prompt = prompt.text;
    request.temperature = config.temperature;
    request.max_tokens = default_max_tokens(prompt.estimated_tokens);
    request.system = config.system_message;
    record.prompt_digest = request_digest(request);

    const CompletionResponse response = resources.client->complete(request);
    record.response = response.text;
    record.response_length = text::tokenize(response.text).size();
    record.extracted_answer = extract_answer(response.text, option_labels(instance));
    record.correct = record.extracted_answer == instance.answer;

    if (config.prompt.mode != PromptMode::kStandardQa) {
      record.metrics = text_metrics(response.text, instance.analysis);
    }
    if (seeds) {
      if (annotation) {
        record.seed_quality = seed_quality(seeds->entities(), annotation->r_entities);
      } else if (resources.extractor) {
        record.seed_quality =
            seed_quality(seeds->entities(), resources.extractor->extract(instance.analysis));
      }
    }
  } catch (const UpstreamExhaustedError&) {
    throw;
  } catch (const std::exception& e) {
    record.error = e.what();
    record.extracted_answer.reset();
    record.correct = false;
    record.metrics.reset();
    record.seed_quality.reset();
  }
  return record;
}

}  // namespace

EvalRun run_eval(const Dataset& test, const EvalConfig& config, const EvalResources& resources) {
  validate_eval(config, resources);
  std::vector<EvalRecord> records(test.size());
  parallel_for(test.size(), config.workers, [&](std::size_t i) {
    records[i] = evaluate_one(test[i], config, resources);
  });
  EvalRun run;
  run.report = build_report(records, config.group_by);
  run.records = std::move(records);
  return run;
}

}  // namespace seedprompt
