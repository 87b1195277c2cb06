#include "seedprompt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "seedprompt/errors.hpp"

namespace seedprompt {

namespace {

std::string record_tag(const Instance& instance) {
  return instance.id.empty() ? std::string("<no id>") : "record '" + instance.id + "'";
}

const std::string& require_string(const nlohmann::json& record, const char* field,
                                  std::size_t line) {
  auto it = record.find(field);
  if (it == record.end()) throw DataError("missing required field", line, field);
  if (!it->is_string()) throw DataError("expected a string", line, field);
  return it->get_ref<const std::string&>();
}

// Unbiased enough for corpus sizes and, unlike std::uniform_int_distribution,
// identical on every standard library.
std::size_t bounded(std::mt19937_64& rng, std::size_t bound) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(bound));
}

// Partial Fisher-Yates: the first `count` entries of `pool` become a uniform sample.
void sample_prefix(std::vector<std::size_t>& pool, std::size_t count,
                   std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + bounded(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

void validate_instance(const Instance& instance) {
  const std::string tag = record_tag(instance);
  if (instance.id.empty()) throw DataError("id must be non-empty", 0, "id");
  if (text::is_blank(instance.question)) {
    throw DataError(tag + ": question is empty", 0, "question");
  }
  if (instance.options.empty()) throw DataError(tag + ": no options", 0, "options");
  for (const auto& [label, option_text] : instance.options) {
    if (kOptionLabels.find(label) == std::string_view::npos) {
      throw DataError(tag + ": option label outside A-E", 0, "options");
    }
    if (text::is_blank(option_text)) {
      throw DataError(tag + ": option " + std::string(1, label) + " is empty", 0,
                      "options");
    }
  }
  if (!instance.options.contains(instance.answer)) {
    throw DataError(tag + ": answer label not among options", 0, "answer");
  }
  if (text::is_blank(instance.analysis)) {
    throw DataError(tag + ": analysis is empty", 0, "analysis");
  }
}

std::string_view to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split tag '" + std::string(s) + "'");
}

Dataset::Dataset(std::vector<Instance> instances, Split split)
    : instances_(std::move(instances)), split_(split) {
  std::set<std::string_view> seen;
  for (const Instance& instance : instances_) {
    if (!seen.insert(instance.id).second) {
      throw DataError("duplicate id '" + instance.id + "'", 0, "id");
    }
  }
}

char normalize_label(std::string_view raw) {
  const std::u32string cps = text::decode_utf8(text::trim(raw));
  if (cps.size() != 1) return 0;
  char32_t c = cps[0];
  if (c >= 0xFF21 && c <= 0xFF3A) c = c - 0xFF21 + U'A';  // full-width upper
  if (c >= 0xFF41 && c <= 0xFF5A) c = c - 0xFF41 + U'a';  // full-width lower
  if (c >= U'a' && c <= U'z') c = c - U'a' + U'A';
  if (c >= U'A' && c <= U'Z' &&
      kOptionLabels.find(static_cast<char>(c)) != std::string_view::npos) {
    return static_cast<char>(c);
  }
  return 0;
}

nlohmann::ordered_json instance_to_json(const Instance& instance) {
  nlohmann::ordered_json record;
  record["id"] = instance.id;
  record["question"] = instance.question;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  for (const auto& [label, option_text] : instance.options) {
    options[std::string(1, label)] = option_text;
  }
  record["options"] = std::move(options);
  record["answer"] = std::string(1, instance.answer);
  record["analysis"] = instance.analysis;
  if (!instance.metadata.empty()) {
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    for (const auto& [key, value] : instance.metadata) meta[key] = value;
    record["metadata"] = std::move(meta);
  }
  return record;
}

Instance instance_from_json(const nlohmann::json& record, std::size_t line) {
  if (!record.is_object()) throw DataError("record is not a JSON object", line);
  Instance instance;
  instance.id = require_string(record, "id", line);
  if (instance.id.empty()) throw DataError("id must be non-empty", line, "id");
  const std::string tag = record_tag(instance);

  instance.question = require_string(record, "question", line);
  if (text::is_blank(instance.question)) {
    throw DataError(tag + ": question is empty", line, "question");
  }

  auto options = record.find("options");
  if (options == record.end()) throw DataError(tag + ": missing", line, "options");
  if (!options->is_object() || options->empty()) {
    throw DataError(tag + ": expected a non-empty label->text object", line, "options");
  }
  for (const auto& [raw_label, value] : options->items()) {
    const char label = normalize_label(raw_label);
    if (label == 0) {
      throw DataError(tag + ": option label '" + raw_label + "' outside A-E", line,
                      "options");
    }
    if (!value.is_string() || text::is_blank(value.get_ref<const std::string&>())) {
      throw DataError(tag + ": option " + raw_label + " must be non-empty text", line,
                      "options");
    }
    if (!instance.options.emplace(label, value.get<std::string>()).second) {
      throw DataError(tag + ": duplicate option label " + std::string(1, label), line,
                      "options");
    }
  }

  const std::string& raw_answer = require_string(record, "answer", line);
  instance.answer = normalize_label(raw_answer);
  if (instance.answer == 0 || !instance.options.contains(instance.answer)) {
    throw DataError(tag + ": answer label not among options ('" + raw_answer + "')",
                    line, "answer");
  }

  instance.analysis = require_string(record, "analysis", line);
  if (text::is_blank(instance.analysis)) {
    throw DataError(tag + ": analysis is empty", line, "analysis");
  }

  if (auto meta = record.find("metadata"); meta != record.end() && !meta->is_null()) {
    if (!meta->is_object()) throw DataError(tag + ": expected an object", line, "metadata");
    for (const auto& [key, value] : meta->items()) {
      if (!value.is_string()) {
        throw DataError(tag + ": metadata value for '" + key + "' must be a string", line,
                        "metadata");
      }
      instance.metadata.emplace(key, value.get<std::string>());
    }
  }
  return instance;
}

DatasetFormat parse_dataset_format(std::string_view id) {
  if (id == "jsonl" || id == "jsonlines") return DatasetFormat::kJsonLines;
  throw ConfigError("unknown dataset format '" + std::string(id) + "'");
}

std::vector<std::pair<std::size_t, std::string>> split_nonblank_lines(
    std::string_view content) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    ++line_no;
    std::string_view line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!text::is_blank(line)) lines.emplace_back(line_no, std::string(line));
    pos = end + 1;
  }
  return lines;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::vector<std::pair<std::size_t, std::string>> read_nonblank_lines(
    const std::filesystem::path& path) {
  return split_nonblank_lines(read_file(path));
}

Dataset parse_dataset(std::string_view content, Split split) {
  std::vector<Instance> instances;
  std::set<std::string> seen;
  for (const auto& [line_no, line] : split_nonblank_lines(content)) {
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Instance instance = instance_from_json(record, line_no);
    if (!seen.insert(instance.id).second) {
      throw DataError("duplicate id '" + instance.id + "'", line_no, "id");
    }
    instances.push_back(std::move(instance));
  }
  return Dataset(std::move(instances), split);
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     Split split) {
  (void)format;  // single format today
  try {
    return parse_dataset(read_file(path), split);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out;
  for (const Instance& instance : dataset) {
    out += instance_to_json(instance).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

Dataset filter_instances(const Dataset& dataset, std::size_t min_options,
                         std::size_t min_analysis_words, text::WordCountMode mode) {
  std::vector<Instance> kept;
  for (const Instance& instance : dataset) {
    if (min_options > 0 && instance.options.size() != min_options) continue;
    if (text::word_count(instance.analysis, mode) <= min_analysis_words) continue;
    kept.push_back(instance);
  }
  return Dataset(std::move(kept), dataset.split());
}

std::pair<Dataset, Dataset> split_sample(const Dataset& dataset, std::size_t test_size,
                                         std::uint64_t rng_seed,
                                         const SplitOptions& options) {
  const std::size_t n = dataset.size();
  if (test_size > n) {
    throw ConfigError("test_size " + std::to_string(test_size) +
                      " exceeds dataset size " + std::to_string(n));
  }
  std::mt19937_64 rng(rng_seed);
  std::vector<bool> in_test(n, false);

  if (!options.stratify_by) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    sample_prefix(pool, test_size, rng);
    for (std::size_t i = 0; i < test_size; ++i) in_test[pool[i]] = true;
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& meta = dataset[i].metadata;
      auto it = meta.find(*options.stratify_by);
      groups[it == meta.end() ? std::string("unknown") : it->second].push_back(i);
    }
    // Largest-remainder allocation; ties go to the lexicographically first group.
    struct Quota {
      std::vector<std::size_t>* members;
      std::size_t take;
      std::uint64_t remainder;
    };
    std::vector<Quota> quotas;
    std::size_t allocated = 0;
    for (auto& [name, members] : groups) {
      const std::uint64_t scaled = static_cast<std::uint64_t>(test_size) * members.size();
      quotas.push_back({&members, static_cast<std::size_t>(scaled / n), scaled % n});
      allocated += quotas.back().take;
    }
    std::vector<std::size_t> order(quotas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return quotas[a].remainder > quotas[b].remainder;
    });
    for (std::size_t idx : order) {
      if (allocated == test_size) break;
      if (quotas[idx].take < quotas[idx].members->size()) {
        ++quotas[idx].take;
        ++allocated;
      }
    }
    for (Quota& quota : quotas) {
      sample_prefix(*quota.members, quota.take, rng);
      for (std::size_t i = 0; i < quota.take; ++i) in_test[(*quota.members)[i]] = true;
    }
  }

  std::vector<Instance> test;
  std::vector<Instance> train;
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? test : train).push_back(dataset[i]);
  }
  return {Dataset(std::move(test), Split::kTest), Dataset(std::move(train), Split::kTrain)};
}

}  // namespace seedprompt
