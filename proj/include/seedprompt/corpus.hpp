#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seedprompt/text.hpp"

namespace seedprompt {

// Canonical option labels. Loaders fold lowercase and full-width forms to these.
inline constexpr std::string_view kOptionLabels = "ABCDE";

struct Instance {
  std::string id;
  std::string question;
  std::map<char, std::string> options;  // label -> text, ordered by label
  char answer = 0;
  std::string analysis;
  std::map<std::string, std::string> metadata;  // discipline, competency, ...

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Throws DataError naming the offending field when an invariant fails.
void validate_instance(const Instance& instance);

enum class Split { kTrain, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view s);

// Immutable after construction; ids are unique.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Instance> instances, Split split = Split::kTrain);

  const std::vector<Instance>& instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }
  Split split() const { return split_; }

  const Instance& operator[](std::size_t i) const { return instances_[i]; }
  auto begin() const { return instances_.begin(); }
  auto end() const { return instances_.end(); }

 private:
  std::vector<Instance> instances_;
  Split split_ = Split::kTrain;
};

// Accepts "A", "a", "Ａ", "ａ"; returns 0 for anything else.
char normalize_label(std::string_view raw);

// Record <-> JSON. Field names: id, question, options, answer, analysis,
// metadata (optional).
nlohmann::ordered_json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& record, std::size_t line = 0);

enum class DatasetFormat { kJsonLines };

DatasetFormat parse_dataset_format(std::string_view id);

Dataset parse_dataset(std::string_view content, Split split = Split::kTrain);
Dataset load_dataset(const std::filesystem::path& path,
                     DatasetFormat format = DatasetFormat::kJsonLines,
                     Split split = Split::kTrain);

std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Keeps instances with exactly `min_options` options (0 disables the check)
// and strictly more than `min_analysis_words` analysis words.
Dataset filter_instances(const Dataset& dataset, std::size_t min_options,
                         std::size_t min_analysis_words,
                         text::WordCountMode mode = text::WordCountMode::kScriptAware);

struct SplitOptions {
  // Metadata key to stratify on; instances missing the key form group "unknown".
  std::optional<std::string> stratify_by;
};

// Both halves keep the original relative order. Same seed, same split.
std::pair<Dataset, Dataset> split_sample(const Dataset& dataset, std::size_t test_size,
                                         std::uint64_t rng_seed,
                                         const SplitOptions& options = {});

// Utility for reading line-delimited files: yields (line number, text) for
// non-blank lines.
std::vector<std::pair<std::size_t, std::string>> read_nonblank_lines(
    const std::filesystem::path& path);
std::vector<std::pair<std::size_t, std::string>> split_nonblank_lines(
    std::string_view content);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace seedprompt
