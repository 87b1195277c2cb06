#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seedprompt/entity.hpp"

namespace seedprompt {

// Final answer label from a generated analysis, or nullopt when unresolved.
// Cascade, first tier that fires wins:
//   1. an explicit final-answer phrase followed by a label
//   2. a lone label on the final line
//   3. standalone labels in the last sentence
// Two distinct labels at the same tier leave the answer unresolved.
std::optional<char> extract_answer(std::string_view text, const std::set<char>& labels);

// Zero-count orders are smoothed to this numerator.
inline constexpr double kBleuEpsilon = 1e-9;

// Cumulative BLEU up to order n: clipped n-gram precisions, geometric mean,
// brevity penalty. Range [0, 1]; an empty candidate scores 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            int n);

// F1 of n-gram overlap, scaled to [0, 100].
double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n);

// F1 of longest-common-subsequence precision and recall, scaled to [0, 100].
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

// Bit-parallel LCS length.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct TextMetrics {
  std::array<double, 4> bleu{};  // BLEU-1..4, [0, 1]
  double rouge_1 = 0.0;          // [0, 100]
  double rouge_2 = 0.0;
  double rouge_l = 0.0;

  friend bool operator==(const TextMetrics&, const TextMetrics&) = default;
};

// Tokenizes both sides with text::tokenize().
TextMetrics text_metrics(std::string_view candidate, std::string_view reference);

struct SeedQuality {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const SeedQuality&, const SeedQuality&) = default;
};

SeedQuality seed_quality(const EntitySet& predicted, const EntitySet& gold);

}  // namespace seedprompt
