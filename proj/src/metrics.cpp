#include "seedprompt/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unordered_map>

#include "seedprompt/text.hpp"

namespace seedprompt {

// ---------------------------------------------------------------------------
// Answer extraction

namespace {

std::string nfkc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) return std::string(s);
  icu::UnicodeString out = normalizer->normalize(
      icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size()))),
      status);
  if (U_FAILURE(status)) return std::string(s);
  std::string utf8;
  out.toUTF8String(utf8);
  return utf8;
}

std::string ascii_lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.size() >= pos + prefix.size() && s.compare(pos, prefix.size(), prefix) == 0;
}

// Phrases and fillers are matched against an ASCII-lowercased NFKC copy,
// which keeps byte offsets aligned with the original NFKC text.
const std::vector<std::string>& final_answer_phrases() {
  static const std::vector<std::string> phrases = {
      "正确答案是", "正确答案为", "正确答案:", "答案是", "答案为", "答案应为",
      "答案:",     "the answer is", "final answer:", "answer is", "answer:"};
  return phrases;
}

const std::vector<std::string>& label_fillers() {
  static const std::vector<std::string> fillers = {
      " ", "\t", ":", "(", "[", "【", "**", "*", "\"", "'", "“", "选项", "option", "是", "为", "选"};
  return fillers;
}

std::optional<char> label_at(std::string_view original, std::size_t pos,
                             const std::set<char>& labels, bool allow_lowercase) {
  if (pos >= original.size()) return std::nullopt;
  char c = original[pos];
  if (allow_lowercase && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  if (!labels.contains(c) || !(original[pos] == c || allow_lowercase)) return std::nullopt;
  if (pos > 0 && is_ascii_alnum(original[pos - 1])) return std::nullopt;
  if (pos + 1 < original.size() && is_ascii_alnum(original[pos + 1])) return std::nullopt;
  return c;
}

std::set<char> tier_phrases(std::string_view original, std::string_view lowered,
                            const std::set<char>& labels) {
  std::set<char> found;
  for (const std::string& phrase : final_answer_phrases()) {
    std::size_t at = lowered.find(phrase);
    while (at != std::string_view::npos) {
      std::size_t pos = at + phrase.size();
      bool skipped = true;
      while (skipped) {
        skipped = false;
        for (const std::string& filler : label_fillers()) {
          if (starts_with_at(lowered, pos, filler)) {
            pos += filler.size();
            skipped = true;
            break;
          }
        }
      }
      if (auto label = label_at(original, pos, labels, /*allow_lowercase=*/true)) {
        found.insert(*label);
      }
      at = lowered.find(phrase, at + 1);
    }
  }
  return found;
}

std::vector<std::string> nonblank_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find('\n', start);
    if (end == std::string::npos) end = s.size();
    std::string line = text::trim(std::string_view(s).substr(start, end - start));
    if (!line.empty()) lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string strip_decoration(std::string s) {
  static const std::vector<std::string> decorations = {
      "。", ".", "*", "(", ")", "[", "]", "【", "】", ":", "\"", "'", "“", "”", "!", "！"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    s = text::trim(s);
    for (const std::string& d : decorations) {
      if (s.size() >= d.size() && s.compare(0, d.size(), d) == 0) {
        s.erase(0, d.size());
        changed = true;
      }
      if (s.size() >= d.size() && s.compare(s.size() - d.size(), d.size(), d) == 0) {
        s.resize(s.size() - d.size());
        changed = true;
      }
    }
  }
  return s;
}

std::string last_sentence(const std::string& line) {
  static const std::vector<std::string> terminators = {"。", "!", "?", ";", "！", "？", "；"};
  std::vector<std::string> segments;
  std::string current;
  std::size_t i = 0;
  while (i < line.size()) {
    bool split = false;
    for (const std::string& t : terminators) {
      if (starts_with_at(line, i, t)) {
        segments.push_back(current);
        current.clear();
        i += t.size();
        split = true;
        break;
      }
    }
    if (!split) current.push_back(line[i++]);
  }
  segments.push_back(current);
  for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
    if (!strip_decoration(*it).empty()) return *it;
  }
  return {};
}

}  // namespace

std::optional<char> extract_answer(std::string_view raw, const std::set<char>& labels) {
  if (labels.empty()) return std::nullopt;
  const std::string original = nfkc(raw);
  const std::string lowered = ascii_lower(original);

  const std::set<char> tier1 = tier_phrases(original, lowered, labels);
  if (tier1.size() == 1) return *tier1.begin();
  if (tier1.size() > 1) return std::nullopt;

  const std::vector<std::string> lines = nonblank_lines(original);
  if (lines.empty()) return std::nullopt;

  const std::string lone = strip_decoration(lines.back());
  if (lone.size() == 1) {
    if (auto label = label_at(lone, 0, labels, /*allow_lowercase=*/true)) return label;
  }

  const std::string sentence = last_sentence(lines.back());
  std::set<char> tier3;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (auto label = label_at(sentence, i, labels, /*allow_lowercase=*/false)) {
      tier3.insert(*label);
    }
  }
  if (tier3.size() == 1) return *tier3.begin();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Overlap metrics

namespace {

using NgramCounts = std::map<std::vector<std::uint32_t>, std::size_t>;

struct Encoded {
  std::vector<std::uint32_t> candidate;
  std::vector<std::uint32_t> reference;
};

Encoded encode(std::span<const std::string> candidate, std::span<const std::string> reference) {
  std::unordered_map<std::string_view, std::uint32_t> ids;
  auto id = [&](const std::string& token) {
    auto [it, inserted] = ids.emplace(token, static_cast<std::uint32_t>(ids.size()));
    return it->second;
  };
  Encoded out;
  for (const std::string& t : candidate) out.candidate.push_back(id(t));
  for (const std::string& t : reference) out.reference.push_back(id(t));
  return out;
}

NgramCounts ngram_counts(const std::vector<std::uint32_t>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::uint32_t>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& candidate, const NgramCounts& reference) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : candidate) {
    auto it = reference.find(gram);
    if (it != reference.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f1_percent(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
            int n) {
  if (n < 1) n = 1;
  if (candidate.empty()) return 0.0;
  const Encoded enc = encode(candidate, reference);
  double log_sum = 0.0;
  for (int order = 1; order <= n; ++order) {
    const auto k = static_cast<std::size_t>(order);
    const std::size_t total = enc.candidate.size() >= k ? enc.candidate.size() - k + 1 : 0;
    const std::size_t matches =
        clipped_overlap(ngram_counts(enc.candidate, k), ngram_counts(enc.reference, k));
    const double precision =
        matches > 0 ? static_cast<double>(matches) / static_cast<double>(total)
                    : kBleuEpsilon / static_cast<double>(std::max<std::size_t>(total, 1));
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return brevity * std::exp(log_sum / n);
}

double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference,
               int n) {
  if (n < 1) n = 1;
  const auto k = static_cast<std::size_t>(n);
  const Encoded enc = encode(candidate, reference);
  const NgramCounts cand = ngram_counts(enc.candidate, k);
  const NgramCounts ref = ngram_counts(enc.reference, k);
  const std::size_t cand_total = enc.candidate.size() >= k ? enc.candidate.size() - k + 1 : 0;
  const std::size_t ref_total = enc.reference.size() >= k ? enc.reference.size() - k + 1 : 0;
  if (cand_total == 0 || ref_total == 0) return 0.0;
  const double overlap = static_cast<double>(clipped_overlap(cand, ref));
  return f1_percent(overlap / static_cast<double>(cand_total),
                    overlap / static_cast<double>(ref_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  const Encoded enc = encode(a, b);
  const std::size_t m = enc.candidate.size();
  const std::size_t words = (m + 63) / 64;

  std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> match;
  for (std::size_t i = 0; i < m; ++i) {
    auto& mask = match[enc.candidate[i]];
    if (mask.empty()) mask.assign(words, 0);
    mask[i / 64] |= std::uint64_t{1} << (i % 64);
  }

  std::vector<std::uint64_t> v(words, ~std::uint64_t{0});
  if (m % 64 != 0) v.back() = (std::uint64_t{1} << (m % 64)) - 1;

  for (std::uint32_t symbol : enc.reference) {
    auto it = match.find(symbol);
    if (it == match.end()) continue;
    const auto& mask = it->second;
    std::uint64_t carry = 0;
    for (std::size_t w = 0; w < words; ++w) {
      const std::uint64_t u = v[w] & mask[w];
      const std::uint64_t partial = v[w] + u;
      const std::uint64_t c1 = partial < v[w] ? 1 : 0;
      const std::uint64_t sum = partial + carry;
      const std::uint64_t c2 = sum < partial ? 1 : 0;
      carry = c1 | c2;
      v[w] = sum | (v[w] & ~mask[w]);
    }
  }

  std::size_t ones = 0;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t word = v[w];
    if (w == words - 1 && m % 64 != 0) word &= (std::uint64_t{1} << (m % 64)) - 1;
    ones += static_cast<std::size_t>(std::popcount(word));
  }
  return m - ones;
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  return f1_percent(lcs / static_cast<double>(candidate.size()),
                    lcs / static_cast<double>(reference.size()));
}

TextMetrics text_metrics(std::string_view candidate, std::string_view reference) {
  const std::vector<std::string> cand = text::tokenize(candidate);
  const std::vector<std::string> ref = text::tokenize(reference);
  TextMetrics m;
  for (int n = 1; n <= 4; ++n) m.bleu[static_cast<std::size_t>(n - 1)] = bleu(cand, ref, n);
  m.rouge_1 = rouge_n(cand, ref, 1);
  m.rouge_2 = rouge_n(cand, ref, 2);
  m.rouge_l = rouge_l(cand, ref);
  return m;
}

SeedQuality seed_quality(const EntitySet& predicted, const EntitySet& gold) {
  if (predicted.empty() || gold.empty()) return {};
  std::size_t hits = 0;
  for (const Entity& e : predicted) hits += gold.contains(e) ? 1 : 0;
  SeedQuality q;
  q.precision = static_cast<double>(hits) / static_cast<double>(predicted.size());
  q.recall = static_cast<double>(hits) / static_cast<double>(gold.size());
  if (q.precision + q.recall > 0.0) {
    q.f1 = 2.0 * q.precision * q.recall / (q.precision + q.recall);
  }
  return q;
}

}  // namespace seedprompt
