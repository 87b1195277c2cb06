#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the corpus, entity, prompt and metric code.
namespace seedprompt::text {

// Invalid sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view utf8);
std::string encode_utf8(std::u32string_view codepoints);
void append_utf8(std::string& out, char32_t codepoint);

bool is_space(char32_t c);

// Han, kana, hangul, CJK punctuation and full-width forms.
bool is_cjk(char32_t c);

std::string trim(std::string_view s);
bool is_blank(std::string_view s);

// NFKC, then simple case folding of Latin-script letters. Never trims.
std::string normalize(std::string_view s);

// Whitespace splits words; every CJK codepoint is its own token. Mixed text is
// segmented at script boundaries.
std::vector<std::string> tokenize(std::string_view s);

enum class WordCountMode {
  kScriptAware,  // tokenize(): CJK characters count individually
  kWhitespace,   // plain whitespace-delimited tokens
};

std::size_t word_count(std::string_view s,
                       WordCountMode mode = WordCountMode::kScriptAware);

}  // namespace seedprompt::text
