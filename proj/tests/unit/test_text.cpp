#include <random>

#include "doctest.h"
#include "seedprompt/text.hpp"

using namespace seedprompt::text;

TEST_CASE("utf8 round trip and replacement of invalid bytes") {
  const std::string s = "a中ß😀";
  CHECK(encode_utf8(decode_utf8(s)) == s);
  CHECK(decode_utf8(s).size() == 4);
  CHECK(decode_utf8("\xff") == std::u32string(1, U'�'));
}

TEST_CASE("normalize applies NFKC and folds Latin case only") {
  CHECK(normalize("Levodopa") == "levodopa");
  CHECK(normalize("ＡＢＣ１２３") == "abc123");
  CHECK(normalize("帕金森病") == "帕金森病");
  CHECK(normalize("ΑΒΓ") == "ΑΒΓ");  // Greek is left alone
  CHECK(normalize("  x ") == "  x ");
}

TEST_CASE("normalize is idempotent on random mixed text") {
  std::mt19937_64 rng(11);
  const std::u32string alphabet = U"aZ ßſKÅﬁ①中文ＡｚΩé́　，";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<std::size_t> len(0, 20);
  for (int trial = 0; trial < 500; ++trial) {
    std::u32string cps;
    for (std::size_t i = len(rng); i > 0; --i) cps.push_back(alphabet[pick(rng)]);
    const std::string once = normalize(encode_utf8(cps));
    CHECK(normalize(once) == once);
  }
}

TEST_CASE("tokenize splits CJK per character and Latin on whitespace") {
  using V = std::vector<std::string>;
  CHECK(tokenize("") == V{});
  CHECK(tokenize("a b  c") == V{"a", "b", "c"});
  CHECK(tokenize("帕金森病") == V{"帕", "金", "森", "病"});
  CHECK(tokenize("使用levodopa治疗") == V{"使", "用", "levodopa", "治", "疗"});
  CHECK(tokenize("X线，CT") == V{"X", "线", "，", "CT"});
}

TEST_CASE("word_count modes") {
  CHECK(word_count("一二三 four five") == 5);
  CHECK(word_count("一二三 four five", WordCountMode::kWhitespace) == 3);
  CHECK(word_count("   ") == 0);
}

TEST_CASE("trim and blank detection include ideographic space") {
  CHECK(trim("　 ab \t") == "ab");
  CHECK(is_blank(" 　\n"));
  CHECK_FALSE(is_blank(" x "));
}
