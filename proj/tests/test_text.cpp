#include "doctest.h"
#include "qarag/text.hpp"
#include "support/gen.hpp"

using namespace qarag::text;

TEST_CASE("split_whitespace handles ASCII and Unicode spaces") {
  CHECK(split_whitespace("  a\tb\n c  ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_whitespace("x\xC2\xA0y\xE2\x80\x83z") == std::vector<std::string>{"x", "y", "z"});
  CHECK(split_whitespace("").empty());
  CHECK(split_whitespace(" \n\t").empty());
  CHECK(split_whitespace("\xE4\xB8\xAD\xE6\x96\x87") == std::vector<std::string>{"\xE4\xB8\xAD\xE6\x96\x87"});
}

TEST_CASE("split_whitespace then joining loses only whitespace") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    qarag::testing::Gen g(seed);
    const auto s = g.utf8_text(g.size(0, 60));
    std::string joined, stripped;
    for (const auto& t : split_whitespace(s)) {
      CHECK_FALSE(t.empty());
      joined += t;
    }
    for (const auto& cp : decode_utf8(s)) {
      if (!is_unicode_space(cp.value)) {
        const std::size_t next = cp.offset + 1;
        std::size_t end = next;
        while (end < s.size() && (static_cast<unsigned char>(s[end]) & 0xC0) == 0x80) ++end;
        stripped += s.substr(cp.offset, end - cp.offset);
      }
    }
    CHECK(joined == stripped);
  }
}

TEST_CASE("ascii_lower leaves non-ASCII bytes alone") {
  CHECK(ascii_lower("HCIA-Datacom") == "hcia-datacom");
  CHECK(ascii_lower("\xC3\x89T\xC3\x89") == "\xC3\x89t\xC3\x89");
}

TEST_CASE("trim and strip_punct") {
  CHECK(trim("  hi there \n") == "hi there");
  CHECK(trim("\xE2\x80\x83x\xC2\xA0") == "x");
  CHECK(trim("   ").empty());
  CHECK(strip_punct("\"hello,\"") == "hello");
  CHECK(strip_punct("e-mail") == "e-mail");
  CHECK(strip_punct("...").empty());
}

TEST_CASE("utf8 validation and decoding") {
  CHECK(is_valid_utf8("plain"));
  CHECK(is_valid_utf8("\xF0\x9F\x93\x9A"));
  CHECK_FALSE(is_valid_utf8("\xC3"));
  CHECK_FALSE(is_valid_utf8("\xC0\xAF"));
  const auto cps = decode_utf8("a\xC3\xA9\xE4\xB8\xAD");
  REQUIRE(cps.size() == 3);
  CHECK(cps[0].value == U'a');
  CHECK(cps[1].value == U'é');
  CHECK(cps[1].offset == 1);
  CHECK(cps[2].value == U'中');
  CHECK(cps[2].offset == 3);
  CHECK(decode_utf8("\xFF")[0].value == 0xFFFD);
}

TEST_CASE("first_sentence") {
  CHECK(first_sentence("One. Two.") == "One.");
  CHECK(first_sentence("Version 1.0 is out! Yes.") == "Version 1.0 is out!");
  CHECK(first_sentence("no terminator here ") == "no terminator here");
  CHECK(first_sentence("Q: What?\nA: That.") == "Q: What?");
  CHECK(first_sentence("") == "");
}

TEST_CASE("truncate_tokens keeps the original spacing") {
  CHECK(truncate_tokens("a  b\tc d", 3) == "a  b\tc");
  CHECK(truncate_tokens("a b", 5) == "a b");
  CHECK(truncate_tokens("a b", 0) == "");
  std::string big;
  for (int i = 0; i < 1000; ++i) big += "w" + std::to_string(i) + " ";
  CHECK(split_whitespace(truncate_tokens(big, 300)).size() == 300);
}
