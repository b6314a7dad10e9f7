#include "doctest.h"
#include "qarag/corpus.hpp"
#include "qarag/errors.hpp"
#include "qarag/text.hpp"
#include "support/gen.hpp"
#include "support/scratch_dir.hpp"

using namespace qarag;
using namespace qarag::corpus;

namespace {

// Chunk ranges re-derived by sliding-window arithmetic over code points.
std::vector<CharRange> sliding_windows(std::size_t len, std::size_t size, std::size_t overlap) {
  std::vector<CharRange> out;
  for (std::size_t start = 0; start < len;) {
    const std::size_t end = std::min(start + size, len);
    out.push_back({start, end});
    if (end == len) break;
    start = end - overlap;
  }
  return out;
}

std::string cp_substr(std::string_view s, std::size_t from, std::size_t to) {
  const auto cps = text::decode_utf8(s);
  const std::size_t b = from < cps.size() ? cps[from].offset : s.size();
  const std::size_t e = to < cps.size() ? cps[to].offset : s.size();
  return std::string(s.substr(b, e - b));
}

}  // namespace

TEST_CASE("parse_qa_dataset assigns ids from source and ordinal") {
  const auto v = parse_qa_dataset(R"({"question":"q","answer":"a"})", QaFormat::jsonl);
  REQUIRE(v.size() == 1);
  CHECK(v[0].id == "ds:0");
  CHECK(v[0].question == "q");
  CHECK(v[0].answer == "a");
  CHECK(parse_qa_dataset("", QaFormat::jsonl).empty());
  CHECK(parse_qa_dataset("\n\n", QaFormat::jsonl).empty());
  const auto w = parse_qa_dataset("{\"question\":\"q\",\"answer\":\"a\"}\n{\"id\":\"x\",\"question\":\"q2\",\"answer\":\"a2\"}",
                                  QaFormat::jsonl, "hw");
  CHECK(w[0].id == "hw:0");
  CHECK(w[1].id == "x");
}

TEST_CASE("malformed record reports its ordinal and byte offset") {
  std::string raw;
  std::int64_t offset7 = -1;
  for (int i = 0; i < 10; ++i) {
    if (i == 7) {
      offset7 = static_cast<std::int64_t>(raw.size());
      raw += R"({"question":"q7"})";
    } else {
      raw += R"({"question":"q)" + std::to_string(i) + R"(","answer":"a"})";
    }
    raw += "\n";
  }
  try {
    parse_qa_dataset(raw, QaFormat::jsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.record() == 7);
    CHECK(e.byte_offset() == offset7);
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_qa_dataset("{not json}\n", QaFormat::jsonl), ParseError);
  CHECK_THROWS_AS(parse_qa_dataset(R"({"question":"   ","answer":"a"})", QaFormat::jsonl), ParseError);
  CHECK_THROWS_AS(parse_qa_dataset(R"({"question":"q","answer":7})", QaFormat::jsonl), ParseError);
}

TEST_CASE("duplicate explicit ids are rejected") {
  const std::string raw = R"({"id":"a","question":"q","answer":"x"})"
                          "\n"
                          R"({"id":"a","question":"q","answer":"y"})";
  CHECK_THROWS_AS(parse_qa_dataset(raw, QaFormat::jsonl), DuplicateIdError);
}

TEST_CASE("json_array format and its element offsets") {
  const std::string raw = R"([ {"question":"q","answer":"a","tags":["t1","t2"],"course_id":"c"}, {"question":"q2"} ])";
  try {
    parse_qa_dataset(raw, QaFormat::json_array);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.record() == 1);
    CHECK(e.byte_offset() == static_cast<std::int64_t>(raw.find("{\"question\":\"q2\"")));
  }
  const auto ok = parse_qa_dataset(R"([{"question":"q","answer":"a","tags":["t1"],"course_id":"c"}])",
                                   QaFormat::json_array);
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].tags == std::vector<std::string>{"t1"});
  CHECK(ok[0].course_id == std::optional<std::string>("c"));
  CHECK_THROWS_AS(parse_qa_dataset(R"({"question":"q"})", QaFormat::json_array), ParseError);
}

TEST_CASE("QA JSONL serialization round-trips") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    testing::Gen g(seed);
    std::vector<QAPair> pairs;
    for (std::size_t i = 0, n = g.size(0, 12); i < n; ++i) {
      QAPair p;
      p.id = "id-" + std::to_string(i) + g.utf8_text(3);
      p.question = "q" + g.utf8_text(g.size(0, 30));
      p.answer = "a" + g.ascii_text(g.size(0, 30));
      if (g.coin()) p.course_id = g.ascii_text(5);
      for (std::size_t t = g.size(0, 3); t > 0; --t) p.tags.push_back(g.utf8_text(4));
      pairs.push_back(p);
    }
    CHECK(parse_qa_dataset(serialize_qa_jsonl(pairs), QaFormat::jsonl) == pairs);
  }
}

TEST_CASE("committed QA corpus parses") {
  const auto v = parse_qa_dataset(testing::slurp(testing::fixture("qa_corpus.jsonl")), QaFormat::jsonl);
  CHECK(v.size() == 15);
  CHECK(v[1].question == "What is the HCIE?");
}

TEST_CASE("catalog CSV row from the course reference table") {
  const auto v = parse_catalog(
      "technical_direction,course_name,version,course_type,languages\n"
      "Datacom,HCIA-Datacom,V1.0,Certification Course,\"Chinese, English\"\n",
      CatalogFormat::csv);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == CourseRecord{"Datacom", "HCIA-Datacom", "V1.0", CourseType::Certification, {"Chinese", "English"}});
}

TEST_CASE("catalog parsing rules") {
  CHECK(parse_catalog("technical_direction,course_name,version,course_type,languages\n", CatalogFormat::csv).empty());
  try {
    parse_catalog("technical_direction,course_name,version,course_type,languages\nX,Y,V1,Workshop,English\n",
                  CatalogFormat::csv);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("Workshop") != std::string::npos);
    CHECK(msg.find("Certification") != std::string::npos);
    CHECK(msg.find("Professional") != std::string::npos);
    CHECK(msg.find("General") != std::string::npos);
  }
  const auto reordered = parse_catalog("Languages,COURSE_TYPE,Version,Course_Name,Technical_Direction\r\n"
                                       "\"English, English , Chinese\",professional,V2,Name,Dir\r\n",
                                       CatalogFormat::csv);
  REQUIRE(reordered.size() == 1);
  CHECK(reordered[0].course_type == CourseType::Professional);
  CHECK(reordered[0].languages == std::vector<std::string>{"English", "Chinese"});
  CHECK(reordered[0].course_name == "Name");

  const auto fixture = parse_catalog(testing::slurp(testing::fixture("catalog.csv")), CatalogFormat::csv);
  CHECK(fixture.size() == 4);
  CHECK(fixture[2].languages == std::vector<std::string>{"English", "Spanish"});

  const auto js = parse_catalog(
      R"([{"technical_direction":"D","course_name":"N","version":"V","course_type":"general","languages":["A","A","B"]}])",
      CatalogFormat::json_array);
  REQUIRE(js.size() == 1);
  CHECK(js[0].languages == std::vector<std::string>{"A", "B"});
  CHECK_THROWS(parse_catalog("course_name\nx\n", CatalogFormat::csv));
}

TEST_CASE("chunking a 450-character text with the default config") {
  const std::string t(450, 'x');
  const auto c = chunk_text(t, ChunkingConfig{});
  REQUIRE(c.size() == 3);
  CHECK(c[0].char_range == CharRange{0, 200});
  CHECK(c[1].char_range == CharRange{200, 400});
  CHECK(c[2].char_range == CharRange{400, 450});
  CHECK(c[1].id == "doc#1");
  CHECK(c[2].seq_no == 2);
  CHECK(chunk_text("short", ChunkingConfig{}).size() == 1);
  CHECK(chunk_text("short", ChunkingConfig{})[0].char_range == CharRange{0, 5});
  CHECK(chunk_text("", ChunkingConfig{}).empty());
}

TEST_CASE("chunking config validation") {
  CHECK_THROWS_AS(ChunkingConfig({0, 0, BoundaryMode::hard}).validate(), ConfigError);
  CHECK_THROWS_AS(ChunkingConfig({10, 10, BoundaryMode::hard}).validate(), ConfigError);
  CHECK_NOTHROW(ChunkingConfig({10, 9, BoundaryMode::hard}).validate());
}

TEST_CASE("5 kB text, size 200, overlap 50 matches the sliding-window oracle") {
  testing::Gen g(42);
  const std::string t = g.ascii_text(5000);
  const auto chunks = chunk_text(t, {200, 50, BoundaryMode::hard}, "src");
  const auto expected = sliding_windows(5000, 200, 50);
  REQUIRE(chunks.size() == expected.size());
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    CHECK(chunks[i].char_range == expected[i]);
    CHECK(chunks[i].text == t.substr(expected[i].start, expected[i].length()));
    CHECK(chunks[i].id == "src#" + std::to_string(i));
  }
  CHECK(chunks.front().char_range.start == 0);
  CHECK(chunks.back().char_range.end == 5000);
}

TEST_CASE("hard chunking properties over random UTF-8 text and configs") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    testing::Gen g(seed);
    const std::string t = g.utf8_text(g.size(0, 700));
    const std::size_t n = text::decode_utf8(t).size();
    const std::size_t size = g.size(1, 250);
    const std::size_t overlap = g.size(0, size - 1);
    const auto chunks = chunk_text(t, {size, overlap, BoundaryMode::hard});
    const auto expected = sliding_windows(n, size, overlap);
    REQUIRE(chunks.size() == expected.size());
    std::string rebuilt;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      CHECK(c.char_range == expected[i]);
      CHECK(c.seq_no == i);
      CHECK(text::decode_utf8(c.text).size() == c.char_range.length());
      CHECK(c.text == cp_substr(t, c.char_range.start, c.char_range.end));
      if (i > 0) {
        const auto& prev = chunks[i - 1];
        CHECK(prev.char_range.end - c.char_range.start == std::min(overlap, prev.char_range.length()));
        rebuilt += cp_substr(c.text, prev.char_range.end - c.char_range.start, c.char_range.length());
      } else {
        rebuilt += c.text;
      }
    }
    CHECK(rebuilt == t);
  }
}

TEST_CASE("word-preserving chunking keeps words whole and covers the text") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    testing::Gen g(seed);
    const std::string t = g.sentence(testing::course_vocab(), 0, 120);
    const std::size_t n = t.size();
    const std::size_t size = g.size(5, 80);
    const auto chunks = chunk_text(t, {size, 0, BoundaryMode::word_preserving});
    std::size_t cursor = 0;
    for (const auto& c : chunks) {
      CHECK(c.char_range.start == cursor);
      CHECK(c.char_range.length() <= size);
      CHECK(c.char_range.length() >= 1);
      const std::size_t end = c.char_range.end;
      if (end < n) {
        const bool inside_word = t[end - 1] != ' ' && t[end] != ' ';
        const auto window = t.substr(c.char_range.start + 1, end - c.char_range.start - 1);
        // Only a word longer than the window may be cut.
        if (inside_word) CHECK(window.find(' ') == std::string::npos);
      }
      cursor = end;
    }
    CHECK(cursor == n);
  }
  const auto c = chunk_text("alpha beta gamma", {8, 0, BoundaryMode::word_preserving});
  REQUIRE(c.size() == 3);
  CHECK(c[0].text == "alpha ");
  CHECK(c[1].text == "beta ");
  CHECK(c[2].text == "gamma");
}

TEST_CASE("flatten_for_embedding formats") {
  CHECK(flatten_for_embedding(QAPair{"i", "What is X?", "Y.", std::nullopt, {}}) == "Q: What is X?\nA: Y.");
  const CourseRecord r{"Datacom", "HCIA-Datacom", "V1.0", CourseType::Certification, {"Chinese", "English"}};
  CHECK(flatten_for_embedding(r) == "HCIA-Datacom (V1.0, Certification): direction Datacom; languages: Chinese, English");
  CHECK(flatten_for_embedding(r) == flatten_for_embedding(r));
}

TEST_CASE("course type names") {
  CHECK(parse_course_type("CERTIFICATION") == CourseType::Certification);
  CHECK(parse_course_type("General Course") == CourseType::General);
  CHECK(to_string(CourseType::Professional) == "Professional");
}
