#include <cmath>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "qarag/embedding.hpp"
#include "qarag/errors.hpp"
#include "support/gen.hpp"

using namespace qarag;
using namespace qarag::embedding;

namespace {

long double cosine_oracle(const std::vector<float>& a, const std::vector<float>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// Minimal loopback embedding endpoint: returns a fixed-dim vector per input or a canned status.
struct FakeEmbeddingServer {
  explicit FakeEmbeddingServer(std::size_t dim, int status = 200) {
    server.Post("/embed", [dim, status](const httplib::Request& req, httplib::Response& res) {
      if (status != 200) {
        res.status = status;
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json out;
      out["data"] = nlohmann::json::array();
      for (const auto& text : body.at("input")) {
        std::vector<float> v(dim, 0.0f);
        v[text.get<std::string>().size() % dim] = 3.0f;
        v[0] += 4.0f;
        out["data"].push_back({{"embedding", v}});
      }
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeEmbeddingServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/embed"; }

  httplib::Server server;
  std::thread thread;
  int port = 0;
};

}  // namespace

TEST_CASE("local embedder basics") {
  const LocalHashEmbedder e(768, 0);
  const auto empty = e.embed("");
  CHECK(empty.dim() == 768);
  CHECK(empty.is_zero());
  CHECK_FALSE(empty.is_normalized());
  const auto v = e.embed("alpha beta");
  CHECK(v.is_normalized());
  CHECK(v == e.embed("alpha beta"));
  CHECK(v == e.embed("ALPHA   beta\n"));
  CHECK(v != LocalHashEmbedder(768, 1).embed("alpha beta"));
}

TEST_CASE("local embedder hashing is pinned") {
  CHECK(salted_fnv1a("alpha", 7) == 0x0c854d6aaaf2011aULL);
  CHECK(salted_fnv1a("alpha beta", 0) == 0x3331a69df4b55763ULL);
  // One token, one feature: bucket 75, bit 63 set, so -1 there.
  const auto v = LocalHashEmbedder(768, 0).embed("alpha");
  for (std::size_t i = 0; i < 768; ++i) CHECK(v.values[i] == (i == 75 ? -1.0f : 0.0f));
}

TEST_CASE("shared tokens raise cosine under the local embedder") {
  EmbeddingProviderConfig cfg;
  const auto a = embed_text("cloud computing course", cfg);
  const auto b = embed_text("cloud computing courses", cfg);
  const auto c = embed_text("wireless local area network", cfg);
  CHECK(cosine_similarity(a, b) > cosine_similarity(a, c));
}

TEST_CASE("provider config validation") {
  EmbeddingProviderConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.dim = 8;
  cfg.kind = EmbedderKind::remote_http;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.endpoint = "http://127.0.0.1:1/x";
  CHECK_NOTHROW(cfg.validate());
  cfg.endpoint = "https://example.invalid/x";
  CHECK_THROWS_AS(make_embedder(cfg), ConfigError);
}

TEST_CASE("quantize_absmax examples") {
  const auto q = quantize_absmax(EmbeddingVector{{0.5f, -1.0f}});
  CHECK(q.quant_constant == 127.0f);
  CHECK(q.codes == std::vector<std::int8_t>{64, -127});
  const auto d = dequantize(q);
  CHECK(d.values[0] == 64.0f / 127.0f);
  CHECK(d.values[1] == -1.0f);
  for (float a : {1e-6f, 0.3f, 2.0f, 1e6f}) {
    CHECK(quantize_absmax(EmbeddingVector{{a, a, a}}).codes == std::vector<std::int8_t>{127, 127, 127});
  }
  CHECK(dequantize(QuantizedVector{{127}, 127.0f}).values == std::vector<float>{1.0f});
  CHECK_THROWS_AS(quantize_absmax(EmbeddingVector{{0.0f, 0.0f}}), ZeroVectorError);
  CHECK_THROWS_WITH(quantize_absmax(EmbeddingVector{{0.0f}}), "cannot quantize zero vector");
  CHECK_THROWS_AS(dequantize(QuantizedVector{{1}, 0.0f}), CorruptDataError);
  CHECK_THROWS_AS(dequantize(QuantizedVector{{1}, -2.0f}), CorruptDataError);
  CHECK_THROWS_AS(dequantize(QuantizedVector{{1}, NAN}), CorruptDataError);
}

TEST_CASE("quantization round-trip error on unit-scale vectors") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    testing::Gen g(seed);
    const auto v = g.normal_vector(768);
    float m = 0.0f;
    for (float x : v.values) m = std::max(m, std::abs(x));
    const auto d = dequantize(quantize_absmax(v));
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      CHECK(std::abs(static_cast<double>(d.values[i]) - v.values[i]) <= m / 254.0 + 1e-6);
    }
  }
}

TEST_CASE("quantization round-trip error, range and sign properties") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    testing::Gen g(seed);
    const auto v = g.vector(g.size(1, 300));
    float m = 0.0f;
    for (float x : v.values) m = std::max(m, std::abs(x));
    const auto q = quantize_absmax(v);
    CHECK(q.quant_constant > 0.0f);
    bool saw_max = false;
    for (auto c : q.codes) {
      CHECK(c >= -127);
      saw_max = saw_max || c == 127 || c == -127;
    }
    CHECK(saw_max);
    const auto d = dequantize(q);
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      const double err = std::abs(static_cast<double>(d.values[i]) - v.values[i]);
      // Half a quantization step, plus half a float ulp at m for the float result.
      CHECK(err <= m / 254.0 + 0.5 * (std::nextafter(m, INFINITY) - m));
      if (std::abs(v.values[i]) > m / 254.0f) CHECK(std::signbit(d.values[i]) == std::signbit(v.values[i]));
    }
  }
}

TEST_CASE("quantize(dequantize(q)) is the identity on quantizer outputs") {
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    testing::Gen g(seed);
    const auto q = g.reachable_quantized(g.size(1, 64));
    CHECK(quantize_absmax(dequantize(q)) == q);
  }
}

TEST_CASE("cosine similarity against a long double oracle") {
  CHECK(cosine_similarity(EmbeddingVector{{1, 0}}, EmbeddingVector{{0, 1}}) == 0.0f);
  CHECK_THROWS_AS(cosine_similarity(EmbeddingVector{{0, 0}}, EmbeddingVector{{0, 1}}), ConfigError);
  CHECK_THROWS_AS(cosine_similarity(EmbeddingVector{{1}}, EmbeddingVector{{0, 1}}), ConfigError);
  testing::Gen g(9);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t dim = g.size(1, 64);
    const auto a = g.vector(dim), b = g.vector(dim);
    const double c = cosine_similarity(std::span<const float>(a.values), std::span<const float>(b.values));
    CHECK(std::abs(c - static_cast<double>(cosine_oracle(a.values, b.values))) <= 1e-6);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(c == cosine_similarity(std::span<const float>(b.values), std::span<const float>(a.values)));
    CHECK(std::abs(cosine_similarity(a, a) - 1.0f) <= 1e-6f);
  }
}

TEST_CASE("remote embedder normalizes and validates dim") {
  FakeEmbeddingServer server(8);
  EmbeddingProviderConfig cfg;
  cfg.kind = EmbedderKind::remote_http;
  cfg.dim = 8;
  cfg.endpoint = server.url();
  cfg.timeout = std::chrono::milliseconds(2000);
  const auto e = make_embedder(cfg);
  CHECK(e->probe(std::chrono::milliseconds(500)));
  const auto v = e->embed("abc");
  CHECK(v.is_normalized());
  CHECK(v.values[0] == doctest::Approx(0.8));
  CHECK(v.values[3] == doctest::Approx(0.6));
  const std::vector<std::string> texts = {"a", "bb", "ccc"};
  CHECK(e->embed_batch(texts).size() == 3);

  cfg.dim = 16;
  CHECK_THROWS_AS(make_embedder(cfg)->embed("abc"), ConfigError);
}

TEST_CASE("remote embedder failures are retryable and carry endpoint and status") {
  FakeEmbeddingServer server(8, 500);
  EmbeddingProviderConfig cfg;
  cfg.kind = EmbedderKind::remote_http;
  cfg.dim = 8;
  cfg.endpoint = server.url();
  try {
    make_embedder(cfg)->embed("x");
    FAIL("expected RetryableError");
  } catch (const RetryableError& e) {
    CHECK(e.status() == 500);
    CHECK(e.endpoint() == server.url());
  }
  cfg.endpoint = "http://127.0.0.1:1/embed";
  cfg.timeout = std::chrono::milliseconds(300);
  const auto dead = make_embedder(cfg);
  CHECK_FALSE(dead->probe(std::chrono::milliseconds(300)));
  try {
    dead->embed("x");
    FAIL("expected RetryableError");
  } catch (const RetryableError& e) {
    CHECK(e.status() == 0);
  }
}
