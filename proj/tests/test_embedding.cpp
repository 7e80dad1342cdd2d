#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "autoform/embedding.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace autoform;

namespace {

double norm_of(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

std::vector<FormalStatement> make_statements(int n) {
  std::vector<FormalStatement> out;
  for (int i = 0; i < n; ++i)
    out.push_back({"stmt_" + std::to_string(i),
                   "theorem stmt_" + std::to_string(i) + " : 1 = 1", ""});
  return out;
}

}  // namespace

TEST_CASE("mock embedder is deterministic and unit-length") {
  MockEmbeddingProvider p(32, 7);
  auto a = p.embed_one("theorem foo : 1 = 1");
  auto b = p.embed_one("theorem foo : 1 = 1");
  auto c = p.embed_one("theorem bar : 2 = 2");
  CHECK(a == b);
  CHECK(a != c);
  CHECK(norm_of(a) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mock embedder batches preserve length and order") {
  MockEmbeddingProvider p(16, 0);
  auto vectors = p.embed({"a", "b", "a"});
  REQUIRE(vectors.size() == 3);
  CHECK(vectors[0] == vectors[2]);
  CHECK(vectors[0] != vectors[1]);
}

TEST_CASE("index stores unit vectors and answers self-similarity") {
  EmbeddingIndex index(4);
  index.insert("a", std::vector<float>{2, 0, 0, 0});
  index.insert("b", std::vector<float>{0, 3, 0, 0});
  index.insert("c", std::vector<float>{0, 0, 0, 5});

  for (size_t i = 0; i < index.size(); ++i)
    CHECK(norm_of(index.row(i)) == doctest::Approx(1.0).epsilon(1e-6));

  auto got = index.knn(std::vector<float>{4, 0, 0, 0}, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == "a");
  CHECK(got[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("orthogonal vectors score zero") {
  EmbeddingIndex index(3);
  index.insert("w", std::vector<float>{1, 0, 0});
  auto got = index.knn(std::vector<float>{0, 1, 0}, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].score == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("knn rejects bad queries") {
  EmbeddingIndex index(3);
  CHECK_THROWS(index.knn(std::vector<float>{1, 0, 0}, 1));  // empty index
  index.insert("a", std::vector<float>{1, 0, 0});
  CHECK_THROWS(index.knn(std::vector<float>{1, 0}, 1));     // dim mismatch
  CHECK_THROWS(index.knn(std::vector<float>{1, 0, 0}, 0));  // k = 0
  CHECK_THROWS(index.knn(std::vector<float>{0, 0, 0}, 1));  // zero query
  CHECK_THROWS(index.insert("a", std::vector<float>{0, 1, 0}));  // duplicate id
  CHECK_THROWS(index.insert("z", std::vector<float>{0, 0, 0}));  // zero vector
}

TEST_CASE("find maps ids to rows") {
  EmbeddingIndex index(2);
  index.insert("x", std::vector<float>{1, 0});
  index.insert("y", std::vector<float>{0, 1});
  REQUIRE(index.find("y").has_value());
  CHECK(*index.find("y") == 1);
  CHECK_FALSE(index.find("nope").has_value());
}

TEST_CASE("knn agrees with the brute-force oracle, ties included") {
  // ~10% duplicated vectors under different ids force exact score ties.
  const size_t dim = 16, n = 1000, queries = 50, k = 10;
  std::mt19937_64 rng(20240517);
  auto random_vec = [&] {
    std::vector<float> v(dim);
    for (auto& x : v)
      x = static_cast<float>(static_cast<double>(rng() >> 11) /
                                 9007199254740992.0 * 2.0 - 1.0);
    return v;
  };

  std::vector<std::pair<std::string, std::vector<float>>> corpus;
  EmbeddingIndex index(dim);
  for (size_t i = 0; i < n; ++i) {
    std::vector<float> v;
    if (i >= 900)
      v = corpus[i - 900].second;  // duplicate an earlier vector
    else
      v = random_vec();
    char buf[16];
    std::snprintf(buf, sizeof buf, "id_%04zu", i);
    corpus.emplace_back(buf, v);
    index.insert(buf, v);
  }

  for (size_t qi = 0; qi < queries; ++qi) {
    auto q = random_vec();
    auto expected = oracle::knn(corpus, q, k);
    auto got = index.knn(q, k);
    REQUIRE(got.size() == expected.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].id == expected[i].id);
      CHECK(got[i].score == expected[i].score);  // bit-exact by contract
    }
  }
}

TEST_CASE("knn is scale-invariant in the query") {
  const size_t dim = 8;
  std::mt19937_64 rng(42);
  EmbeddingIndex index(dim);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v)
      x = static_cast<float>(static_cast<double>(rng() >> 11) /
                                 9007199254740992.0 * 2.0 - 1.0);
    index.insert("v" + std::to_string(i), v);
  }
  std::vector<float> q{1, -2, 3, -4, 5, -6, 7, -8};
  std::vector<float> q2;
  for (float x : q) q2.push_back(x * 0.25f);
  auto a = index.knn(q, 50);
  auto b = index.knn(q2, 50);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
}

TEST_CASE("knn with k = size gives a total order consistent with scores") {
  EmbeddingIndex index(2);
  index.insert("a", std::vector<float>{1, 0});
  index.insert("b", std::vector<float>{0.8f, 0.2f});
  index.insert("c", std::vector<float>{0, 1});
  auto all = index.knn(std::vector<float>{1, 0}, 3);
  REQUIRE(all.size() == 3);
  for (size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);
  CHECK(all[0].id == "a");
  CHECK(all[2].id == "c");
}

TEST_CASE("build_index embeds every statement and keeps names") {
  auto statements = make_statements(100);
  MockEmbeddingProvider provider(8, 1);
  auto index = build_index(statements, provider);
  CHECK(index.size() == 100);
  CHECK(index.dim() == 8);
  CHECK(index.find("stmt_42").has_value());

  // Keyed by the text embedding: row equals the provider's vector, normalized.
  auto direct = provider.embed_one(statements[42].statement_text);
  auto got = index.knn(direct, 1);
  CHECK(got[0].id == "stmt_42");
  CHECK(got[0].score == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("build_index rejects duplicate names") {
  auto statements = make_statements(3);
  statements[2].name = "stmt_1";
  MockEmbeddingProvider provider(8, 1);
  CHECK_THROWS_WITH_AS(build_index(statements, provider),
                       doctest::Contains("stmt_1"), ConfigError);
}

TEST_CASE("build_index honors include_name") {
  auto statements = make_statements(5);
  MockEmbeddingProvider provider(8, 1);
  BuildIndexOptions opts;
  opts.include_name = true;
  auto with_name = build_index(statements, provider, opts);
  auto without = build_index(statements, provider);
  auto q = provider.embed_one(statements[0].statement_text);
  CHECK(without.knn(q, 1)[0].score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(with_name.knn(q, 1)[0].score != doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("build_index parallel batching matches serial") {
  auto statements = make_statements(57);
  MockEmbeddingProvider provider(8, 3);
  BuildIndexOptions serial;
  serial.batch_size = 57;
  BuildIndexOptions parallel;
  parallel.batch_size = 8;
  parallel.in_flight = 4;
  auto a = build_index(statements, provider, serial);
  auto b = build_index(statements, provider, parallel);
  REQUIRE(a.size() == b.size());
  CHECK(a.ids() == b.ids());
  for (size_t i = 0; i < a.size(); ++i) {
    auto ra = a.row(i), rb = b.row(i);
    for (size_t j = 0; j < a.dim(); ++j) CHECK(ra[j] == rb[j]);
  }
}

TEST_CASE("index file round-trip is bit-identical") {
  testutil::TempDir dir;
  auto statements = make_statements(100);
  MockEmbeddingProvider provider(16, 9);
  auto index = build_index(statements, provider);
  auto path = dir.file("kb.afix");
  index.save(path);
  auto loaded = EmbeddingIndex::load(path);
  REQUIRE(loaded.size() == index.size());
  CHECK(loaded.dim() == index.dim());
  CHECK(loaded.ids() == index.ids());
  for (size_t i = 0; i < index.size(); ++i) {
    auto a = index.row(i), b = loaded.row(i);
    for (size_t j = 0; j < index.dim(); ++j) CHECK(a[j] == b[j]);
  }
  CHECK(loaded.find("stmt_7").has_value());
}

TEST_CASE("index load rejects corrupted magic") {
  testutil::TempDir dir;
  EmbeddingIndex index(2);
  index.insert("a", std::vector<float>{1, 0});
  auto path = dir.file("idx.afix");
  index.save(path);
  auto bytes = testutil::read_text(path);
  bytes[0] = 'Z';
  testutil::write_text(path, bytes);
  CHECK_THROWS_WITH_AS(EmbeddingIndex::load(path), doctest::Contains("magic"),
                       ParseError);
}

TEST_CASE("index load names expected vs found on truncation") {
  testutil::TempDir dir;
  EmbeddingIndex index(2);
  index.insert("a", std::vector<float>{1, 0});
  index.insert("b", std::vector<float>{0, 1});
  index.insert("c", std::vector<float>{1, 1});
  auto path = dir.file("idx.afix");
  index.save(path);
  auto bytes = testutil::read_text(path);
  // Cut inside the third record, past the second.
  testutil::write_text(path, bytes.substr(0, bytes.size() - 14));
  CHECK_THROWS_WITH_AS(EmbeddingIndex::load(path),
                       doctest::Contains("expected 3 records, found 2"), ParseError);
}

TEST_CASE("index load detects payload corruption via checksum") {
  testutil::TempDir dir;
  EmbeddingIndex index(2);
  index.insert("ab", std::vector<float>{1, 0});
  auto path = dir.file("idx.afix");
  index.save(path);
  auto bytes = testutil::read_text(path);
  // Flip one payload byte inside the id string.
  size_t id_pos = bytes.find("ab");
  REQUIRE(id_pos != std::string::npos);
  bytes[id_pos] = 'x';
  testutil::write_text(path, bytes);
  CHECK_THROWS_WITH_AS(EmbeddingIndex::load(path), doctest::Contains("checksum"),
                       ParseError);
}

TEST_CASE("index load rejects trailing bytes") {
  testutil::TempDir dir;
  EmbeddingIndex index(2);
  index.insert("a", std::vector<float>{1, 0});
  auto path = dir.file("idx.afix");
  index.save(path);
  auto bytes = testutil::read_text(path);
  testutil::write_text(path, bytes + "junk");
  CHECK_THROWS_WITH_AS(EmbeddingIndex::load(path), doctest::Contains("trailing"),
                       ParseError);
}
