#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "esgclf/embedding.hpp"
#include "test_util.hpp"

using namespace esgclf;

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 2, 2}, Vector{1, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(Vector{1, 2}, Vector{2, 1}), 0.8, 1e-15);
  EXPECT_NEAR(cosine_distance(Vector{1, 2}, Vector{2, 1}), 0.2, 1e-15);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine_similarity(Vector{1, 2}, Vector{1, 2, 3}), InputError);
  EXPECT_THROW(cosine_similarity(Vector{0, 0}, Vector{1, 2}), InputError);
}

TEST(Cosine, SymmetryBoundsAndScaleInvariance) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 200; ++t) {
    Vector a(7), b(7);
    for (auto& x : a) x = nd(gen);
    for (auto& x : b) x = nd(gen);
    const double s = cosine_similarity(a, b);
    EXPECT_EQ(s, cosine_similarity(b, a));
    EXPECT_LE(std::abs(s), 1.0 + 1e-12);
    Vector la = a;
    const double lambda = std::exp(nd(gen) * 3);
    for (auto& x : la) x *= lambda;
    EXPECT_NEAR(cosine_similarity(la, b), s, 1e-9);
  }
}

namespace {

EmbeddingStore small_article_store() {
  EmbeddingStore s(4, StoreKind::article);
  s.add("a", Vector{0.1, -2.5, 1e-300, 3.0});
  s.add("b", Vector{1.0 / 3.0, 2.0 / 7.0, -0.0, 12345.678901234567});
  s.add("c", Vector{std::nextafter(1.0, 2.0), -1e10, 5e-324, 0.7});
  return s;
}

}  // namespace

TEST(Store, RoundTripIsBitExact) {
  const auto s = small_article_store();
  std::stringstream buf;
  save_store(s, buf);
  const auto loaded = parse_store(buf);
  EXPECT_EQ(loaded, s);
  EXPECT_EQ(loaded.ids(), (std::vector<std::string>{"a", "b", "c"}));
  for (const auto& id : s.ids()) {
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(loaded.vector(id)[i]), std::bit_cast<std::uint64_t>(s.vector(id)[i]));
    }
  }
}

TEST(Store, FileRoundTripAndTokenKind) {
  testutil::TempDir dir;
  save_store(small_article_store(), dir / "a.jsonl");
  EXPECT_EQ(load_store(dir / "a.jsonl"), small_article_store());

  EmbeddingStore tok(3, StoreKind::token);
  tok.add("x", toy_embed_tokens("alpha beta gamma", 3, 1, 5));
  tok.add("y", toy_embed_tokens("delta", 3, 1, 5));
  save_store(tok, dir / "t.jsonl");
  const auto back = load_store(dir / "t.jsonl");
  EXPECT_EQ(back, tok);
  EXPECT_EQ(back.tokens("x").length, 3u);
  EXPECT_EQ(back.kind(), StoreKind::token);
}

TEST(Store, DimensionErrorNamesTheId) {
  std::istringstream in("{\"dim\": 4, \"kind\": \"article\", \"count\": 2}\n"
                        "{\"id\": \"ok\", \"vector\": [1, 2, 3, 4]}\n"
                        "{\"id\": \"too-long\", \"vector\": [1, 2, 3, 4, 5]}\n");
  try {
    parse_store(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("too-long"), std::string::npos);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Store, RejectsDuplicatesNonFiniteAndBadHeaders) {
  EmbeddingStore s(2, StoreKind::label);
  s.add("x", Vector{1, 0});
  EXPECT_THROW(s.add("x", Vector{0, 1}), InputError);
  EXPECT_THROW(s.add("y", Vector{NAN, 1}), InputError);
  EXPECT_THROW(s.add("z", toy_embed_tokens("a b", 2, 1)), InputError);

  std::istringstream dup("{\"dim\": 2, \"kind\": \"label\", \"count\": 2}\n"
                         "{\"id\": \"x\", \"vector\": [1, 0]}\n{\"id\": \"x\", \"vector\": [0, 1]}\n");
  EXPECT_THROW(parse_store(dup), ParseError);
  std::istringstream count("{\"dim\": 2, \"kind\": \"label\", \"count\": 3}\n{\"id\": \"x\", \"vector\": [1, 0]}\n");
  EXPECT_THROW(parse_store(count), ParseError);
  std::istringstream kind("{\"dim\": 2, \"kind\": \"sentence\", \"count\": 0}\n");
  EXPECT_THROW(parse_store(kind), ParseError);
  std::istringstream nonfinite("{\"dim\": 2, \"kind\": \"label\", \"count\": 1}\n{\"id\": \"x\", \"vector\": [1e999, 0]}\n");
  EXPECT_THROW(parse_store(nonfinite), InputError);
}

TEST(Store, ThirtyFiveLabelVectors) {
  EmbeddingStore s(16, StoreKind::label);
  for (int i = 0; i < 35; ++i) s.add("issue-" + std::to_string(i), toy_embed("definition " + std::to_string(i), 16, 3));
  std::stringstream buf;
  save_store(s, buf);
  const auto back = parse_store(buf);
  EXPECT_EQ(back.size(), 35u);
  EXPECT_EQ(back.kind(), StoreKind::label);
}

TEST(ToyEmbed, DeterministicUnitNorm) {
  const auto a = toy_embed("Carbon emissions rose", 32, 9);
  EXPECT_EQ(a, toy_embed("Carbon emissions rose", 32, 9));
  EXPECT_NEAR(norm(a), 1.0, 1e-9);
  EXPECT_NE(a, toy_embed("Carbon emissions rose", 32, 10));
}

TEST(ToyEmbed, RepeatedTokenKeepsDirection) {
  EXPECT_EQ(toy_embed("carbon carbon", 64, 7), toy_embed("carbon", 64, 7));
  EXPECT_EQ(toy_embed("Carbon", 64, 7), toy_embed("carbon", 64, 7));
}

TEST(ToyEmbed, DisjointTextsAreNearlyOrthogonal) {
  const auto a = toy_embed("carbon emissions rose sharply across the steel sector this year", 64, 7);
  const auto b = toy_embed("board members approved an executive pay package despite investor protest", 64, 7);
  EXPECT_LT(std::abs(cosine_similarity(a, b)), 0.5);
}

TEST(ToyEmbed, TokenMatrixPaddingAndTruncation) {
  const auto m = toy_embed_tokens("one two three", 8, 1, 5);
  EXPECT_EQ(m.length, 3u);
  ASSERT_EQ(m.rows.size(), 5u);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_NEAR(norm(m.rows[r]), 1.0, 1e-12);
  EXPECT_EQ(norm(m.rows[3]), 0.0);
  EXPECT_EQ(m.rows[1], toy_token_vector("two", 8, 1));

  const auto t = toy_embed_tokens("a b c d e f g", 8, 1, 4);
  EXPECT_EQ(t.length, 4u);
  EXPECT_THROW(toy_embed_tokens("   ", 8, 1), InputError);
  EXPECT_THROW(toy_embed("", 8, 1), InputError);
  EXPECT_THROW(toy_embed("x", 1, 1), InputError);
}
