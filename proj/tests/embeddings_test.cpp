#include "crossrecipe/embeddings.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <cstring>
#include <set>

#include "synthetic.hpp"

using namespace crossrecipe;

TEST(BuildVocab, MinCountBoundary) {
  Sentences corpus;
  for (int i = 0; i < 9; ++i) corpus.push_back({"rare"});
  for (int i = 0; i < 10; ++i) corpus.push_back({"common"});
  auto v = build_vocab(corpus, 10);
  EXPECT_EQ(v.size(), 1u);
  EXPECT_FALSE(v.find("rare"));
  EXPECT_TRUE(v.find("common"));
  EXPECT_EQ(build_vocab(corpus, 1).size(), 2u);
}

TEST(BuildVocab, FrequencyThenLexicographicOrder) {
  Sentences corpus = {{"b", "a", "c", "c"}, {"d", "d", "a", "b"}};
  auto v = build_vocab(corpus, 1);
  EXPECT_EQ(v.words(), (std::vector<std::string>{"a", "b", "c", "d"}));
  Sentences shuffled = {{"d", "b", "c"}, {"a", "c", "d", "a", "b"}};
  EXPECT_EQ(build_vocab(shuffled, 1).words(), v.words());
}

TEST(BuildVocab, EmptyVocabulary) {
  try {
    build_vocab({{"a"}}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyVocabulary);
  }
}

TEST(TrainSgns, EmptyCorpus) {
  try {
    train_sgns({}, SgnsConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
  EXPECT_THROW(train_sgns({{}, {}}, SgnsConfig{}), Error);
}

TEST(TrainSgns, DefaultsAreReferenceValues) {
  SgnsConfig c;
  EXPECT_EQ(c.dim, 300);
  EXPECT_EQ(c.epochs, 5);
  EXPECT_EQ(c.window, 5);
  EXPECT_EQ(c.negatives, 10);
  EXPECT_EQ(c.min_count, 10);
  EXPECT_EQ(c.subsample, 0.0);
}

namespace {

SgnsConfig small_config() {
  SgnsConfig cfg;
  cfg.dim = 32;
  cfg.epochs = 5;
  cfg.min_count = 5;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST(TrainSgns, CooccurringWordsCloser) {
  auto fixture = fixtures::cooccurrence_corpus(10000, 11);
  auto result = train_sgns(fixture.sentences, small_config());
  const auto salt = *result.space.vector("salt");
  const double sp = cosine(salt, *result.space.vector("pepper"));
  for (const auto& w : fixture.never_salt) {
    auto v = result.space.vector(w);
    ASSERT_TRUE(v) << w;
    EXPECT_GT(sp, cosine(salt, *v)) << w;
  }
  // Loss is non-increasing across epochs within 5%.
  ASSERT_EQ(result.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e)
    EXPECT_LE(result.epoch_loss[e], result.epoch_loss[e - 1] * 1.05);
  EXPECT_TRUE(result.space.vectors.allFinite());
}

TEST(TrainSgns, SameSeedBitwiseEqual) {
  auto fixture = fixtures::cooccurrence_corpus(2000, 3);
  auto a = train_sgns(fixture.sentences, small_config());
  auto b = train_sgns(fixture.sentences, small_config());
  EXPECT_EQ(a.space.vocab.words(), b.space.vocab.words());
  ASSERT_EQ(a.space.vectors.size(), b.space.vectors.size());
  EXPECT_EQ(std::memcmp(a.space.vectors.data(), b.space.vectors.data(),
                        sizeof(double) * static_cast<std::size_t>(a.space.vectors.size())),
            0);
  auto cfg = small_config();
  cfg.seed = 8;
  auto c = train_sgns(fixture.sentences, cfg);
  EXPECT_NE(a.space.vectors, c.space.vectors);
}

TEST(TrainSgns, ParallelReproduciblePerThreadCount) {
  auto fixture = fixtures::cooccurrence_corpus(2000, 5);
  auto cfg = small_config();
  cfg.threads = 3;
  auto a = train_sgns(fixture.sentences, cfg);
  auto b = train_sgns(fixture.sentences, cfg);
  EXPECT_EQ(a.space.vectors, b.space.vectors);
}

TEST(TrainSgns, SubsamplingFlag) {
  auto fixture = fixtures::cooccurrence_corpus(2000, 5);
  auto cfg = small_config();
  cfg.subsample = 1e-3;
  auto a = train_sgns(fixture.sentences, cfg);
  EXPECT_TRUE(a.space.vectors.allFinite());
  EXPECT_NE(a.space.vectors, train_sgns(fixture.sentences, small_config()).space.vectors);
}

TEST(NearestNeighbors, SelfSimilarityFirst) {
  Rng rng(1);
  auto space = fixtures::random_space(50, 8, rng);
  for (std::size_t i = 0; i < space.size(); i += 7) {
    auto nn = nearest_neighbors(space, *space.vector(space.vocab.word(i)), 3);
    ASSERT_EQ(nn.size(), 3u);
    EXPECT_EQ(nn[0].word, space.vocab.word(i));
    EXPECT_NEAR(nn[0].cosine, 1.0, 1e-12);
  }
}

TEST(NearestNeighbors, TruncatesToVocabulary) {
  Rng rng(2);
  auto space = fixtures::random_space(5, 4, rng);
  EXPECT_EQ(nearest_neighbors(space, Vector::Ones(4), 100).size(), 5u);
}

TEST(NearestNeighbors, OrthogonalQueryKeepsVocabOrder) {
  Matrix m = Matrix::Zero(4, 3);
  m(0, 0) = 1;
  m(1, 0) = -2;
  m(2, 1) = 3;
  m(3, 0) = 0.5;
  m(3, 1) = 0.5;
  EmbeddingSpace space{Vocabulary({"a", "b", "c", "d"}), m};
  Vector q = Vector::Zero(3);
  q(2) = 1;
  auto nn = nearest_neighbors(space, q, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(nn[i].index, i);
    EXPECT_EQ(nn[i].cosine, 0.0);
  }
}

TEST(NearestNeighbors, DimensionMismatch) {
  Rng rng(3);
  auto space = fixtures::random_space(5, 4, rng);
  try {
    nearest_neighbors(space, Vector::Ones(3), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(NearestNeighbors, PrefixOfBruteForceRanking) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto space = fixtures::random_space(60, 5, rng);
    // Duplicate rows create exact ties.
    space.vectors.row(10) = space.vectors.row(3);
    Vector q(5);
    for (int j = 0; j < 5; ++j) q(j) = rng.normal();
    q = space.vectors.row(3).transpose() * (trial % 2) + q * ((trial + 1) % 2);

    std::vector<std::pair<double, std::size_t>> brute;
    for (std::size_t i = 0; i < space.size(); ++i) {
      double dot = 0, nr = 0, nq = 0;
      for (int j = 0; j < 5; ++j) {
        const double r = space.vectors(static_cast<Eigen::Index>(i), j);
        dot += r * q(j);
        nr += r * r;
        nq += q(j) * q(j);
      }
      brute.emplace_back(dot / std::sqrt(nr * nq), i);
    }
    std::stable_sort(brute.begin(), brute.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
    auto nn = nearest_neighbors(space, q, 15);
    for (std::size_t i = 0; i < nn.size(); ++i) {
      EXPECT_NEAR(nn[i].cosine, brute[i].first, 1e-12);
      EXPECT_EQ(nn[i].index, brute[i].second);
    }
  }
}

TEST(Cosine, Properties) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    Vector a(6), b(6);
    for (int j = 0; j < 6; ++j) {
      a(j) = rng.normal();
      b(j) = rng.normal();
    }
    EXPECT_NEAR(cosine(a, a), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(cosine(a, b), cosine(b, a));
    EXPECT_LE(std::abs(cosine(a, b)), 1.0);
  }
}

TEST(VectorFile, RoundTripExact) {
  Rng rng(5);
  auto space = fixtures::random_space(10, 7, rng);
  auto path = std::filesystem::temp_directory_path() / "crossrecipe_vectors.txt";
  save_vectors(path, space);
  auto first_line = read_lines(path).at(0);
  EXPECT_EQ(first_line, "10 7");
  auto loaded = load_vectors(path);
  EXPECT_EQ(loaded.vocab.words(), space.vocab.words());
  EXPECT_EQ(loaded.vectors, space.vectors);
  std::filesystem::remove(path);
}

TEST(VectorFile, RejectsWrongWidth) {
  auto path = std::filesystem::temp_directory_path() / "crossrecipe_bad_vectors.txt";
  write_file(path, "2 3\na 1 2 3\nb 1 2\n");
  EXPECT_THROW(load_vectors(path), Error);
  std::filesystem::remove(path);
}
