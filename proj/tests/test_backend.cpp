#include "doctest.h"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "pet/mock_backend.hpp"
#include "pet/rng.hpp"
#include "support/fixtures.hpp"

using namespace pet;

namespace {

// Independent recomputation of the mock's scoring rule, working directly
// off the keyword table: scan the cloze for each keyword and check word
// boundaries, instead of tokenizing.
double brute_force_score(const KeywordTable& table, const std::string& cloze,
                         const std::string& candidate) {
  auto row = table.find(candidate);
  if (row == table.end()) return 0.0;
  auto is_word_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
  };
  double score = 0;
  for (const auto& [keyword, weight] : row->second) {
    bool present = false;
    std::size_t pos = 0;
    while ((pos = cloze.find(keyword, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(cloze[pos - 1]);
      const std::size_t end = pos + keyword.size();
      const bool right_ok = end == cloze.size() || !is_word_char(cloze[end]);
      if (left_ok && right_ok) {
        present = true;
        break;
      }
      ++pos;
    }
    if (present) score += weight;
  }
  return score;
}

MockLMConfig enjoyed_config() {
  MockLMConfig config;
  config.vocab = default_mock_vocab();
  config.prior["good"]["enjoyed"] = 2.0;
  return config;
}

}  // namespace

TEST_CASE("mock scores are the keyword-table sums") {
  MockMaskedLM backend(enjoyed_config(), 0);
  const auto scores =
      backend.score_mask("I really enjoyed this movie. It was [MASK].", {"good", "bad"});
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] - scores[1] == doctest::Approx(2.0));

  // No keyword overlap: all candidates score alike.
  const auto flat = backend.score_mask("the market fell [MASK]", {"good", "bad"});
  CHECK(flat[0] == flat[1]);

  // Permuting candidates permutes scores identically.
  const auto forward = backend.score_mask("I enjoyed it [MASK]", {"good", "bad"});
  const auto reversed = backend.score_mask("I enjoyed it [MASK]", {"bad", "good"});
  CHECK(forward[0] == reversed[1]);
  CHECK(forward[1] == reversed[0]);
}

TEST_CASE("mock rejects malformed clozes and unknown candidates") {
  MockMaskedLM backend(enjoyed_config(), 0);
  CHECK_THROWS_AS(backend.score_mask("no mask here", {"good"}), Error);
  CHECK_THROWS_AS(backend.score_mask("[MASK] two [MASK]", {"good"}), Error);
  CHECK_THROWS_AS(backend.score_mask("one [MASK]", {"definitely-not-in-vocab"}), Error);
}

TEST_CASE("mock scoring equals a brute-force recomputation on random clozes") {
  auto config = fixtures::topic_lm_config();
  MockMaskedLM backend(config, 1);
  const auto& words = config.vocab.non_special();
  const std::vector<std::string> candidates = {"World", "Sports", "Business", "Tech"};

  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::string cloze;
    const int length = rng.uniform_int(3, 12);
    for (int i = 0; i < length; ++i) {
      if (i) cloze += " ";
      cloze += words[rng.next_below(words.size())];
    }
    cloze += " [MASK]";
    const auto scores = backend.score_mask(cloze, candidates);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      CHECK(scores[c] ==
            doctest::Approx(brute_force_score(backend.table(), cloze, candidates[c]))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("snapshot then train then restore is bit-identical") {
  MockMaskedLM backend(fixtures::sentiment_lm_config(), 5);
  const std::string cloze = "I enjoyed the food [MASK]";
  const auto before = backend.score_mask(cloze, {"good", "bad"});
  const auto saved = backend.snapshot();

  std::vector<MaskedLmExample> batch = {{"I loved the place [MASK]", "good"},
                                        {"the service was awful [MASK]", "bad"}};
  backend.train_step(batch, 1e-5);
  const auto during = backend.score_mask(cloze, {"good", "bad"});
  CHECK(during != before);

  backend.restore(saved);
  const auto after = backend.score_mask(cloze, {"good", "bad"});
  CHECK(after == before);  // exact, not approximate
  CHECK(backend.snapshot() == saved);
}

TEST_CASE("training moves mass toward the target token") {
  MockLMConfig config;
  config.vocab = default_mock_vocab();
  MockMaskedLM backend(config, 0);
  const std::string cloze = "the match was great [MASK]";
  double previous_loss = 1e9;
  for (int step = 0; step < 30; ++step) {
    const double loss = backend.train_step({{cloze, "good"}}, 1e-5);
    if (step > 0) CHECK(loss <= previous_loss + 1e-9);
    previous_loss = loss;
  }
  const auto scores = backend.score_mask(cloze, {"good", "bad"});
  CHECK(scores[0] > scores[1]);
}

TEST_CASE("rigged underfit seeds leave the table untouched") {
  MockLMConfig config;
  config.vocab = default_mock_vocab();
  config.underfit_seeds = {13};
  MockMaskedLM backend(config, 13);
  const auto before = backend.snapshot();
  backend.train_step({{"great stuff [MASK]", "good"}}, 1e-5);
  CHECK(backend.snapshot() == before);
}

TEST_CASE("mock classifier outputs normalized probabilities and learns") {
  MockClassifierConfig config;
  config.num_labels = 3;
  MockClassifier classifier(config, 0);

  const auto p = classifier.predict_proba("any text at all");
  REQUIRE(p.size() == 3);
  double total = 0;
  for (double v : p) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(std::abs(total - 1.0) < 1e-6);

  for (int step = 0; step < 50; ++step) {
    classifier.train_step({{"stocks market profit", {0.0, 0.0, 1.0}},
                           {"team season coach", {0.0, 1.0, 0.0}},
                           {"election government war", {1.0, 0.0, 0.0}}},
                          1e-5);
  }
  CHECK(classifier.predict_proba("stocks profit everywhere")[2] > 0.9);
  CHECK(classifier.predict_proba("the team and the coach")[1] > 0.9);
}

TEST_CASE("classifier snapshot restore is exact") {
  MockClassifierConfig config;
  config.num_labels = 2;
  MockClassifier classifier(config, 0);
  classifier.train_step({{"great great great", {0.0, 1.0}}}, 1e-5);
  const auto saved = classifier.snapshot();
  const auto before = classifier.predict_proba("great story");
  classifier.train_step({{"awful awful", {1.0, 0.0}}}, 1e-5);
  classifier.restore(saved);
  CHECK(classifier.predict_proba("great story") == before);
}

TEST_CASE("generative mock honors top-p, budget and seeds") {
  MockGenerativeConfig single;
  single.token_weights = {{"only", 1.0}};
  MockGenerative one(single);
  const auto tokens = one.sample_continuation("prompt", 1.0, 4, 7);
  REQUIRE(tokens.size() == 4);
  for (const auto& t : tokens) CHECK(t == "only");

  MockGenerativeConfig config;
  config.token_weights = {{"alpha", 5.0}, {"beta", 3.0}, {"gamma", 1.0}, {"\n\n", 1.0}};
  MockGenerative backend(config);

  CHECK(backend.sample_continuation("p", 0.9, 1, 3).size() == 1);

  const auto a = backend.sample_continuation("p", 0.9, 32, 11);
  const auto b = backend.sample_continuation("p", 0.9, 32, 11);
  CHECK(a == b);
  const auto c = backend.sample_continuation("p", 0.9, 32, 12);
  CHECK(a != c);

  // A tight nucleus keeps only the heaviest token.
  const auto greedy = backend.sample_continuation("p", 0.5, 8, 3);
  for (const auto& t : greedy) CHECK(t == "alpha");

  CHECK_THROWS_AS(backend.sample_continuation("p", 0.0, 4, 1), Error);
  CHECK_THROWS_AS(backend.sample_continuation("p", 0.9, 0, 1), Error);
}

TEST_CASE("scripted continuations are returned verbatim") {
  MockGenerativeConfig config;
  config.token_weights = {{"filler", 1.0}};
  config.scripted["the exact prompt"] = {"great", "food!", "\n\n", "Example", "4:"};
  MockGenerative backend(config);
  const auto tokens = backend.sample_continuation("the exact prompt", 0.9, 128, 0);
  CHECK(tokens == std::vector<std::string>{"great", "food!", "\n\n", "Example", "4:"});
  // The budget truncates scripts too.
  CHECK(backend.sample_continuation("the exact prompt", 0.9, 2, 0).size() == 2);
}

TEST_CASE("snapshot files carry their manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "pet_snapshot_test";
  MockMaskedLM backend(enjoyed_config(), 3);
  write_snapshot_file(dir, "model_a", backend.name(), 3, 100, backend.snapshot());
  const auto loaded = read_snapshot_file(dir / "model_a.snapshot.json");
  CHECK(loaded.backend_name == "mock-mlm");
  CHECK(loaded.seed == 3);
  CHECK(loaded.step_count == 100);

  MockMaskedLM other(enjoyed_config(), 9);
  other.restore(loaded.params);
  CHECK(other.snapshot() == backend.snapshot());
  std::filesystem::remove_all(dir);
}
