#include "doctest.h"

#include <cmath>

#include "pet/mock_backend.hpp"
#include "pet/rng.hpp"
#include "pet/training.hpp"
#include "support/fixtures.hpp"

using namespace pet;

TEST_CASE("label_distribution matches the hand-evaluated normalized exponential") {
  // Two-way softmax of raw scores (2.0, 0.0).
  const auto p = softmax({2.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.8808).epsilon(1e-3));
  CHECK(p[1] == doctest::Approx(0.1192).epsilon(1e-3));

  // Equal raw scores split evenly.
  const auto even = softmax({1.5, 1.5});
  CHECK(even[0] == doctest::Approx(0.5));
  CHECK(even[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax normalizes, is shift invariant and preserves the argmax") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(2, 8);
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) scores.push_back(rng.next_double() * 20.0 - 10.0);

    const auto p = softmax(scores);
    double total = 0;
    std::size_t argmax_p = 0, argmax_s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] >= 0.0);
      total += p[i];
      if (p[i] > p[argmax_p]) argmax_p = i;
      if (scores[i] > scores[argmax_s]) argmax_s = i;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    CHECK(argmax_p == argmax_s);

    const double shift = rng.next_double() * 50.0 - 25.0;
    auto shifted = scores;
    for (auto& s : shifted) s += shift;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(p[i] - q[i]) < 1e-9);
    }
  }
}

TEST_CASE("label_distribution runs the cloze through the backend") {
  MockMaskedLM backend(fixtures::sentiment_lm_config(), 0);
  const auto pack = fixtures::sentiment_pack();
  InputExample ex;
  ex.example_id = "e";
  ex.text_a = "I really enjoyed this movie.";
  const auto p = label_distribution(backend, pack.pvps[1], ex);
  REQUIRE(p.size() == 2);
  // "enjoyed" carries weight 2 toward "good": exp(2)/(exp(2)+1).
  CHECK(p[1] == doctest::Approx(0.8808).epsilon(1e-3));
  CHECK(predict_label(backend, pack.pvps[1], ex) == 1);
}

TEST_CASE("finetune_pvp fits a keyword-separable set and is deterministic") {
  const auto pack = fixtures::sentiment_pack();
  const auto train = fixtures::sentiment_dataset(10, 7);

  MockLMConfig blank;
  blank.vocab = default_mock_vocab();
  TrainConfig config;
  config.seed = 3;

  auto run = [&] {
    return finetune_pvp(std::make_unique<MockMaskedLM>(blank, config.seed), pack.pvps[1],
                        train, config);
  };
  const auto model = run();
  CHECK(model.post_train_accuracy == doctest::Approx(1.0));
  CHECK(model.steps_used == 100);

  const auto again = run();
  CHECK(again.pre_train_accuracy == model.pre_train_accuracy);
  CHECK(again.post_train_accuracy == model.post_train_accuracy);
  CHECK(again.backend->snapshot() == model.backend->snapshot());
}

TEST_CASE("finetune_pvp validates its config and inputs") {
  const auto pack = fixtures::sentiment_pack();
  const auto train = fixtures::sentiment_dataset(4, 1);
  MockLMConfig blank;
  blank.vocab = default_mock_vocab();

  TrainConfig config;
  config.steps = 0;
  CHECK_THROWS_AS(finetune_pvp(std::make_unique<MockMaskedLM>(blank, 0), pack.pvps[0], train,
                               config),
                  Error);

  config = TrainConfig{};
  auto unlabeled = train;
  unlabeled[2].label.reset();
  CHECK_THROWS_AS(finetune_pvp(std::make_unique<MockMaskedLM>(blank, 0), pack.pvps[0],
                               unlabeled, config),
                  Error);
}

TEST_CASE("zero-shot accuracy reflects the prior table") {
  const auto pack = fixtures::sentiment_pack();
  const auto train = fixtures::sentiment_dataset(10, 7);
  TrainConfig config;
  config.steps = 1;  // pre-accuracy is what matters here
  const auto model = finetune_pvp(
      std::make_unique<MockMaskedLM>(fixtures::sentiment_lm_config(), 0), pack.pvps[1], train,
      config);
  CHECK(model.pre_train_accuracy == doctest::Approx(1.0));
}

TEST_CASE("accuracy and macro-F1 match hand-computed values") {
  CHECK(evaluate_accuracy({1, 0, 1}, {1, 0, 1}) == doctest::Approx(1.0));
  CHECK(macro_f1({1, 0, 1, 0}, {1, 0, 1, 0}, 2) == doctest::Approx(1.0));

  // Confusion {TP=1, FN=1, FP=0, TN=2} for the positive class:
  // F1_pos = 2/3, F1_neg = 4/5, macro = 0.7333.
  const std::vector<int> gold = {1, 1, 0, 0};
  const std::vector<int> pred = {1, 0, 0, 0};
  CHECK(macro_f1(pred, gold, 2) == doctest::Approx(0.733333).epsilon(1e-5));

  // A class absent from both predictions and gold contributes zero.
  CHECK(macro_f1({0, 1}, {0, 1}, 3) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(evaluate_accuracy({}, {}), Error);
  CHECK_THROWS_AS(macro_f1({}, {}, 2), Error);
}

TEST_CASE("accuracy is invariant under dataset permutation") {
  Rng rng(5);
  std::vector<int> gold, pred;
  for (int i = 0; i < 50; ++i) {
    gold.push_back(rng.uniform_int(0, 3));
    pred.push_back(rng.uniform_int(0, 3));
  }
  const double base = evaluate_accuracy(pred, gold);
  std::vector<std::size_t> order(gold.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(order);
    std::vector<int> g2, p2;
    for (auto i : order) {
      g2.push_back(gold[i]);
      p2.push_back(pred[i]);
    }
    CHECK(evaluate_accuracy(p2, g2) == doctest::Approx(base));
  }
}

TEST_CASE("evaluate dispatches on the metric") {
  const std::vector<int> gold = {1, 1, 0, 0};
  const std::vector<int> pred = {1, 0, 0, 0};
  CHECK(evaluate(pred, gold, Metric::Accuracy, 2) == doctest::Approx(0.75));
  CHECK(evaluate(pred, gold, Metric::MacroF1, 2) == doctest::Approx(0.733333).epsilon(1e-5));
}
