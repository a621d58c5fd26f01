#include "doctest.h"

#include "pet/monitor.hpp"
#include "pet/rng.hpp"

using namespace pet;

TEST_CASE("underfit check is a strict 50% boundary") {
  CHECK(check_underfit(0.49));
  CHECK_FALSE(check_underfit(0.50));
  CHECK_FALSE(check_underfit(1.0));
  CHECK(check_underfit(0.0));
}

TEST_CASE("constant-prediction check") {
  CHECK(check_constant({0, 0, 0, 0}));
  CHECK_FALSE(check_constant({0, 1, 0}));
  CHECK(check_constant({2}));       // degenerate single-example case
  CHECK_FALSE(check_constant({}));  // disabled check
}

namespace {

struct FakeModel {
  std::uint64_t seed = 0;
  int steps = 0;
};

// A callable that underfits until `good_attempt` distinct (seed, steps)
// invocations have happened.
struct FlakyTrainer {
  int good_attempt;
  mutable int calls = 0;

  TrainAttempt<FakeModel> operator()(std::uint64_t seed, int steps) const {
    ++calls;
    TrainAttempt<FakeModel> attempt;
    attempt.model = {seed, steps};
    if (calls >= good_attempt) {
      attempt.train_accuracy = 1.0;
      attempt.train_predictions = {0, 1, 0, 1};
      attempt.unlabeled_predictions = {0, 1, 1, 0};
    } else {
      attempt.train_accuracy = 0.25;
      attempt.train_predictions = {0, 0, 0, 0};
      attempt.unlabeled_predictions = {0, 0, 0, 0};
    }
    return attempt;
  }
};

}  // namespace

TEST_CASE("a healthy callable passes through with one attempt and the base seed") {
  FlakyTrainer trainer{1};
  const std::vector<int> gold = {0, 1, 0, 1};
  auto result = run_with_monitoring(trainer, 77, 100, MonitorPolicy{}, gold);
  CHECK(result.healthy);
  CHECK(result.history.size() == 1);
  CHECK(result.history[0].attempt == 1);
  CHECK(result.seed_used == 77);
  CHECK(result.steps_used == 100);
  CHECK(result.model.seed == 77);
}

TEST_CASE("an underfit first attempt restarts with a fresh seed") {
  FlakyTrainer trainer{2};
  const std::vector<int> gold = {0, 1, 0, 1};
  auto result = run_with_monitoring(trainer, 77, 100, MonitorPolicy{}, gold);
  CHECK(result.healthy);
  REQUIRE(result.history.size() == 2);
  CHECK(result.history[0].underfit);
  CHECK(result.history[0].constant_train);
  CHECK_FALSE(result.history[1].underfit);
  CHECK(result.history[1].seed != result.history[0].seed);
  CHECK(result.steps_used == 100);  // no escalation needed
}

TEST_CASE("escalation doubles steps after the restart budget") {
  FlakyTrainer trainer{5};  // 1 original + 3 restarts all fail, escalation succeeds
  const std::vector<int> gold = {0, 1, 0, 1};
  auto result = run_with_monitoring(trainer, 3, 100, MonitorPolicy{}, gold);
  CHECK(result.healthy);
  REQUIRE(result.history.size() == 5);
  CHECK(result.history[3].steps == 100);
  CHECK(result.history[4].steps == 200);
  CHECK(result.steps_used == 200);
}

TEST_CASE("final classifiers may double twice") {
  FlakyTrainer trainer{6};
  const std::vector<int> gold = {0, 1, 0, 1};
  MonitorPolicy policy;
  policy.step_doublings = 2;
  auto result = run_with_monitoring(trainer, 3, 1000, policy, gold);
  CHECK(result.healthy);
  REQUIRE(result.history.size() == 6);
  CHECK(result.history[4].steps == 2000);
  CHECK(result.history[5].steps == 4000);
}

TEST_CASE("a permanently failing job returns its best attempt flagged unhealthy") {
  FlakyTrainer trainer{100};
  const std::vector<int> gold = {0, 1, 0, 1};
  auto result = run_with_monitoring(trainer, 3, 100, MonitorPolicy{}, gold);
  CHECK_FALSE(result.healthy);
  CHECK(result.history.size() == 5);  // 1 + 3 restarts + 1 doubling
  // Escalation never decreases the step count.
  int last = 0;
  for (const auto& v : result.history) {
    CHECK(v.steps >= last);
    last = v.steps;
  }
}

TEST_CASE("restarts always change the seed") {
  FlakyTrainer trainer{100};
  const std::vector<int> gold = {0, 1, 0, 1};
  auto result = run_with_monitoring(trainer, 42, 100, MonitorPolicy{}, gold);
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    for (std::size_t j = i + 1; j < result.history.size(); ++j) {
      CHECK(result.history[i].seed != result.history[j].seed);
    }
  }
}

TEST_CASE("constant unlabeled predictions are tolerated on a degenerate train set") {
  // 49 of 50 examples share one label, the train set is fit perfectly, and
  // the model predicts one class everywhere: tolerated, not restarted.
  std::vector<int> gold(50, 1);
  gold[7] = 0;

  auto trainer = [&](std::uint64_t seed, int steps) {
    TrainAttempt<FakeModel> attempt;
    attempt.model = {seed, steps};
    attempt.train_accuracy = 1.0;
    attempt.train_predictions = gold;
    attempt.unlabeled_predictions.assign(40, 1);
    return attempt;
  };
  auto result = run_with_monitoring(trainer, 9, 100, MonitorPolicy{}, gold);
  CHECK(result.healthy);
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].constant_unlabeled);
  CHECK(result.history[0].sri_exempted);

  // Without the degenerate train set, the same outcome restarts.
  std::vector<int> balanced = gold;
  for (int i = 0; i < 25; ++i) balanced[static_cast<std::size_t>(i)] = 0;
  auto trainer2 = [&](std::uint64_t seed, int steps) {
    TrainAttempt<FakeModel> attempt;
    attempt.model = {seed, steps};
    attempt.train_accuracy = 1.0;
    attempt.train_predictions = balanced;
    attempt.unlabeled_predictions.assign(40, 1);
    return attempt;
  };
  auto result2 = run_with_monitoring(trainer2, 9, 100, MonitorPolicy{}, balanced);
  CHECK_FALSE(result2.healthy);
  CHECK(result2.history.size() > 1);
}

TEST_CASE("dominant label fraction") {
  CHECK(dominant_label_fraction({1, 1, 1, 0}) == doctest::Approx(0.75));
  CHECK(dominant_label_fraction({0, 1}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(dominant_label_fraction({}), Error);
}
