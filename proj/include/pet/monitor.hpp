#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pet/data.hpp"
#include "pet/rng.hpp"

namespace pet {

// One monitored training attempt. constant_unlabeled may be recorded but
// tolerated (sri_exempted) when the train set is near-degenerate and fit
// perfectly.
struct MonitorVerdict {
  bool underfit = false;
  bool constant_train = false;
  bool constant_unlabeled = false;
  bool sri_exempted = false;
  int attempt = 1;
  std::uint64_t seed = 0;
  int steps = 0;

  bool triggered() const {
    return underfit || constant_train || (constant_unlabeled && !sri_exempted);
  }
};

struct MonitorPolicy {
  int max_restarts = 3;    // fresh-seed retries at base steps before escalating
  int step_doublings = 1;  // 2 for final classifiers
  // Constant predictions on unlabeled data are tolerated when train accuracy
  // is 1.0 and at least this fraction of the train set shares one label.
  double degenerate_train_fraction = 0.95;
};

// True iff train accuracy is strictly below 50%.
bool check_underfit(double train_accuracy);

// True iff the argmax prediction is identical for every example.
bool check_constant(const std::vector<int>& predictions);

// Largest single-label fraction of the gold train labels.
double dominant_label_fraction(const std::vector<int>& gold);

template <typename ModelT>
struct TrainAttempt {
  ModelT model;
  double train_accuracy = 0.0;
  std::vector<int> train_predictions;
  std::vector<int> unlabeled_predictions;  // empty disables the unlabeled check
};

template <typename ModelT>
struct Monitored {
  ModelT model;
  std::vector<MonitorVerdict> history;
  bool healthy = false;
  int steps_used = 0;
  std::uint64_t seed_used = 0;
};

// Restart/escalation wrapper around one training job. The callable runs a
// full training attempt for a given (seed, steps) pair and must be
// deterministic in them. Attempt 1 reuses base_seed so a healthy callable
// passes through unchanged; each restart reseeds everything. After
// max_restarts fresh-seed retries the step count is doubled (step_doublings
// times); if every attempt stays triggered, the best attempt by train
// accuracy is returned flagged unhealthy.
template <typename Fn>
auto run_with_monitoring(Fn&& train, std::uint64_t base_seed, int base_steps,
                         const MonitorPolicy& policy, const std::vector<int>& train_gold)
    -> Monitored<decltype(train(std::uint64_t{}, int{}).model)> {
  using ModelT = decltype(train(std::uint64_t{}, int{}).model);

  const double dominant =
      train_gold.empty() ? 0.0 : dominant_label_fraction(train_gold);

  Monitored<ModelT> best;
  double best_accuracy = -1.0;
  std::vector<MonitorVerdict> history;

  const int total_attempts = 1 + policy.max_restarts + policy.step_doublings;
  int steps = base_steps;
  for (int attempt = 1; attempt <= total_attempts; ++attempt) {
    if (attempt > 1 + policy.max_restarts) steps *= 2;
    const std::uint64_t seed =
        attempt == 1 ? base_seed : mix_seed(base_seed, "restart", static_cast<std::uint64_t>(attempt));

    TrainAttempt<ModelT> result = train(seed, steps);

    MonitorVerdict verdict;
    verdict.attempt = attempt;
    verdict.seed = seed;
    verdict.steps = steps;
    verdict.underfit = check_underfit(result.train_accuracy);
    verdict.constant_train = check_constant(result.train_predictions);
    verdict.constant_unlabeled = check_constant(result.unlabeled_predictions);
    if (verdict.constant_unlabeled && result.train_accuracy >= 1.0 &&
        dominant >= policy.degenerate_train_fraction) {
      verdict.sri_exempted = true;
    }
    history.push_back(verdict);

    if (!verdict.triggered()) {
      best.model = std::move(result.model);
      best.history = std::move(history);
      best.healthy = true;
      best.steps_used = steps;
      best.seed_used = seed;
      return best;
    }
    if (result.train_accuracy > best_accuracy) {
      best_accuracy = result.train_accuracy;
      best.model = std::move(result.model);
      best.steps_used = steps;
      best.seed_used = seed;
    }
  }
  best.history = std::move(history);
  best.healthy = false;
  return best;
}

}  // namespace pet
