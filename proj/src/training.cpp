#include "pet/training.hpp"

#include <algorithm>
#include <cmath>

#include "pet/rng.hpp"

namespace pet {

void TrainConfig::validate() const {
  if (learning_rate <= 0) throw Error("learning_rate must be positive");
  if (steps <= 0) throw Error("steps must be positive");
  if (batch_size <= 0) throw Error("batch_size must be positive");
  if (models_per_pvp <= 0) throw Error("models_per_pvp must be positive");
}

std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw Error("softmax of an empty score vector");
  const double max_score = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - max_score);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> label_distribution(MaskedLMBackend& backend,
                                       const PatternVerbalizerPair& pvp,
                                       const InputExample& example) {
  const std::string cloze = apply_pattern(pvp.pattern, example);
  const auto scores = backend.score_mask(cloze, pvp.verbalizer.verbalizations);
  return softmax(scores);
}

namespace {

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

int predict_label(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                  const InputExample& example) {
  return argmax(label_distribution(backend, pvp, example));
}

std::vector<int> predict_labels(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                                const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict_label(backend, pvp, ex));
  return out;
}

double train_accuracy(MaskedLMBackend& backend, const PatternVerbalizerPair& pvp,
                      const Dataset& labeled) {
  return evaluate_accuracy(predict_labels(backend, pvp, labeled), gold_labels(labeled));
}

PvpModel finetune_pvp(std::unique_ptr<MaskedLMBackend> backend,
                      const PatternVerbalizerPair& pvp, const Dataset& train,
                      const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw Error("finetune_pvp: empty training set");
  for (const auto& ex : train) {
    if (!ex.label) throw Error("finetune_pvp: example " + ex.example_id + " is unlabeled");
  }

  PvpModel model;
  model.pvp_id = pvp.pvp_id;
  model.model_id = pvp.pvp_id;
  model.seed = config.seed;
  model.pvp = pvp;
  model.pre_train_accuracy = train_accuracy(*backend, pvp, train);

  // Pre-rendered clozes; batching cycles the set with a reshuffle per pass.
  std::vector<MaskedLmExample> rendered;
  rendered.reserve(train.size());
  for (const auto& ex : train) {
    rendered.push_back({apply_pattern(pvp.pattern, ex), verbalize(pvp.verbalizer, *ex.label)});
  }

  Rng rng(mix_seed(config.seed, "batch-order"));
  std::vector<std::size_t> order(rendered.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  for (int step = 0; step < config.steps; ++step) {
    std::vector<MaskedLmExample> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(rendered[order[cursor++]]);
    }
    try {
      backend->train_step(batch, config.learning_rate);
    } catch (const std::exception& e) {
      throw Error("finetune_pvp: training failed at step " + std::to_string(step) + ": " +
                  e.what());
    }
  }

  model.post_train_accuracy = train_accuracy(*backend, pvp, train);
  model.steps_used = config.steps;
  model.backend = std::move(backend);
  return model;
}

double evaluate_accuracy(const std::vector<int>& predictions, const std::vector<int>& gold) {
  if (gold.empty()) throw Error("evaluate: empty dataset");
  if (predictions.size() != gold.size()) throw Error("evaluate: size mismatch");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predictions[i] == gold[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold,
                int num_labels) {
  if (gold.empty()) throw Error("evaluate: empty dataset");
  if (predictions.size() != gold.size()) throw Error("evaluate: size mismatch");
  if (num_labels <= 0) throw Error("evaluate: num_labels must be positive");

  std::vector<long> tp(static_cast<std::size_t>(num_labels), 0);
  std::vector<long> fp(static_cast<std::size_t>(num_labels), 0);
  std::vector<long> fn(static_cast<std::size_t>(num_labels), 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = static_cast<std::size_t>(predictions[i]);
    const auto g = static_cast<std::size_t>(gold[i]);
    if (p >= static_cast<std::size_t>(num_labels) || g >= static_cast<std::size_t>(num_labels)) {
      throw Error("evaluate: label index out of range");
    }
    if (p == g) {
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }

  double sum = 0;
  for (int c = 0; c < num_labels; ++c) {
    const auto i = static_cast<std::size_t>(c);
    const double denom = 2.0 * tp[i] + fp[i] + fn[i];
    sum += denom == 0 ? 0.0 : 2.0 * tp[i] / denom;
  }
  return sum / static_cast<double>(num_labels);
}

double evaluate(const std::vector<int>& predictions, const std::vector<int>& gold,
                Metric metric, int num_labels) {
  return metric == Metric::Accuracy ? evaluate_accuracy(predictions, gold)
                                    : macro_f1(predictions, gold, num_labels);
}

}  // namespace pet
