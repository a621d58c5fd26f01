#include "pet/multilabel.hpp"

#include <algorithm>
#include <fstream>

#include "pet/rng.hpp"

namespace pet {

namespace {

std::string substitute_label_slot(const std::string& template_text, const std::string& label) {
  std::string out;
  std::size_t pos = 0;
  const std::string slot = "{label}";
  while (true) {
    const auto hit = template_text.find(slot, pos);
    if (hit == std::string::npos) {
      out += template_text.substr(pos);
      return out;
    }
    out += template_text.substr(pos, hit - pos);
    out += label;
    pos = hit + slot.size();
  }
}

}  // namespace

BinaryDataset expand_binary(const Dataset& train, std::size_t num_labels, int negatives,
                            std::uint64_t seed, std::vector<BinaryExpansion>* rows) {
  if (num_labels < 2) throw Error("expand_binary: need at least two labels");
  if (negatives < 0) throw Error("expand_binary: negatives must be non-negative");
  if (static_cast<std::size_t>(negatives) > num_labels - 1) {
    throw Error("expand_binary: cannot sample " + std::to_string(negatives) +
                " distinct wrong intents out of " + std::to_string(num_labels - 1));
  }

  Rng rng(mix_seed(seed, "binary-expansion"));
  BinaryDataset out;
  out.reserve(train.size() * static_cast<std::size_t>(1 + negatives));
  for (const auto& ex : train) {
    if (!ex.label) throw Error("expand_binary: example " + ex.example_id + " is unlabeled");
    const int gold = *ex.label;

    BinaryExample positive;
    positive.example = ex;
    positive.example.label.reset();
    positive.intent = gold;
    positive.polarity = true;
    out.push_back(positive);
    if (rows) rows->push_back({ex.example_id, gold, true});

    std::vector<int> wrong;
    wrong.reserve(num_labels - 1);
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (static_cast<int>(l) != gold) wrong.push_back(static_cast<int>(l));
    }
    rng.shuffle(wrong);
    for (int i = 0; i < negatives; ++i) {
      BinaryExample negative;
      negative.example = ex;
      negative.example.label.reset();
      negative.intent = wrong[static_cast<std::size_t>(i)];
      negative.polarity = false;
      out.push_back(negative);
      if (rows) rows->push_back({ex.example_id, wrong[static_cast<std::size_t>(i)], false});
    }
  }
  return out;
}

PatternVerbalizerPair binary_pvp_for(const TaskPack& pack,
                                     const PatternVerbalizerPair& base_pvp, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= pack.labels.size()) {
    throw UnknownLabelError("binary_pvp_for: label index " + std::to_string(label) +
                            " outside the task's label set");
  }
  if (!base_pvp.pattern.uses_label_slot()) {
    throw Error("binary_pvp_for: base PVP " + base_pvp.pvp_id + " has no {label} slot");
  }
  PatternVerbalizerPair pvp = base_pvp;
  const auto& name = pack.labels[static_cast<std::size_t>(label)];
  pvp.pattern.template_text = substitute_label_slot(base_pvp.pattern.template_text, name);
  pvp.pattern.pattern_id = base_pvp.pattern.pattern_id + ":" + name;
  pvp.pvp_id = base_pvp.pvp_id + ":" + name;
  return pvp;
}

std::vector<PatternVerbalizerPair> binary_pvps_for(const TaskPack& pack, int label) {
  if (!pack.binary_scheme) {
    throw Error("binary_pvps_for: task pack " + pack.task_name + " is not a binary scheme");
  }
  std::vector<PatternVerbalizerPair> out;
  out.reserve(pack.pvps.size());
  for (const auto& base : pack.pvps) out.push_back(binary_pvp_for(pack, base, label));
  return out;
}

double binary_true_probability(const BinaryPvpModel& model, const TaskPack& pack,
                               const InputExample& example, int intent) {
  const auto pvp = binary_pvp_for(pack, model.base, intent);
  const auto p = label_distribution(*model.backend, pvp, example);
  return p[1];  // label order is {False, True}
}

namespace {

std::vector<int> binary_predictions(const BinaryPvpModel& model, const TaskPack& pack,
                                    const BinaryDataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& row : data) {
    out.push_back(binary_true_probability(model, pack, row.example, row.intent) > 0.5 ? 1 : 0);
  }
  return out;
}

double binary_accuracy(const BinaryPvpModel& model, const TaskPack& pack,
                       const BinaryDataset& data) {
  const auto predictions = binary_predictions(model, pack, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if ((predictions[i] == 1) == data[i].polarity) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

BinaryPvpModel finetune_binary(std::unique_ptr<MaskedLMBackend> backend, const TaskPack& pack,
                               const PatternVerbalizerPair& base_pvp,
                               const BinaryDataset& train, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw Error("finetune_binary: empty training set");

  BinaryPvpModel model;
  model.pvp_id = base_pvp.pvp_id;
  model.model_id = base_pvp.pvp_id;
  model.seed = config.seed;
  model.base = base_pvp;
  model.backend = std::move(backend);
  model.pre_train_accuracy = binary_accuracy(model, pack, train);

  std::vector<MaskedLmExample> rendered;
  rendered.reserve(train.size());
  for (const auto& row : train) {
    const auto pvp = binary_pvp_for(pack, base_pvp, row.intent);
    rendered.push_back({apply_pattern(pvp.pattern, row.example),
                        verbalize(pvp.verbalizer, row.polarity ? 1 : 0)});
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
      model.backend->train_step(batch, config.learning_rate);
    } catch (const std::exception& e) {
      throw Error("finetune_binary: training failed at step " + std::to_string(step) + ": " +
                  e.what());
    }
  }

  model.post_train_accuracy = binary_accuracy(model, pack, train);
  model.steps_used = config.steps;
  return model;
}

BinaryEnsemble train_binary_ensemble(const TaskPack& pack, const BinaryDataset& train,
                                     const MaskedLMFactory& factory,
                                     const PipelineConfig& config, int binary_steps,
                                     int generation) {
  if (train.empty()) throw Error("train_binary_ensemble: empty training set");
  const std::uint64_t generation_seed =
      mix_seed(config.train.seed, "binary-generation", static_cast<std::uint64_t>(generation));

  std::vector<int> gold;
  gold.reserve(train.size());
  for (const auto& row : train) gold.push_back(row.polarity ? 1 : 0);

  BinaryEnsemble ensemble;
  for (const auto& base : pack.pvps) {
    bool any_healthy = false;
    for (int k = 0; k < config.train.models_per_pvp; ++k) {
      const std::uint64_t base_seed =
          mix_seed(mix_seed(generation_seed, base.pvp_id), static_cast<std::uint64_t>(k));

      auto train_once = [&](std::uint64_t seed, int steps) {
        TrainConfig c = config.train;
        c.seed = seed;
        c.steps = steps;
        BinaryPvpModel model = finetune_binary(factory.create(seed), pack, base, train, c);
        TrainAttempt<BinaryPvpModel> attempt;
        attempt.train_accuracy = model.post_train_accuracy;
        attempt.train_predictions = binary_predictions(model, pack, train);
        attempt.model = std::move(model);
        return attempt;
      };

      auto monitored =
          run_with_monitoring(train_once, base_seed, binary_steps, config.model_monitor, gold);

      BinaryPvpModel model = std::move(monitored.model);
      model.model_id = base.pvp_id + "#" + std::to_string(k);

      ModelReport report;
      report.model_id = model.model_id;
      report.pvp_id = base.pvp_id;
      report.base_seed = base_seed;
      report.pre_accuracy = model.pre_train_accuracy;
      report.post_accuracy = model.post_train_accuracy;
      report.healthy = monitored.healthy;
      report.steps_used = monitored.steps_used;
      report.verdicts = monitored.history;

      any_healthy = any_healthy || monitored.healthy;
      ensemble.report.models.push_back(std::move(report));
      ensemble.models.push_back(std::move(model));
    }
    if (!any_healthy) {
      throw Error("all binary models for PVP " + base.pvp_id +
                  " failed permanently after escalation");
    }
  }

  double total = 0;
  for (const auto& m : ensemble.models) {
    ensemble.weights.push_back({m.model_id, m.pre_train_accuracy});
    total += m.pre_train_accuracy;
  }
  if (total <= 0) {
    for (auto& w : ensemble.weights) w.weight = 1.0;
  }
  ensemble.report.weights = ensemble.weights;
  return ensemble;
}

std::vector<double> score_all_intents(const BinaryEnsemble& ensemble, const TaskPack& pack,
                                      const InputExample& example) {
  if (ensemble.models.empty()) throw Error("score_all_intents: empty ensemble");
  double weight_total = 0;
  for (const auto& w : ensemble.weights) weight_total += w.weight;
  if (weight_total <= 0) throw Error("score_all_intents: all weights zero");

  const std::size_t num_labels = pack.labels.size();
  std::vector<double> true_probability(num_labels, 0.0);
  for (std::size_t l = 0; l < num_labels; ++l) {
    double acc = 0;
    for (std::size_t m = 0; m < ensemble.models.size(); ++m) {
      acc += ensemble.weights[m].weight *
             binary_true_probability(ensemble.models[m], pack, example, static_cast<int>(l));
    }
    true_probability[l] = acc / weight_total;
  }

  double total = 0;
  for (double p : true_probability) total += p;
  if (total <= 0) {
    // Degenerate zero-sum case falls back to uniform.
    return std::vector<double>(num_labels, 1.0 / static_cast<double>(num_labels));
  }
  for (auto& p : true_probability) p /= total;
  return true_probability;
}

KwayDistillResult distill_kway(const ClassifierFactory& classifier_factory,
                               const BinaryEnsemble& ensemble, const TaskPack& pack,
                               const Dataset& unlabeled, const PipelineConfig& config,
                               int kway_steps) {
  if (unlabeled.empty()) throw Error("distill_kway: empty unlabeled pool");
  KwayDistillResult result;

  for (const auto& ex : unlabeled) {
    std::vector<double> target;
    try {
      target = score_all_intents(ensemble, pack, ex);
    } catch (const std::exception&) {
      ++result.report.skipped;
      continue;
    }
    result.soft_set.push_back({ex, std::move(target)});
  }
  if (result.soft_set.empty()) throw Error("distill_kway: every example failed scoring");
  result.report.soft_labeled = result.soft_set.size();

  std::vector<int> soft_gold;
  Dataset soft_inputs;
  soft_gold.reserve(result.soft_set.size());
  soft_inputs.reserve(result.soft_set.size());
  for (const auto& s : result.soft_set) {
    soft_gold.push_back(static_cast<int>(
        std::max_element(s.target.begin(), s.target.end()) - s.target.begin()));
    soft_inputs.push_back(s.example);
  }

  const std::uint64_t final_seed = mix_seed(config.train.seed, "kway-classifier");
  auto train_once = [&](std::uint64_t seed, int steps) {
    TrainConfig c = config.train;
    c.seed = seed;
    auto classifier = classifier_factory.create(seed);
    train_final_classifier(*classifier, result.soft_set, c, steps);
    TrainAttempt<std::unique_ptr<ClassifierBackend>> attempt;
    attempt.train_predictions = classifier_predictions(*classifier, soft_inputs);
    attempt.train_accuracy = evaluate_accuracy(attempt.train_predictions, soft_gold);
    attempt.model = std::move(classifier);
    return attempt;
  };
  auto monitored =
      run_with_monitoring(train_once, final_seed, kway_steps, config.final_monitor, soft_gold);

  result.classifier = std::move(monitored.model);
  result.report.final_healthy = monitored.healthy;
  result.report.final_verdicts = monitored.history;
  result.report.final_steps = monitored.steps_used;
  return result;
}

void MultilabelConfig::validate(std::size_t num_labels) const {
  base.train.validate();
  if (num_labels < 2) throw Error("multilabel: need at least two labels");
  if (negatives < 0 || static_cast<std::size_t>(negatives) > num_labels - 1) {
    throw Error("multilabel: invalid negative count");
  }
  if (binary_steps <= 0 || kway_steps <= 0) throw Error("multilabel: steps must be positive");
  if (coverage_k < 1) throw Error("multilabel: coverage_k must be at least 1");
  if (generations < 1) throw Error("multilabel: generations must be at least 1");
}

nlohmann::json to_json(const MultilabelRunReport& r) {
  nlohmann::json generations = nlohmann::json::array();
  for (const auto& g : r.generations) generations.push_back(to_json(g));
  return {{"task", r.task},
          {"config_hash", r.config_hash},
          {"generations", generations},
          {"train_sizes", r.train_sizes},
          {"distill", to_json(r.distill)}};
}

MultilabelResult multilabel_pipeline(const TaskPack& pack, const Dataset& train,
                                     const Dataset& unlabeled,
                                     const MaskedLMFactory& mlm_factory,
                                     const ClassifierFactory& classifier_factory,
                                     const MultilabelConfig& config,
                                     const std::optional<std::filesystem::path>& run_dir) {
  pack.validate();
  config.validate(pack.labels.size());
  if (!pack.binary_scheme) {
    throw Error("multilabel_pipeline: task pack " + pack.task_name +
                " does not define a binary scheme");
  }

  MultilabelResult result;
  result.report.task = pack.task_name;
  result.report.config_hash = config.base.config_hash();

  Dataset current = train;
  for (int g = 0; g < config.generations; ++g) {
    auto expanded = expand_binary(current, pack.labels.size(), config.negatives,
                                  mix_seed(config.base.train.seed, "expand",
                                           static_cast<std::uint64_t>(g)));
    result.report.train_sizes.push_back(expanded.size());
    result.ensemble = train_binary_ensemble(pack, expanded, mlm_factory, config.base,
                                            config.binary_steps, g);
    result.report.generations.push_back(result.ensemble.report);

    if (g + 1 < config.generations) {
      // Cover every label: for each one, claim the coverage_k most likely
      // unlabeled examples according to this generation.
      std::vector<SoftLabeledExample> predictions;
      predictions.reserve(unlabeled.size());
      for (const auto& ex : unlabeled) {
        predictions.push_back({ex, score_all_intents(result.ensemble, pack, ex)});
      }
      if (unlabeled.size() < static_cast<std::size_t>(config.coverage_k) * pack.labels.size()) {
        throw Error("multilabel_pipeline: unlabeled pool too small for label coverage");
      }
      auto coverage = claim_by_confidence(
          predictions,
          std::vector<std::size_t>(pack.labels.size(),
                                   static_cast<std::size_t>(config.coverage_k)),
          /*strict=*/true);
      if (run_dir) {
        std::filesystem::create_directories(*run_dir);
        save_dataset_jsonl(*run_dir / ("coverage_generation_" + std::to_string(g + 1) +
                                       ".jsonl"),
                           coverage, pack.labels);
      }
      current = train;
      current.insert(current.end(), coverage.begin(), coverage.end());
    }
  }

  auto kway = distill_kway(classifier_factory, result.ensemble, pack, unlabeled, config.base,
                           config.kway_steps);
  result.report.distill = kway.report;
  result.classifier = std::move(kway.classifier);
  result.soft_set = std::move(kway.soft_set);

  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    std::ofstream out(*run_dir / "multilabel_report.json");
    out << to_json(result.report).dump(2) << "\n";
    save_soft_labels_jsonl(*run_dir / "soft_labels.jsonl", result.soft_set);
    const auto snapshot_dir = *run_dir / "snapshots";
    for (const auto& m : result.ensemble.models) {
      std::string stem = m.model_id;
      for (auto& c : stem) {
        if (c == '/' || c == '#' || c == ' ') c = '_';
      }
      write_snapshot_file(snapshot_dir, stem, m.backend->name(), m.seed, m.steps_used,
                          m.backend->snapshot());
    }
    write_snapshot_file(snapshot_dir, "final_classifier", result.classifier->name(),
                        mix_seed(config.base.train.seed, "kway-classifier"),
                        result.report.distill.final_steps, result.classifier->snapshot());
  }
  return result;
}

}  // namespace pet
