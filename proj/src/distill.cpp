#include "pet/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pet/rng.hpp"

namespace pet {

std::string to_string(WeightingScheme scheme) {
  return scheme == WeightingScheme::Uniform ? "uniform" : "zero-shot-accuracy";
}

EnsembleWeights compute_weights(const std::vector<PvpModel>& models, WeightingScheme scheme) {
  if (models.empty()) throw Error("compute_weights: no models");
  EnsembleWeights weights;
  weights.reserve(models.size());
  double total = 0;
  for (const auto& m : models) {
    const double w = scheme == WeightingScheme::Uniform ? 1.0 : m.pre_train_accuracy;
    weights.push_back({m.model_id, w});
    total += w;
  }
  if (total <= 0) {
    for (auto& w : weights) w.weight = 1.0;
  }
  return weights;
}

std::vector<SoftLabeledExample> soft_label(const std::vector<PvpModel>& models,
                                           const EnsembleWeights& weights,
                                           const Dataset& unlabeled, SoftLabelStats* stats,
                                           double temperature) {
  if (models.empty()) throw Error("soft_label: no models");
  if (weights.size() != models.size()) throw Error("soft_label: weight/model mismatch");
  if (temperature <= 0) throw Error("soft_label: temperature must be positive");

  double weight_total = 0;
  for (const auto& w : weights) {
    if (w.weight < 0) throw Error("soft_label: negative weight");
    weight_total += w.weight;
  }
  if (weight_total <= 0) throw Error("soft_label: all weights zero");

  std::vector<SoftLabeledExample> out;
  out.reserve(unlabeled.size());
  for (const auto& ex : unlabeled) {
    std::vector<double> target;
    bool failed = false;
    for (std::size_t m = 0; m < models.size(); ++m) {
      std::vector<double> p;
      try {
        p = label_distribution(*models[m].backend, models[m].pvp, ex);
      } catch (const std::exception&) {
        failed = true;
        break;
      }
      if (target.empty()) target.assign(p.size(), 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) target[i] += weights[m].weight * p[i];
    }
    if (failed) {
      if (stats) {
        ++stats->skipped;
        stats->skipped_ids.push_back(ex.example_id);
      }
      continue;
    }
    for (auto& t : target) t /= weight_total;
    if (temperature != 1.0) {
      double total = 0;
      for (auto& t : target) {
        t = std::pow(std::max(t, 1e-300), 1.0 / temperature);
        total += t;
      }
      for (auto& t : target) t /= total;
    }
    if (stats) ++stats->scored;
    out.push_back({ex, std::move(target)});
  }
  return out;
}

int choose_final_steps(std::size_t unlabeled_size) {
  return unlabeled_size > 4000 ? 2000 : 1000;
}

void train_final_classifier(ClassifierBackend& classifier,
                            const std::vector<SoftLabeledExample>& soft_set,
                            const TrainConfig& config, int steps) {
  config.validate();
  if (soft_set.empty()) throw Error("train_final_classifier: empty soft-labeled set");
  if (steps <= 0) throw Error("train_final_classifier: steps must be positive");

  std::vector<ClassifierExample> rendered;
  rendered.reserve(soft_set.size());
  for (const auto& s : soft_set) rendered.push_back({render_raw(s.example), s.target});

  Rng rng(mix_seed(config.seed, "final-batch-order"));
  std::vector<std::size_t> order(rendered.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  for (int step = 0; step < steps; ++step) {
    std::vector<ClassifierExample> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(rendered[order[cursor++]]);
    }
    try {
      classifier.train_step(batch, config.learning_rate);
    } catch (const std::exception& e) {
      throw Error("train_final_classifier: failed at step " + std::to_string(step) + ": " +
                  e.what());
    }
  }
}

std::vector<int> classifier_predictions(ClassifierBackend& classifier, const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    const auto p = classifier.predict_proba(render_raw(ex));
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

std::string PipelineConfig::config_hash() const {
  std::ostringstream s;
  s << "lr=" << train.learning_rate << "|steps=" << train.steps << "|batch="
    << train.batch_size << "|seed=" << train.seed << "|mpp=" << train.models_per_pvp
    << "|weighting=" << to_string(weighting) << "|temp=" << temperature
    << "|final=" << (final_steps ? std::to_string(*final_steps) : std::string{"auto"})
    << "|restarts=" << model_monitor.max_restarts << "|transductive=" << transductive;
  std::ostringstream hex;
  hex << std::hex << fnv1a64(s.str());
  return hex.str();
}

nlohmann::json to_json(const MonitorVerdict& v) {
  return {{"attempt", v.attempt},       {"seed", v.seed},
          {"steps", v.steps},           {"underfit", v.underfit},
          {"constant_train", v.constant_train}, {"constant_unlabeled", v.constant_unlabeled},
          {"sri_exempted", v.sri_exempted}};
}

nlohmann::json to_json(const ModelReport& r) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
  return {{"model_id", r.model_id},         {"pvp_id", r.pvp_id},
          {"base_seed", r.base_seed},       {"pre_accuracy", r.pre_accuracy},
          {"post_accuracy", r.post_accuracy}, {"healthy", r.healthy},
          {"steps_used", r.steps_used},     {"verdicts", verdicts}};
}

nlohmann::json to_json(const EnsembleReport& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) models.push_back(to_json(m));
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& w : r.weights) {
    weights.push_back({{"model_id", w.model_id}, {"weight", w.weight}});
  }
  return {{"models", models}, {"weights", weights}};
}

nlohmann::json to_json(const DistillReport& r) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.final_verdicts) verdicts.push_back(to_json(v));
  return {{"soft_labeled", r.soft_labeled}, {"skipped", r.skipped},
          {"final_steps", r.final_steps},   {"final_healthy", r.final_healthy},
          {"final_verdicts", verdicts}};
}

nlohmann::json to_json(const PetRunReport& r) {
  return {{"task", r.task},
          {"config_hash", r.config_hash},
          {"transductive", r.transductive},
          {"ensemble", to_json(r.ensemble)},
          {"distill", to_json(r.distill)}};
}

TrainedEnsemble train_pvp_ensemble(const TaskPack& pack, const Dataset& train,
                                   const Dataset& unlabeled, const MaskedLMFactory& factory,
                                   const PipelineConfig& config, int generation) {
  pack.validate();
  config.train.validate();
  if (train.empty()) throw Error("train_pvp_ensemble: empty training set");

  const std::uint64_t generation_seed =
      mix_seed(config.train.seed, "generation", static_cast<std::uint64_t>(generation));
  const auto gold = gold_labels(train);

  TrainedEnsemble ensemble;
  for (const auto& pvp : pack.pvps) {
    bool any_healthy = false;
    for (int k = 0; k < config.train.models_per_pvp; ++k) {
      const std::uint64_t base_seed =
          mix_seed(mix_seed(generation_seed, pvp.pvp_id), static_cast<std::uint64_t>(k));

      auto train_once = [&](std::uint64_t seed, int steps) {
        TrainConfig c = config.train;
        c.seed = seed;
        c.steps = steps;
        PvpModel model = finetune_pvp(factory.create(seed), pvp, train, c);
        TrainAttempt<PvpModel> attempt;
        attempt.train_accuracy = model.post_train_accuracy;
        attempt.train_predictions = predict_labels(*model.backend, pvp, train);
        if (!unlabeled.empty()) {
          attempt.unlabeled_predictions = predict_labels(*model.backend, pvp, unlabeled);
        }
        attempt.model = std::move(model);
        return attempt;
      };

      auto monitored = run_with_monitoring(train_once, base_seed, config.train.steps,
                                           config.model_monitor, gold);

      PvpModel model = std::move(monitored.model);
      model.model_id = pvp.pvp_id + "#" + std::to_string(k);
      model.pvp_id = pvp.pvp_id;

      ModelReport report;
      report.model_id = model.model_id;
      report.pvp_id = pvp.pvp_id;
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
      throw Error("all models for PVP " + pvp.pvp_id +
                  " failed permanently after escalation");
    }
  }

  ensemble.weights = compute_weights(ensemble.models, config.weighting);
  ensemble.report.weights = ensemble.weights;
  return ensemble;
}

DistillPhaseResult run_distill_phase(const TrainedEnsemble& ensemble, const Dataset& unlabeled,
                                     const ClassifierFactory& classifier_factory,
                                     const PipelineConfig& config) {
  DistillPhaseResult phase;
  SoftLabelStats stats;
  phase.soft_set =
      soft_label(ensemble.models, ensemble.weights, unlabeled, &stats, config.temperature);
  if (phase.soft_set.empty()) throw Error("distill: every unlabeled example failed scoring");

  phase.report.soft_labeled = stats.scored;
  phase.report.skipped = stats.skipped;
  const int final_steps = config.final_steps.value_or(choose_final_steps(unlabeled.size()));
  phase.report.final_steps = final_steps;

  // Soft argmax stands in for gold labels in the monitor's checks.
  std::vector<int> soft_gold;
  soft_gold.reserve(phase.soft_set.size());
  Dataset soft_inputs;
  soft_inputs.reserve(phase.soft_set.size());
  for (const auto& s : phase.soft_set) {
    soft_gold.push_back(static_cast<int>(
        std::max_element(s.target.begin(), s.target.end()) - s.target.begin()));
    soft_inputs.push_back(s.example);
  }

  const std::uint64_t final_seed = mix_seed(config.train.seed, "final-classifier");
  auto train_once = [&](std::uint64_t seed, int steps) {
    TrainConfig c = config.train;
    c.seed = seed;
    auto classifier = classifier_factory.create(seed);
    train_final_classifier(*classifier, phase.soft_set, c, steps);
    TrainAttempt<std::unique_ptr<ClassifierBackend>> attempt;
    attempt.train_predictions = classifier_predictions(*classifier, soft_inputs);
    attempt.train_accuracy = evaluate_accuracy(attempt.train_predictions, soft_gold);
    attempt.model = std::move(classifier);
    return attempt;
  };

  auto monitored = run_with_monitoring(train_once, final_seed, final_steps,
                                       config.final_monitor, soft_gold);
  phase.classifier = std::move(monitored.model);
  phase.report.final_healthy = monitored.healthy;
  phase.report.final_verdicts = monitored.history;
  phase.report.final_steps = monitored.steps_used;
  return phase;
}

void write_run_artifacts(const std::filesystem::path& run_dir, const PetRunReport& report,
                         const std::vector<PvpModel>& models,
                         const std::vector<SoftLabeledExample>& soft_set,
                         const ClassifierBackend& classifier, int final_steps) {
  std::filesystem::create_directories(run_dir);

  {
    std::ofstream out(run_dir / "report.json");
    out << to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(run_dir / "ledger.jsonl");
    for (const auto& m : report.ensemble.models) {
      nlohmann::json row = to_json(m);
      row["type"] = "model";
      row["task"] = report.task;
      row["config_hash"] = report.config_hash;
      out << row.dump() << "\n";
    }
    nlohmann::json final_row = to_json(report.distill);
    final_row["type"] = "final_classifier";
    final_row["task"] = report.task;
    final_row["config_hash"] = report.config_hash;
    out << final_row.dump() << "\n";
  }
  save_soft_labels_jsonl(run_dir / "soft_labels.jsonl", soft_set);

  const auto snapshot_dir = run_dir / "snapshots";
  for (const auto& m : models) {
    std::string stem = m.model_id;
    for (auto& c : stem) {
      if (c == '/' || c == '#' || c == ' ') c = '_';
    }
    write_snapshot_file(snapshot_dir, stem, m.backend->name(), m.seed, m.steps_used,
                        m.backend->snapshot());
  }
  write_snapshot_file(snapshot_dir, "final_classifier", classifier.name(),
                      mix_seed(0, "final"), final_steps, classifier.snapshot());
}

PetResult pet_pipeline(const TaskPack& pack, const Dataset& train, const Dataset& unlabeled,
                       const MaskedLMFactory& mlm_factory,
                       const ClassifierFactory& classifier_factory,
                       const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& run_dir) {
  if (unlabeled.empty()) throw Error("pet_pipeline: empty unlabeled pool");

  auto ensemble = train_pvp_ensemble(pack, train, unlabeled, mlm_factory, config, 0);
  auto phase = run_distill_phase(ensemble, unlabeled, classifier_factory, config);

  PetResult result;
  result.report.task = pack.task_name;
  result.report.config_hash = config.config_hash();
  result.report.transductive = config.transductive;
  result.report.ensemble = std::move(ensemble.report);
  result.report.distill = phase.report;
  result.models = std::move(ensemble.models);
  result.weights = std::move(ensemble.weights);
  result.soft_set = std::move(phase.soft_set);
  result.classifier = std::move(phase.classifier);

  if (run_dir) {
    write_run_artifacts(*run_dir, result.report, result.models, result.soft_set,
                        *result.classifier, result.report.distill.final_steps);
  }
  return result;
}

}  // namespace pet
