#include "pet/ipet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pet {

void IpetSchedule::validate() const {
  if (generations < 1) throw Error("schedule needs at least one generation");
  if (growth_factor <= 1.0) throw Error("growth_factor must exceed 1");
}

std::vector<std::size_t> IpetSchedule::size_targets(std::size_t n_train,
                                                    std::size_t n_unlabeled) const {
  validate();
  std::vector<std::size_t> targets;
  targets.reserve(static_cast<std::size_t>(generations));
  double target = static_cast<double>(n_train);
  for (int g = 1; g <= generations; ++g) {
    target *= growth_factor;
    const auto rounded = static_cast<std::size_t>(std::llround(target));
    targets.push_back(std::min(rounded, n_unlabeled));
  }
  return targets;
}

std::vector<std::size_t> self_label_quotas(const std::vector<SoftLabeledExample>& predictions,
                                           std::size_t additions, std::size_t num_labels,
                                           IpetSchedule::Proportionality proportionality) {
  if (num_labels == 0) throw Error("self_label_quotas: no labels");
  std::vector<std::size_t> quotas(num_labels, 0);
  if (additions == 0) return quotas;

  if (proportionality == IpetSchedule::Proportionality::Balanced) {
    const std::size_t base = additions / num_labels;
    const std::size_t remainder = additions % num_labels;
    for (std::size_t l = 0; l < num_labels; ++l) quotas[l] = base + (l < remainder ? 1 : 0);
    return quotas;
  }

  // Prior induced by the previous ensemble's argmax; largest-remainder
  // rounding keeps the total exact.
  std::vector<std::size_t> counts(num_labels, 0);
  for (const auto& p : predictions) {
    const auto arg = static_cast<std::size_t>(
        std::max_element(p.target.begin(), p.target.end()) - p.target.begin());
    ++counts[arg];
  }
  const double total = static_cast<double>(predictions.size());
  if (total == 0) throw Error("self_label_quotas: no predictions");

  std::vector<double> exact(num_labels);
  std::size_t assigned = 0;
  for (std::size_t l = 0; l < num_labels; ++l) {
    exact[l] = static_cast<double>(additions) * static_cast<double>(counts[l]) / total;
    quotas[l] = static_cast<std::size_t>(exact[l]);
    assigned += quotas[l];
  }
  std::vector<std::size_t> order(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) order[l] = l;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = exact[a] - std::floor(exact[a]);
    const double rb = exact[b] - std::floor(exact[b]);
    if (ra != rb) return ra > rb;
    return a < b;
  });
  for (std::size_t i = 0; assigned < additions; ++i) {
    ++quotas[order[i % num_labels]];
    ++assigned;
  }
  return quotas;
}

Dataset claim_by_confidence(const std::vector<SoftLabeledExample>& predictions,
                            const std::vector<std::size_t>& quotas, bool strict) {
  struct Claim {
    double probability;
    std::size_t example_index;
    std::size_t label;
  };
  const std::size_t num_labels = quotas.size();
  std::vector<Claim> claims;
  claims.reserve(predictions.size() * num_labels);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& target = predictions[i].target;
    if (target.size() != num_labels) throw Error("claim_by_confidence: label-count mismatch");
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (quotas[l] > 0) claims.push_back({target[l], i, l});
    }
  }
  std::stable_sort(claims.begin(), claims.end(), [&](const Claim& a, const Claim& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    const auto& ida = predictions[a.example_index].example.example_id;
    const auto& idb = predictions[b.example_index].example.example_id;
    if (ida != idb) return ida < idb;
    return a.label < b.label;
  });

  std::vector<std::size_t> remaining = quotas;
  std::size_t open = 0;
  for (auto q : remaining) open += q;
  std::vector<char> taken(predictions.size(), 0);

  Dataset out;
  out.reserve(open);
  for (const auto& claim : claims) {
    if (open == 0) break;
    if (taken[claim.example_index] || remaining[claim.label] == 0) continue;
    taken[claim.example_index] = 1;
    --remaining[claim.label];
    --open;
    InputExample ex = predictions[claim.example_index].example;
    ex.label = static_cast<int>(claim.label);
    out.push_back(std::move(ex));
  }
  if (open > 0 && strict) {
    throw Error("claim_by_confidence: not enough unlabeled examples to fill every quota");
  }
  // Stable output order regardless of claim order.
  std::stable_sort(out.begin(), out.end(), [](const InputExample& a, const InputExample& b) {
    return a.example_id < b.example_id;
  });
  return out;
}

Dataset label_coverage_bootstrap(const std::vector<PvpModel>& models,
                                 const EnsembleWeights& weights, const Dataset& unlabeled,
                                 std::size_t num_labels, std::size_t k) {
  if (k < 1) throw Error("label_coverage_bootstrap: k must be at least 1");
  if (unlabeled.size() < k * num_labels) {
    throw Error("label_coverage_bootstrap: need at least " + std::to_string(k * num_labels) +
                " unlabeled examples, have " + std::to_string(unlabeled.size()));
  }
  const auto predictions = soft_label(models, weights, unlabeled);
  if (predictions.size() < k * num_labels) {
    throw Error("label_coverage_bootstrap: too many scoring failures");
  }
  return claim_by_confidence(predictions, std::vector<std::size_t>(num_labels, k),
                             /*strict=*/true);
}

nlohmann::json to_json(const IpetRunReport& r) {
  nlohmann::json generations = nlohmann::json::array();
  for (const auto& g : r.generations) generations.push_back(to_json(g));
  return {{"task", r.task},
          {"config_hash", r.config_hash},
          {"transductive", r.transductive},
          {"generations", generations},
          {"generation_sizes", r.generation_sizes},
          {"distill", to_json(r.distill)}};
}

IpetResult ipet_run(const TaskPack& pack, const Dataset& train, const Dataset& unlabeled,
                    const MaskedLMFactory& mlm_factory,
                    const ClassifierFactory& classifier_factory, const IpetSchedule& schedule,
                    const PipelineConfig& config,
                    const std::optional<std::filesystem::path>& run_dir) {
  schedule.validate();
  if (unlabeled.empty()) throw Error("ipet_run: empty unlabeled pool");

  const auto targets = schedule.size_targets(train.size(), unlabeled.size());

  IpetResult result;
  result.report.task = pack.task_name;
  result.report.config_hash = config.config_hash();
  result.report.transductive = config.transductive;

  Dataset current = train;
  TrainedEnsemble ensemble;
  for (int g = 0; g < schedule.generations; ++g) {
    result.report.generation_sizes.push_back(current.size());
    ensemble = train_pvp_ensemble(pack, current, unlabeled, mlm_factory, config, g);
    result.report.generations.push_back(ensemble.report);

    if (g + 1 < schedule.generations) {
      const auto predictions = soft_label(ensemble.models, ensemble.weights, unlabeled);
      const std::size_t target = targets[static_cast<std::size_t>(g)];
      const std::size_t additions = target > train.size() ? target - train.size() : 0;
      const auto quotas = self_label_quotas(predictions, additions, pack.labels.size(),
                                            schedule.proportionality);
      // Insufficient unlabeled data caps the additions at what is available.
      auto pseudo = claim_by_confidence(predictions, quotas, /*strict=*/false);
      if (run_dir) {
        std::filesystem::create_directories(*run_dir);
        save_dataset_jsonl(*run_dir / ("generation_" + std::to_string(g + 1) + "_train.jsonl"),
                           pseudo, pack.labels);
      }
      current = train;
      current.insert(current.end(), pseudo.begin(), pseudo.end());
    }
  }

  auto phase = run_distill_phase(ensemble, unlabeled, classifier_factory, config);
  result.report.distill = phase.report;
  result.models = std::move(ensemble.models);
  result.weights = std::move(ensemble.weights);
  result.soft_set = std::move(phase.soft_set);
  result.classifier = std::move(phase.classifier);

  if (run_dir) {
    PetRunReport flat;
    flat.task = result.report.task;
    flat.config_hash = result.report.config_hash;
    flat.transductive = result.report.transductive;
    flat.ensemble = result.report.generations.back();
    flat.distill = result.report.distill;
    write_run_artifacts(*run_dir, flat, result.models, result.soft_set, *result.classifier,
                        result.report.distill.final_steps);
    std::ofstream out(*run_dir / "ipet_report.json");
    out << to_json(result.report).dump(2) << "\n";
  }
  return result;
}

}  // namespace pet
