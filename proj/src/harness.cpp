#include "pet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pet/rng.hpp"
#include "pet/training.hpp"

namespace pet {

FewShotSplit sample_split(const Dataset& full, int n, std::uint64_t seed,
                          std::size_t num_labels, std::size_t unlabeled_count) {
  if (n <= 0) throw Error("sample_split: n must be positive");
  if (num_labels == 0) throw Error("sample_split: no labels");

  std::vector<std::vector<std::size_t>> by_label(num_labels);
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (!full[i].label) throw Error("sample_split: example " + full[i].example_id + " unlabeled");
    by_label[static_cast<std::size_t>(*full[i].label)].push_back(i);
  }
  if (full.size() < static_cast<std::size_t>(n) + unlabeled_count) {
    throw Error("sample_split: dataset too small for n=" + std::to_string(n) + " plus " +
                std::to_string(unlabeled_count) + " unlabeled");
  }

  Rng rng(mix_seed(mix_seed(fnv1a64("few-shot-split"), static_cast<std::uint64_t>(n)), seed));

  // Per-class quotas: as equal as possible, the remainder spread over a
  // seed-shuffled class order.
  const std::size_t base = static_cast<std::size_t>(n) / num_labels;
  const std::size_t remainder = static_cast<std::size_t>(n) % num_labels;
  std::vector<std::size_t> class_order(num_labels);
  for (std::size_t c = 0; c < num_labels; ++c) class_order[c] = c;
  rng.shuffle(class_order);
  std::vector<std::size_t> quota(num_labels, base);
  for (std::size_t i = 0; i < remainder; ++i) ++quota[class_order[i]];

  FewShotSplit split;
  split.n = n;
  split.seed = seed;
  std::vector<char> taken(full.size(), 0);
  for (std::size_t c = 0; c < num_labels; ++c) {
    auto& pool = by_label[c];
    if (pool.size() < quota[c]) {
      throw Error("sample_split: class " + std::to_string(c) + " has only " +
                  std::to_string(pool.size()) + " examples, needs " + std::to_string(quota[c]));
    }
    rng.shuffle(pool);
    for (std::size_t i = 0; i < quota[c]; ++i) {
      split.train.push_back(full[pool[i]]);
      taken[pool[i]] = 1;
    }
  }

  std::vector<std::size_t> rest;
  rest.reserve(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  if (rest.size() < unlabeled_count) {
    throw Error("sample_split: not enough remaining examples for the unlabeled pool");
  }
  rng.shuffle(rest);
  for (std::size_t i = 0; i < unlabeled_count; ++i) {
    InputExample ex = full[rest[i]];
    ex.label.reset();
    split.unlabeled.push_back(std::move(ex));
  }
  return split;
}

ResultsLedger::ResultsLedger(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    rows_[j.at("key").get<std::string>()] = j;
  }
}

std::optional<nlohmann::json> ResultsLedger::lookup(const std::string& key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) return std::nullopt;
  return it->second.at("payload");
}

void ResultsLedger::record(const std::string& key, const nlohmann::json& meta,
                           const nlohmann::json& payload) {
  if (rows_.count(key)) return;
  nlohmann::json row = meta;
  row["key"] = key;
  row["payload"] = payload;
  rows_[key] = row;
  if (!file_.parent_path().empty()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app);
  if (!out) throw Error("cannot append to ledger: " + file_.string());
  out << row.dump() << "\n";
}

namespace {

// Runs a cell unless the ledger already has it; either way returns the
// payload. Every row carries (task, n, seed, config_hash).
nlohmann::json run_cell(const StudyIO& io, const std::string& study, const TaskPack& pack,
                        int n, std::uint64_t seed, const std::string& cell,
                        const std::string& config_hash,
                        const std::function<nlohmann::json()>& compute) {
  const std::string key =
      study + "|" + pack.task_name + "|" + std::to_string(n) + "|" + std::to_string(seed) +
      "|" + cell + "|" + config_hash;
  if (io.ledger) {
    if (auto cached = io.ledger->lookup(key)) return *cached;
  }
  nlohmann::json payload = compute();
  if (io.ledger) {
    nlohmann::json meta{{"study", study},
                        {"task", pack.task_name},
                        {"n", n},
                        {"seed", seed},
                        {"cell", cell},
                        {"config_hash", config_hash}};
    io.ledger->record(key, meta, payload);
  }
  return payload;
}

double classifier_score(ClassifierBackend& classifier, const Dataset& test,
                        const TaskPack& pack) {
  return evaluate(classifier_predictions(classifier, test), gold_labels(test), pack.metric,
                  static_cast<int>(pack.labels.size()));
}

double model_score(const PvpModel& model, const Dataset& test, const TaskPack& pack) {
  return evaluate(predict_labels(*model.backend, model.pvp, test), gold_labels(test),
                  pack.metric, static_cast<int>(pack.labels.size()));
}

// Per-PVP mean test score and the PET score from one pipeline run.
nlohmann::json pipeline_cell(const TaskPack& pack, const FewShotSplit& split,
                             const Dataset& test, const MaskedLMFactory& mlm_factory,
                             const ClassifierFactory& classifier_factory,
                             const PipelineConfig& config) {
  auto result = pet_pipeline(pack, split.train, split.unlabeled, mlm_factory,
                             classifier_factory, config);
  nlohmann::json per_pattern = nlohmann::json::object();
  std::map<std::string, std::pair<double, int>> by_pvp;
  for (const auto& model : result.models) {
    auto& acc = by_pvp[model.pvp_id];
    acc.first += model_score(model, test, pack);
    ++acc.second;
  }
  for (const auto& [pvp_id, acc] : by_pvp) {
    per_pattern[pvp_id] = acc.first / acc.second;
  }
  return {{"pet", classifier_score(*result.classifier, test, pack)},
          {"per_pattern", per_pattern}};
}

TaskPack with_pvps(const TaskPack& pack, std::vector<PatternVerbalizerPair> pvps) {
  TaskPack out = pack;
  out.pvps = std::move(pvps);
  return out;
}

void write_csv(const StudyIO& io, const std::string& name,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  if (!io.output_dir) return;
  std::filesystem::create_directories(*io.output_dir);
  std::ofstream out(*io.output_dir / name);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ",";
    out << header[i];
  }
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      out << row[i];
    }
    out << "\n";
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw Error("mean of an empty vector");
  double total = 0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

PatternStudyResult run_pattern_study(const TaskPack& pack,
                                     const std::vector<FewShotSplit>& splits,
                                     const Dataset& test, const MaskedLMFactory& mlm_factory,
                                     const ClassifierFactory& classifier_factory,
                                     const PipelineConfig& config,
                                     const IpetSchedule& ipet_schedule, const StudyIO& io) {
  if (splits.empty()) throw Error("run_pattern_study: no splits");
  const std::string config_hash = config.config_hash();

  std::map<std::string, std::vector<double>> per_pattern;
  std::vector<double> pet_scores;
  std::vector<double> ipet_scores;

  for (const auto& split : splits) {
    PipelineConfig cell_config = config;
    cell_config.train.seed = mix_seed(config.train.seed, "split", split.seed);

    auto payload = run_cell(io, "pattern", pack, split.n, split.seed, "pipeline", config_hash,
                            [&] {
                              return pipeline_cell(pack, split, test, mlm_factory,
                                                   classifier_factory, cell_config);
                            });
    pet_scores.push_back(payload.at("pet").get<double>());
    for (const auto& [pvp_id, score] : payload.at("per_pattern").items()) {
      per_pattern[pvp_id].push_back(score.get<double>());
    }

    auto ipet_payload =
        run_cell(io, "pattern", pack, split.n, split.seed, "ipet", config_hash, [&] {
          auto result = ipet_run(pack, split.train, split.unlabeled, mlm_factory,
                                 classifier_factory, ipet_schedule, cell_config);
          return nlohmann::json{
              {"ipet", classifier_score(*result.classifier, test, pack)}};
        });
    ipet_scores.push_back(ipet_payload.at("ipet").get<double>());
  }

  PatternStudyResult result;
  std::map<std::string, std::vector<double>> by_category;
  for (const auto& pvp : pack.pvps) {
    PatternStudyResult::Row row;
    row.row_id = pvp.pvp_id;
    row.category = to_string(pvp.pattern.category);
    row.per_split = per_pattern.at(pvp.pvp_id);
    row.mean = mean_of(row.per_split);
    by_category[row.category].push_back(row.mean);
    result.rows.push_back(std::move(row));
  }
  result.rows.push_back({"PET", "", pet_scores, mean_of(pet_scores)});
  result.rows.push_back({"iPET", "", ipet_scores, mean_of(ipet_scores)});
  for (const auto& [category, means] : by_category) {
    result.category_means[category] = mean_of(means);
  }

  std::vector<std::vector<std::string>> csv_rows;
  for (const auto& row : result.rows) {
    for (std::size_t s = 0; s < splits.size(); ++s) {
      csv_rows.push_back({pack.task_name, std::to_string(splits[s].n),
                          std::to_string(splits[s].seed), config_hash, row.row_id,
                          row.category, fmt(row.per_split[s]), fmt(row.mean)});
    }
  }
  write_csv(io, "pattern_study.csv",
            {"task", "n", "seed", "config_hash", "row", "category", "score", "row_mean"},
            csv_rows);
  return result;
}

NoiseStudyResult run_noise_study(const TaskPack& pack, const std::vector<FewShotSplit>& splits,
                                 const Dataset& test, const MaskedLMFactory& mlm_factory,
                                 const ClassifierFactory& classifier_factory,
                                 const PipelineConfig& config, int noise_pvp_count,
                                 const StudyIO& io) {
  if (splits.empty()) throw Error("run_noise_study: no splits");
  const std::string config_hash = config.config_hash();

  const auto probe = mlm_factory.create(0);
  const TokenInventory& vocab = probe->vocab();
  bool pair_task = false;
  for (const auto& pvp : pack.pvps) pair_task = pair_task || pvp.pattern.uses_text_b();

  // The 20 intentionally bad PVPs are shared across splits.
  std::vector<PatternVerbalizerPair> noise_pvps;
  for (int i = 0; i < noise_pvp_count; ++i) {
    const std::uint64_t seed = mix_seed(config.train.seed, "noise-pvp",
                                        static_cast<std::uint64_t>(i));
    PatternVerbalizerPair pvp;
    pvp.pattern = make_noise_pattern(vocab, seed, pair_task ? 2 : 1);
    pvp.verbalizer = make_noise_verbalizer(vocab, seed, pack.labels.size());
    pvp.pvp_id = pvp.pattern.pattern_id;
    noise_pvps.push_back(std::move(pvp));
  }

  NoiseStudyResult result;
  std::vector<std::vector<double>> curve(static_cast<std::size_t>(noise_pvp_count) + 1);
  std::vector<double> np_p_scores;
  std::vector<double> np_scores;

  for (const auto& split : splits) {
    PipelineConfig cell_config = config;
    cell_config.train.seed = mix_seed(config.train.seed, "split", split.seed);

    // 3 randomly selected high-quality patterns from the manual set.
    Rng selector(mix_seed(cell_config.train.seed, "noise-select"));
    auto picks = selector.sample_indices(pack.pvps.size(), 3);
    std::sort(picks.begin(), picks.end());
    std::vector<PatternVerbalizerPair> selected;
    for (auto i : picks) {
      selected.push_back(pack.pvps[i]);
      result.selected_pvp_ids.push_back(pack.pvps[i].pvp_id);
    }

    for (int k = 0; k <= noise_pvp_count; ++k) {
      auto payload = run_cell(io, "noise", pack, split.n, split.seed,
                              "k=" + std::to_string(k), config_hash, [&] {
                                auto pvps = selected;
                                pvps.insert(pvps.end(), noise_pvps.begin(),
                                            noise_pvps.begin() + k);
                                auto noisy_pack = with_pvps(pack, std::move(pvps));
                                return pipeline_cell(noisy_pack, split, test, mlm_factory,
                                                     classifier_factory, cell_config);
                              });
      curve[static_cast<std::size_t>(k)].push_back(payload.at("pet").get<double>());
    }

    auto np_payload = run_cell(io, "noise", pack, split.n, split.seed, "noise-only",
                               config_hash, [&] {
                                 auto noisy_pack = with_pvps(pack, noise_pvps);
                                 return pipeline_cell(noisy_pack, split, test, mlm_factory,
                                                      classifier_factory, cell_config);
                               });
    np_p_scores.push_back(np_payload.at("pet").get<double>());
    std::vector<double> individual;
    for (const auto& [pvp_id, score] : np_payload.at("per_pattern").items()) {
      (void)pvp_id;
      individual.push_back(score.get<double>());
    }
    np_scores.push_back(mean_of(individual));
  }

  std::vector<std::vector<std::string>> csv_rows;
  for (int k = 0; k <= noise_pvp_count; ++k) {
    result.accuracy_by_noise_count.push_back(curve[static_cast<std::size_t>(k)].empty()
                                                 ? 0.0
                                                 : mean_of(curve[static_cast<std::size_t>(k)]));
    csv_rows.push_back({pack.task_name, std::to_string(splits.front().n), "mean", config_hash,
                        std::to_string(k), fmt(result.accuracy_by_noise_count.back())});
  }
  result.noise_only_pet = mean_of(np_p_scores);
  result.noise_only_individual_mean = mean_of(np_scores);
  csv_rows.push_back({pack.task_name, std::to_string(splits.front().n), "mean", config_hash,
                      "NP+P", fmt(result.noise_only_pet)});
  csv_rows.push_back({pack.task_name, std::to_string(splits.front().n), "mean", config_hash,
                      "NP", fmt(result.noise_only_individual_mean)});
  write_csv(io, "noise_study.csv", {"task", "n", "seed", "config_hash", "point", "score"},
            csv_rows);
  return result;
}

SubsetStudyResult run_subset_study(const TaskPack& pack,
                                   const std::vector<FewShotSplit>& splits, const Dataset& test,
                                   const MaskedLMFactory& mlm_factory,
                                   const ClassifierFactory& classifier_factory,
                                   const PipelineConfig& config, int permutations,
                                   int max_prefix, const StudyIO& io) {
  if (splits.empty()) throw Error("run_subset_study: no splits");
  if (max_prefix < 1 || static_cast<std::size_t>(max_prefix) > pack.pvps.size()) {
    throw Error("run_subset_study: invalid prefix bound");
  }
  const std::string config_hash = config.config_hash();

  SubsetStudyResult result;
  result.permutations = permutations;
  std::vector<std::vector<double>> by_prefix(static_cast<std::size_t>(max_prefix));

  for (const auto& split : splits) {
    PipelineConfig cell_config = config;
    cell_config.train.seed = mix_seed(config.train.seed, "split", split.seed);

    auto full_payload =
        run_cell(io, "subset", pack, split.n, split.seed, "full", config_hash, [&] {
          return pipeline_cell(pack, split, test, mlm_factory, classifier_factory,
                               cell_config);
        });
    const double full_score = full_payload.at("pet").get<double>();
    if (full_score <= 0) throw Error("run_subset_study: degenerate full-pattern score");

    for (int p = 0; p < permutations; ++p) {
      Rng rng(mix_seed(config.train.seed, "permutation", static_cast<std::uint64_t>(p)));
      std::vector<std::size_t> order(pack.pvps.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);

      for (int i = 1; i <= max_prefix; ++i) {
        auto payload = run_cell(
            io, "subset", pack, split.n, split.seed,
            "perm=" + std::to_string(p) + "|i=" + std::to_string(i), config_hash, [&] {
              std::vector<PatternVerbalizerPair> prefix;
              for (int k = 0; k < i; ++k) {
                prefix.push_back(pack.pvps[order[static_cast<std::size_t>(k)]]);
              }
              auto sub_pack = with_pvps(pack, std::move(prefix));
              return pipeline_cell(sub_pack, split, test, mlm_factory, classifier_factory,
                                   cell_config);
            });
        by_prefix[static_cast<std::size_t>(i - 1)].push_back(
            payload.at("pet").get<double>() / full_score);
      }
    }
  }

  std::vector<std::vector<std::string>> csv_rows;
  for (int i = 1; i <= max_prefix; ++i) {
    result.relative_mean_by_prefix.push_back(mean_of(by_prefix[static_cast<std::size_t>(i - 1)]));
    csv_rows.push_back({pack.task_name, std::to_string(splits.front().n), "mean", config_hash,
                        std::to_string(i), fmt(result.relative_mean_by_prefix.back())});
  }
  write_csv(io, "subset_study.csv",
            {"task", "n", "seed", "config_hash", "prefix", "relative_score"}, csv_rows);
  return result;
}

SweepStudyResult run_hparam_sweep(const TaskPack& pack,
                                  const std::vector<FewShotSplit>& splits, const Dataset& test,
                                  const MaskedLMFactory& mlm_factory,
                                  const ClassifierFactory& classifier_factory,
                                  const PipelineConfig& config, const SweepGrids& grids,
                                  const StudyIO& io) {
  if (splits.empty()) throw Error("run_hparam_sweep: no splits");

  SweepStudyResult result;
  auto sweep_one = [&](const std::string& parameter, double value,
                       const std::function<void(PipelineConfig&)>& apply) {
    std::vector<double> pet_scores;
    std::vector<double> individual_scores;
    for (const auto& split : splits) {
      PipelineConfig cell_config = config;
      apply(cell_config);
      cell_config.train.seed = mix_seed(config.train.seed, "split", split.seed);
      const std::string config_hash = cell_config.config_hash();
      auto payload = run_cell(io, "sweep", pack, split.n, split.seed,
                              parameter + "=" + fmt(value), config_hash, [&] {
                                return pipeline_cell(pack, split, test, mlm_factory,
                                                     classifier_factory, cell_config);
                              });
      pet_scores.push_back(payload.at("pet").get<double>());
      std::vector<double> individual;
      for (const auto& [pvp_id, score] : payload.at("per_pattern").items()) {
        (void)pvp_id;
        individual.push_back(score.get<double>());
      }
      individual_scores.push_back(mean_of(individual));
    }
    result.cells.push_back(
        {parameter, value, mean_of(pet_scores), mean_of(individual_scores)});
  };

  // Learning rate and batch size apply to the individual models and the
  // final classifier simultaneously; steps vary only for individual models.
  for (double lr : grids.learning_rates) {
    sweep_one("learning_rate", lr, [&](PipelineConfig& c) { c.train.learning_rate = lr; });
  }
  for (int steps : grids.steps) {
    sweep_one("steps", steps, [&](PipelineConfig& c) { c.train.steps = steps; });
  }
  for (int batch : grids.batch_sizes) {
    sweep_one("batch_size", batch, [&](PipelineConfig& c) { c.train.batch_size = batch; });
  }

  std::vector<std::vector<std::string>> csv_rows;
  for (const auto& cell : result.cells) {
    csv_rows.push_back({pack.task_name, std::to_string(splits.front().n), "mean",
                        config.config_hash(), cell.parameter, fmt(cell.value),
                        fmt(cell.pet_mean), fmt(cell.individual_mean)});
  }
  write_csv(io, "hparam_sweep.csv",
            {"task", "n", "seed", "config_hash", "parameter", "value", "pet", "individual"},
            csv_rows);
  return result;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("spearman_rho: need matched vectors");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg_rank;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = mean_of(ra);
  const double mb = mean_of(rb);
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) throw Error("spearman_rho: constant ranking");
  return cov / std::sqrt(va * vb);
}

namespace {

std::string csv_escape(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

void emit_raft_predictions(ClassifierBackend& classifier, const Dataset& test,
                           const std::vector<std::string>& labels,
                           const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write predictions: " + path.string());
  out << "ID,Label\n";
  const auto predictions = classifier_predictions(classifier, test);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto label = static_cast<std::size_t>(predictions[i]);
    if (label >= labels.size()) throw Error("prediction index out of range");
    out << csv_escape(test[i].example_id) << "," << csv_escape(labels[label]) << "\n";
  }
  if (!out) throw Error("write failure: " + path.string());
}

std::vector<std::pair<std::string, std::string>> read_predictions_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions: " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // Minimal CSV parsing: two fields, optionally quoted.
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          field += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else {
        field += c;
      }
    }
    fields.push_back(std::move(field));
    if (first) {
      if (fields.size() != 2 || fields[0] != "ID" || fields[1] != "Label") {
        throw Error("predictions file missing the ID,Label header");
      }
      first = false;
      continue;
    }
    if (fields.size() != 2) throw Error("malformed prediction row: " + line);
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

}  // namespace pet
