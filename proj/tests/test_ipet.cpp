#include "doctest.h"

#include <map>
#include <set>

#include "pet/ipet.hpp"
#include "pet/mock_backend.hpp"
#include "support/fixtures.hpp"

using namespace pet;

TEST_CASE("schedule targets follow n * growth^g with a pool cap") {
  IpetSchedule schedule;  // generations = 3, growth = 5
  const auto targets = schedule.size_targets(10, 1000);
  CHECK(targets == std::vector<std::size_t>{50, 250, 1000});

  const auto uncapped = schedule.size_targets(10, 100000);
  CHECK(uncapped == std::vector<std::size_t>{50, 250, 1250});

  IpetSchedule bad;
  bad.generations = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.generations = 2;
  bad.growth_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

namespace {

std::vector<SoftLabeledExample> fake_predictions(std::size_t count, std::size_t num_labels,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SoftLabeledExample> out;
  for (std::size_t i = 0; i < count; ++i) {
    SoftLabeledExample s;
    char id[16];
    std::snprintf(id, sizeof(id), "u%04zu", i);
    s.example.example_id = id;
    s.example.text_a = "text";
    std::vector<double> raw(num_labels);
    double total = 0;
    for (auto& v : raw) {
      v = rng.next_double() + 1e-3;
      total += v;
    }
    for (auto& v : raw) v /= total;
    s.target = raw;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("balanced quotas differ by at most one") {
  const auto preds = fake_predictions(100, 4, 1);
  const auto quotas = self_label_quotas(preds, 10, 4, IpetSchedule::Proportionality::Balanced);
  std::size_t total = 0, lo = 100, hi = 0;
  for (auto q : quotas) {
    total += q;
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  CHECK(total == 10);
  CHECK(hi - lo <= 1);
}

TEST_CASE("prior-proportional quotas track the argmax prior") {
  // 60 examples argmax label 0, 40 label 1.
  std::vector<SoftLabeledExample> preds;
  for (int i = 0; i < 100; ++i) {
    SoftLabeledExample s;
    s.example.example_id = "u" + std::to_string(i);
    s.example.text_a = "t";
    s.target = i < 60 ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.2, 0.8};
    preds.push_back(std::move(s));
  }
  const auto quotas =
      self_label_quotas(preds, 10, 2, IpetSchedule::Proportionality::PriorProportional);
  CHECK(quotas[0] == 6);
  CHECK(quotas[1] == 4);
}

TEST_CASE("claims go most-confident-first without replacement") {
  std::vector<SoftLabeledExample> preds;
  auto add = [&](const std::string& id, std::vector<double> target) {
    SoftLabeledExample s;
    s.example.example_id = id;
    s.example.text_a = "t";
    s.target = std::move(target);
    preds.push_back(std::move(s));
  };
  // e0 is maximally confident for both labels; it must be assigned once.
  add("e0", {0.9, 0.1});
  add("e1", {0.8, 0.2});
  add("e2", {0.3, 0.7});
  add("e3", {0.45, 0.55});

  const auto picked = claim_by_confidence(preds, {1, 1}, /*strict=*/true);
  REQUIRE(picked.size() == 2);
  std::set<std::string> ids;
  std::map<int, int> per_label;
  for (const auto& ex : picked) {
    ids.insert(ex.example_id);
    ++per_label[*ex.label];
  }
  CHECK(ids.size() == 2);  // no duplicates
  CHECK(per_label[0] == 1);
  CHECK(per_label[1] == 1);
  CHECK(ids.count("e0") == 1);  // the strongest claim wins its label
}

TEST_CASE("label coverage bootstrap covers every label exactly k times") {
  // 77 labels, k=2: 154 pseudo-labeled examples covering all labels.
  const std::size_t num_labels = 77;
  const auto preds = fake_predictions(400, num_labels, 5);
  const auto picked =
      claim_by_confidence(preds, std::vector<std::size_t>(num_labels, 2), /*strict=*/true);
  CHECK(picked.size() == 154);
  std::map<int, int> per_label;
  std::set<std::string> ids;
  for (const auto& ex : picked) {
    ++per_label[*ex.label];
    ids.insert(ex.example_id);
  }
  CHECK(per_label.size() == num_labels);
  for (const auto& [label, count] : per_label) {
    (void)label;
    CHECK(count == 2);
  }
  CHECK(ids.size() == picked.size());
}

TEST_CASE("label coverage bootstrap needs a large enough pool") {
  const auto pack = fixtures::sentiment_pack();
  const auto train = fixtures::sentiment_dataset(6, 7);
  TrainConfig config;
  config.seed = 1;
  auto model = finetune_pvp(
      std::make_unique<MockMaskedLM>(fixtures::sentiment_lm_config(), 1), pack.pvps[1], train,
      config);
  std::vector<PvpModel> models;
  models.push_back(std::move(model));
  const auto weights = compute_weights(models);

  const auto pool = fixtures::sentiment_dataset(10, 3, /*labeled=*/false);
  const auto picked = label_coverage_bootstrap(models, weights, pool, 2, 2);
  CHECK(picked.size() == 4);

  const auto tiny = fixtures::sentiment_dataset(3, 3, /*labeled=*/false);
  CHECK_THROWS_AS(label_coverage_bootstrap(models, weights, tiny, 2, 2), Error);

  // A single label takes the k most confident examples for it.
  const auto single = label_coverage_bootstrap(models, weights, pool, 1, 3);
  CHECK(single.size() == 3);
  for (const auto& ex : single) CHECK(*ex.label == 0);
}

TEST_CASE("ipet with one generation matches pet_pipeline bitwise") {
  const auto pack = fixtures::topic_pack();
  const auto train = fixtures::topic_dataset(8, 51);
  const auto unlabeled = fixtures::topic_dataset(80, 52, /*labeled=*/false);

  MockMaskedLMFactory mlm(fixtures::topic_lm_config());
  MockClassifierFactory clf(fixtures::topic_classifier_config());
  PipelineConfig config;
  config.train.seed = 6;

  IpetSchedule schedule;
  schedule.generations = 1;

  const auto pet = pet_pipeline(pack, train, unlabeled, mlm, clf, config);
  const auto ipet = ipet_run(pack, train, unlabeled, mlm, clf, schedule, config);

  REQUIRE(ipet.report.generations.size() == 1);
  CHECK(to_json(ipet.report.generations[0]).dump() == to_json(pet.report.ensemble).dump());
  CHECK(to_json(ipet.report.distill).dump() == to_json(pet.report.distill).dump());
  CHECK(ipet.report.config_hash == pet.report.config_hash);
}

TEST_CASE("ipet generations grow the training set and keep the originals") {
  const auto pack = fixtures::topic_pack();
  const auto train = fixtures::topic_dataset(8, 61);
  const auto unlabeled = fixtures::topic_dataset(120, 62, /*labeled=*/false);

  MockMaskedLMFactory mlm(fixtures::topic_lm_config());
  MockClassifierFactory clf(fixtures::topic_classifier_config());
  PipelineConfig config;
  config.train.seed = 2;

  IpetSchedule schedule;
  schedule.generations = 3;
  schedule.growth_factor = 3.0;

  const auto run_dir = std::filesystem::temp_directory_path() / "pet_ipet_run";
  std::filesystem::remove_all(run_dir);
  const auto result = ipet_run(pack, train, unlabeled, mlm, clf, schedule, config, run_dir);
  REQUIRE(result.report.generations.size() == 3);
  REQUIRE(result.report.generation_sizes.size() == 3);
  CHECK(result.report.generation_sizes[0] == 8);
  CHECK(result.report.generation_sizes[1] == 24);  // 8 * 3
  CHECK(result.report.generation_sizes[2] == 72);  // 8 * 9

  // Persisted pseudo-labeled sets: balanced per-label counts within one.
  for (int g = 1; g <= 2; ++g) {
    const auto file = run_dir / ("generation_" + std::to_string(g) + "_train.jsonl");
    REQUIRE(std::filesystem::exists(file));
    const auto pseudo = load_dataset_jsonl(file, pack.labels);
    std::map<int, std::size_t> per_label;
    for (const auto& ex : pseudo) ++per_label[*ex.label];
    std::size_t lo = pseudo.size(), hi = 0;
    for (const auto& [label, count] : per_label) {
      (void)label;
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
  }
  std::filesystem::remove_all(run_dir);
}
