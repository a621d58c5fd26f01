#pragma once

// Deterministic mock-backend fixtures shared by the unit and acceptance
// suites. Every dataset is keyword-separable so expected behaviour can be
// recomputed by hand from the keyword tables.

#include <string>
#include <vector>

#include "pet/data.hpp"
#include "pet/mock_backend.hpp"
#include "pet/pvp.hpp"
#include "pet/rng.hpp"

namespace fixtures {

inline const std::vector<std::vector<std::string>>& topic_keywords() {
  static const std::vector<std::vector<std::string>> kw = {
      {"election", "government", "president", "war"},        // World
      {"team", "match", "season", "coach", "league"},        // Sports
      {"stocks", "market", "profit", "bank", "economy"},     // Business
      {"software", "internet", "space", "chip", "computer"}  // Tech
  };
  return kw;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"the", "a",  "of",   "to", "and",
                                                 "in",  "on", "this", "is", "was"};
  return words;
}

inline pet::MockLMConfig topic_lm_config() {
  pet::MockLMConfig config;
  config.vocab = pet::default_mock_vocab();
  const std::vector<std::string> verbalizations = {"World", "Sports", "Business", "Tech"};
  const auto& kw = topic_keywords();
  for (std::size_t l = 0; l < verbalizations.size(); ++l) {
    for (const auto& word : kw[l]) config.prior[verbalizations[l]][word] = 2.0;
  }
  return config;
}

inline pet::TaskPack topic_pack() {
  pet::TaskPack pack;
  pack.task_name = "topic-fixture";
  pack.labels = {"World", "Sports", "Business", "Tech"};
  pack.metric = pet::Metric::Accuracy;

  pet::Verbalizer verbalizer;
  verbalizer.verbalizations = {"World", "Sports", "Business", "Tech"};

  auto add = [&](const std::string& id, const std::string& tmpl, pet::PatternCategory cat) {
    pet::PatternVerbalizerPair pvp;
    pvp.pvp_id = id;
    pvp.pattern.pattern_id = id;
    pvp.pattern.template_text = tmpl;
    pvp.pattern.category = cat;
    pvp.verbalizer = verbalizer;
    pack.pvps.push_back(std::move(pvp));
  };
  add("null-0", "{a} {mask}", pet::PatternCategory::Null);
  add("prompt-0", "{a} Topic: {mask}.", pet::PatternCategory::Prompt);
  add("qa-0", "{a} Question: What is the topic of this article? Answer: {mask}.",
      pet::PatternCategory::QA);
  return pack;
}

// Balanced keyword-separable dataset: example i carries two keywords of its
// class plus filler.
inline pet::Dataset topic_dataset(std::size_t count, std::uint64_t seed, bool labeled = true) {
  pet::Rng rng(pet::mix_seed(seed, "topic-data"));
  const auto& kw = topic_keywords();
  const auto& filler = filler_words();
  pet::Dataset out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % kw.size();
    const auto& pool = kw[label];
    const auto& k1 = pool[rng.next_below(pool.size())];
    const auto& k2 = pool[rng.next_below(pool.size())];
    std::string text = filler[rng.next_below(filler.size())];
    text += " " + k1 + " " + filler[rng.next_below(filler.size())] + " " + k2;
    text += " " + filler[rng.next_below(filler.size())];

    pet::InputExample ex;
    char id[32];
    std::snprintf(id, sizeof(id), "t%05zu", i);
    ex.example_id = id;
    ex.text_a = text;
    if (labeled) ex.label = static_cast<int>(label);
    out.push_back(std::move(ex));
  }
  return out;
}

inline pet::MockLMConfig sentiment_lm_config() {
  pet::MockLMConfig config;
  config.vocab = pet::default_mock_vocab();
  for (const auto* word : {"enjoyed", "loved", "great", "amazing", "wonderful"}) {
    config.prior["good"][word] = 2.0;
  }
  for (const auto* word : {"awful", "terrible", "boring", "horrible", "poor"}) {
    config.prior["bad"][word] = 2.0;
  }
  return config;
}

inline pet::TaskPack sentiment_pack() {
  pet::TaskPack pack;
  pack.task_name = "sentiment-fixture";
  pack.labels = {"negative", "positive"};
  pack.metric = pet::Metric::Accuracy;

  pet::Verbalizer verbalizer;
  verbalizer.verbalizations = {"bad", "good"};

  auto add = [&](const std::string& id, const std::string& tmpl, pet::PatternCategory cat) {
    pet::PatternVerbalizerPair pvp;
    pvp.pvp_id = id;
    pvp.pattern.pattern_id = id;
    pvp.pattern.template_text = tmpl;
    pvp.pattern.category = cat;
    pvp.verbalizer = verbalizer;
    pack.pvps.push_back(std::move(pvp));
  };
  add("null-0", "{a} {mask}", pet::PatternCategory::Null);
  add("prompt-0", "{a} It was {mask}.", pet::PatternCategory::Prompt);
  add("qa-0", "{a} Question: Is this a positive review? Answer: {mask}.",
      pet::PatternCategory::QA);
  return pack;
}

inline pet::Dataset sentiment_dataset(std::size_t count, std::uint64_t seed,
                                      bool labeled = true) {
  static const std::vector<std::vector<std::string>> kw = {
      {"awful", "terrible", "boring", "horrible", "poor"},
      {"enjoyed", "loved", "great", "amazing", "wonderful"}};
  pet::Rng rng(pet::mix_seed(seed, "sentiment-data"));
  const auto& filler = filler_words();
  pet::Dataset out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % 2;
    const auto& pool = kw[label];
    std::string text = "I " + pool[rng.next_below(pool.size())] + " " +
                       filler[rng.next_below(filler.size())] + " " +
                       pool[rng.next_below(pool.size())];
    pet::InputExample ex;
    char id[32];
    std::snprintf(id, sizeof(id), "s%05zu", i);
    ex.example_id = id;
    ex.text_a = text;
    if (labeled) ex.label = static_cast<int>(label);
    out.push_back(std::move(ex));
  }
  return out;
}

// Many-label intent fixture. Queries embed the gold intent's name, which
// makes the binary reformulation learnable by the bag-of-words mock: a
// mismatched question adds a second, different intent word to the cloze.
inline const std::vector<std::string>& intent_names() {
  static const std::vector<std::string> names = {"card_arrival",   "lost_card",
                                                 "top_up_failed",  "exchange_rate",
                                                 "pin_blocked",    "refund_request"};
  return names;
}

inline pet::TaskPack intent_pack(std::size_t num_intents = 6) {
  pet::TaskPack pack;
  pack.task_name = "intent-fixture";
  pack.description = "The following is a banking customer service query. "
                     "Classify the query into one of the categories available.";
  pack.labels.assign(intent_names().begin(),
                     intent_names().begin() + static_cast<long>(num_intents));
  pack.metric = pet::Metric::MacroF1;
  pack.binary_scheme = true;

  auto add = [&](const std::string& id, const std::string& tmpl, const char* no_token,
                 const char* yes_token) {
    pet::PatternVerbalizerPair pvp;
    pvp.pvp_id = id;
    pvp.pattern.pattern_id = id;
    pvp.pattern.template_text = tmpl;
    pvp.pattern.category = pet::PatternCategory::QA;
    pvp.pattern.question = "Is {label} the correct category for this query?";
    pvp.verbalizer.verbalizations = {no_token, yes_token};
    pack.pvps.push_back(std::move(pvp));
  };
  const std::string base =
      "{a} Question: Is {label} the correct category for this query? Answer: {mask}.";
  add("qa-yn", base, "No", "Yes");
  add("qa-tf", base, "False", "True");
  add("qa-desc-yn", pack.description + " " + base, "No", "Yes");
  add("qa-desc-tf", pack.description + " " + base, "False", "True");
  return pack;
}

inline pet::MockLMConfig intent_lm_config(std::size_t num_intents = 6) {
  pet::MockLMConfig config;
  std::vector<std::string> extra(intent_names().begin(),
                                 intent_names().begin() + static_cast<long>(num_intents));
  auto base = pet::default_mock_vocab();
  std::vector<std::string> tokens = base.non_special();
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  config.vocab = pet::TokenInventory(std::move(tokens), {"[MASK]", "[PAD]", "[UNK]"});
  // A mismatched intent question adds a second intent word to the cloze;
  // weighting every intent word toward "No"/"False" and a constant cloze
  // word toward "Yes"/"True" separates matched from mismatched pairs.
  for (const auto& name : extra) {
    config.prior["No"][name] = 2.0;
    config.prior["False"][name] = 2.0;
  }
  config.prior["Yes"]["Question"] = 3.0;
  config.prior["True"]["Question"] = 3.0;
  return config;
}

inline pet::Dataset intent_dataset(std::size_t count, std::uint64_t seed,
                                   std::size_t num_intents = 6, bool labeled = true) {
  pet::Rng rng(pet::mix_seed(seed, "intent-data"));
  const auto& filler = filler_words();
  pet::Dataset out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % num_intents;
    std::string text = "my " + intent_names()[label] + " " +
                       filler[rng.next_below(filler.size())] + " help";
    pet::InputExample ex;
    char id[32];
    std::snprintf(id, sizeof(id), "q%05zu", i);
    ex.example_id = id;
    ex.text_a = text;
    if (labeled) ex.label = static_cast<int>(label);
    out.push_back(std::move(ex));
  }
  return out;
}

inline pet::MockClassifierConfig topic_classifier_config() {
  pet::MockClassifierConfig config;
  config.num_labels = 4;
  return config;
}

}  // namespace fixtures
