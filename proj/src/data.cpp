#include "pet/data.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pet {

std::string render_raw(const InputExample& example) {
  if (example.text_b) return example.text_a + " " + *example.text_b;
  return example.text_a;
}

std::string render_with_separator(const InputExample& example, std::string_view separator) {
  if (example.text_b) {
    std::string out = example.text_a;
    out += " ";
    out += separator;
    out += " ";
    out += *example.text_b;
    return out;
  }
  return example.text_a;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    const bool word_char = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    if (word_char) {
      current.push_back(c);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

namespace {

int label_index_of(const std::string& name, const std::vector<std::string>& labels,
                   const std::string& where) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == name) return static_cast<int>(i);
  }
  throw UnknownLabelError("unknown label \"" + name + "\" in " + where);
}

}  // namespace

Dataset load_dataset_jsonl(const std::filesystem::path& path,
                           const std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());

  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    InputExample ex;
    if (j.contains("example_id")) {
      ex.example_id = j.at("example_id").get<std::string>();
    } else if (j.contains("id")) {
      ex.example_id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                             : std::to_string(j.at("id").get<long long>());
    } else {
      std::ostringstream id;
      id << "e" << std::setw(6) << std::setfill('0') << line_no;
      ex.example_id = id.str();
    }
    ex.text_a = j.at("text_a").get<std::string>();
    if (ex.text_a.empty()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": empty text_a");
    }
    if (j.contains("text_b") && !j.at("text_b").is_null()) {
      ex.text_b = j.at("text_b").get<std::string>();
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      const std::string name = j.at("label").is_string()
                                   ? j.at("label").get<std::string>()
                                   : std::to_string(j.at("label").get<long long>());
      ex.label = label_index_of(name, labels, path.string() + ":" + std::to_string(line_no));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_dataset_jsonl(const std::filesystem::path& path, const Dataset& data,
                        const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path.string());
  for (const auto& ex : data) {
    nlohmann::json j;
    j["example_id"] = ex.example_id;
    j["text_a"] = ex.text_a;
    if (ex.text_b) j["text_b"] = *ex.text_b;
    if (ex.label) {
      if (*ex.label < 0 || static_cast<std::size_t>(*ex.label) >= labels.size()) {
        throw UnknownLabelError("label index out of range for example " + ex.example_id);
      }
      j["label"] = labels[static_cast<std::size_t>(*ex.label)];
    }
    out << j.dump() << "\n";
  }
}

void save_soft_labels_jsonl(const std::filesystem::path& path,
                            const std::vector<SoftLabeledExample>& soft) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write soft-label file: " + path.string());
  for (const auto& s : soft) {
    nlohmann::json j;
    j["example_id"] = s.example.example_id;
    j["target"] = s.target;
    out << j.dump() << "\n";
  }
}

std::vector<std::pair<std::string, std::vector<double>>> load_soft_labels_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open soft-label file: " + path.string());
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    out.emplace_back(j.at("example_id").get<std::string>(),
                     j.at("target").get<std::vector<double>>());
  }
  return out;
}

std::vector<int> gold_labels(const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    if (!ex.label) throw Error("example " + ex.example_id + " has no gold label");
    out.push_back(*ex.label);
  }
  return out;
}

}  // namespace pet
