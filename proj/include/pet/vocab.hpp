#pragma once

#include <string>
#include <unordered_set>
#include <vector>

namespace pet {

// A backend's token inventory. Verbalizations must resolve to a single
// token from this set to be usable with an encoder-only scorer; noise
// patterns and verbalizers sample uniformly from the non-special tokens.
class TokenInventory {
 public:
  TokenInventory() = default;
  TokenInventory(std::vector<std::string> tokens, std::vector<std::string> special)
      : tokens_(std::move(tokens)), special_list_(std::move(special)) {
    for (const auto& t : special_list_) {
      if (set_.insert(t).second) tokens_.push_back(t);
      special_.insert(t);
    }
    for (const auto& t : tokens_) set_.insert(t);
    for (const auto& t : tokens_) {
      if (!special_.count(t)) non_special_.push_back(t);
    }
  }

  bool has(const std::string& token) const { return set_.count(token) != 0; }
  bool is_special(const std::string& token) const { return special_.count(token) != 0; }

  // Single-token test: the exact string is one vocabulary entry.
  bool is_single_token(const std::string& text) const { return has(text); }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& non_special() const { return non_special_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> special_list_;
  std::vector<std::string> non_special_;
  std::unordered_set<std::string> set_;
  std::unordered_set<std::string> special_;
};

}  // namespace pet
