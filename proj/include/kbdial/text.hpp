#ifndef KBDIAL_TEXT_HPP_
#define KBDIAL_TEXT_HPP_

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kbdial {

using Tokens = std::vector<std::string>;

// Lowercases, splits on whitespace, and breaks punctuation into separate
// tokens. A word-internal apostrophe starts a new token ("that's" -> "that",
// "'s"). Underscores are kept, so already-joined entities survive.
Tokens tokenize(std::string_view text);

// Normalized single-token form of a cell value: tokenize and join with '_'.
std::string normalize_value(std::string_view raw);

std::string join(const Tokens& tokens, std::string_view sep = " ");

// Set of entity surface forms (underscore-joined). merge() rewrites a token
// sequence so every multi-word occurrence of an entity becomes its single
// joined token, longest match first, scanning left to right.
class EntityLexicon {
 public:
  void add(const std::string& value);
  bool contains(const std::string& token) const { return values_.count(token) > 0; }
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  Tokens merge(const Tokens& tokens) const;

 private:
  std::unordered_set<std::string> values_;
  // first word -> split forms of multi-word entities, longest first
  std::unordered_map<std::string, std::vector<Tokens>> phrases_;
};

}  // namespace kbdial

#endif  // KBDIAL_TEXT_HPP_
