#include "kbdial/text.hpp"

#include <algorithm>
#include <cctype>

namespace kbdial {

namespace {
bool is_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
    case '"': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

void split_word(const std::string& word, Tokens& out) {
  auto apos = word.find('\'');
  if (apos != std::string::npos && apos > 0) {
    out.push_back(word.substr(0, apos));
    out.push_back(word.substr(apos));
  } else {
    out.push_back(word);
  }
}
}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) split_word(word, out);
    word.clear();
  };
  for (char raw : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      word.push_back(c);
    }
  }
  flush();
  return out;
}

std::string join(const Tokens& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string normalize_value(std::string_view raw) { return join(tokenize(raw), "_"); }

void EntityLexicon::add(const std::string& value) {
  if (value.empty() || !values_.insert(value).second) return;
  Tokens parts;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto pos = value.find('_', start);
    if (pos == std::string::npos) pos = value.size();
    if (pos > start) parts.push_back(value.substr(start, pos - start));
    start = pos + 1;
  }
  if (parts.size() < 2) return;
  auto& bucket = phrases_[parts.front()];
  bucket.push_back(std::move(parts));
  std::stable_sort(bucket.begin(), bucket.end(),
                   [](const Tokens& a, const Tokens& b) { return a.size() > b.size(); });
}

Tokens EntityLexicon::merge(const Tokens& tokens) const {
  Tokens out;
  out.reserve(tokens.size());
  std::size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    if (auto it = phrases_.find(tokens[i]); it != phrases_.end()) {
      for (const auto& phrase : it->second) {
        if (i + phrase.size() > tokens.size()) continue;
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<long>(i))) {
          out.push_back(join(phrase, "_"));
          i += phrase.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out.push_back(tokens[i++]);
  }
  return out;
}

}  // namespace kbdial
