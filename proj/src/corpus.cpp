#include "kbdial/corpus.hpp"

#include "kbdial/tensor.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace kbdial {

using nlohmann::json;

Domain parse_domain(const std::string& name) {
  if (name == "navigate" || name == "navigation") return Domain::navigation;
  if (name == "weather") return Domain::weather;
  throw ParseError("unknown domain: " + name);
}

std::string domain_name(Domain d) { return d == Domain::navigation ? "navigate" : "weather"; }

const std::vector<std::string>& domain_columns(Domain d) {
  static const std::vector<std::string> nav = {"poi", "traffic_info", "poi_type", "address",
                                               "distance"};
  static const std::vector<std::string> weather = {"location", "date", "highest_temperature",
                                                   "lowest_temperature", "weather_attribute"};
  return d == Domain::navigation ? nav : weather;
}

std::string slot_token(const std::string& column) { return "<" + column + ">"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw ParseError("unknown split: " + name);
}

std::optional<std::size_t> KBTable::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  return std::nullopt;
}

EntityLexicon KBTable::lexicon() const {
  EntityLexicon lex;
  for (const auto& row : rows)
    for (const auto& v : row)
      if (v != kNoneToken) lex.add(v);
  return lex;
}

json kb_to_json(const KBTable& kb) {
  json j;
  j["domain"] = domain_name(kb.domain);
  j["columns"] = kb.columns;
  j["rows"] = kb.rows;
  return j;
}

KBTable kb_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("kb: expected an object with columns and rows");
  KBTable kb;
  if (j.contains("domain")) kb.domain = parse_domain(j.at("domain").get<std::string>());
  if (!j.contains("columns") || !j["columns"].is_array() || j["columns"].empty())
    throw ParseError("kb: missing or empty \"columns\" array");
  for (const auto& c : j["columns"]) {
    if (!c.is_string()) throw ParseError("kb: column names must be strings");
    kb.columns.push_back(normalize_value(c.get<std::string>()));
  }
  if (!j.contains("rows") || !j["rows"].is_array() || j["rows"].empty())
    throw ParseError("kb: missing or empty \"rows\" array");
  const std::size_t m = kb.columns.size();
  std::size_t index = 0;
  for (const auto& r : j["rows"]) {
    std::vector<std::string> row(m, kNoneToken);
    if (r.is_array()) {
      if (r.size() != m)
        throw ParseError("kb: row " + std::to_string(index) + " has " + std::to_string(r.size()) +
                         " cells but there are " + std::to_string(m) + " columns");
      for (std::size_t c = 0; c < m; ++c) {
        if (!r[c].is_string())
          throw ParseError("kb: row " + std::to_string(index) + " column \"" + kb.columns[c] +
                           "\" is not a string");
        auto v = normalize_value(r[c].get<std::string>());
        if (!v.empty()) row[c] = v;
      }
    } else if (r.is_object()) {
      for (auto it = r.begin(); it != r.end(); ++it) {
        auto c = kb.column_index(normalize_value(it.key()));
        if (!c)
          throw ParseError("kb: row " + std::to_string(index) + " has unknown column \"" +
                           it.key() + "\"");
        if (!it.value().is_string())
          throw ParseError("kb: row " + std::to_string(index) + " column \"" + it.key() +
                           "\" is not a string");
        auto v = normalize_value(it.value().get<std::string>());
        if (!v.empty()) row[*c] = v;
      }
    } else {
      throw ParseError("kb: row " + std::to_string(index) + " must be an array or object");
    }
    kb.rows.push_back(std::move(row));
    ++index;
  }
  return kb;
}

Forecast parse_forecast(const std::string& text) {
  Forecast f;
  Tokens attribute;
  std::stringstream ss(text);
  std::string segment;
  while (std::getline(ss, segment, ',')) {
    Tokens toks = tokenize(segment);
    if (toks.empty()) continue;
    if (toks.size() >= 3 && toks[1] == "of" && (toks[0] == "low" || toks[0] == "high")) {
      Tokens rest(toks.begin() + 2, toks.end());
      (toks[0] == "low" ? f.lowest : f.highest) = join(rest, "_");
    } else {
      attribute.insert(attribute.end(), toks.begin(), toks.end());
    }
  }
  if (f.lowest.empty() || f.highest.empty())
    throw ParseError("forecast \"" + text + "\" lacks a low or high temperature");
  f.attribute = attribute.empty() ? kNoneToken : join(attribute, "_");
  return f;
}

namespace {

const std::vector<std::string>& weekdays() {
  static const std::vector<std::string> days = {"monday", "tuesday", "wednesday", "thursday",
                                                "friday", "saturday", "sunday"};
  return days;
}

std::string cell_string(const json& item, const std::string& key) {
  if (!item.contains(key) || item[key].is_null()) return kNoneToken;
  if (!item[key].is_string()) throw ParseError("field \"" + key + "\" is not a string");
  auto v = normalize_value(item[key].get<std::string>());
  return v.empty() ? kNoneToken : v;
}

KBTable parse_kb(const json& items, Domain domain, const std::string& dialogue_id) {
  KBTable kb;
  kb.domain = domain;
  kb.columns = domain_columns(domain);
  try {
    for (const auto& item : items) {
      if (!item.is_object()) throw ParseError("KB item is not an object");
      if (domain == Domain::navigation) {
        if (!item.contains("poi") || item["poi"].is_null())
          throw ParseError("KB row missing subject field \"poi\"");
        std::vector<std::string> row;
        for (const auto& c : kb.columns) row.push_back(cell_string(item, c));
        kb.rows.push_back(std::move(row));
      } else {
        if (!item.contains("location") || item["location"].is_null())
          throw ParseError("KB row missing subject field \"location\"");
        const std::string location = cell_string(item, "location");
        for (const auto& day : weekdays()) {
          if (!item.contains(day) || item[day].is_null()) continue;
          const Forecast f = parse_forecast(item[day].get<std::string>());
          kb.rows.push_back({location, day, f.highest, f.lowest, f.attribute});
        }
      }
    }
  } catch (const ParseError& e) {
    throw ParseError("dialogue " + dialogue_id + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError("dialogue " + dialogue_id + ": " + e.what());
  }
  return kb;
}

}  // namespace

std::vector<Dialogue> parse_kvret(const json& root, Domain domain, Split split) {
  if (!root.is_array()) throw ParseError("KVRET file must hold a JSON array of dialogues");
  std::vector<Dialogue> out;
  std::size_t index = 0;
  for (const auto& entry : root) {
    const std::size_t this_index = index++;
    if (!entry.is_object() || !entry.contains("scenario") || !entry.contains("dialogue"))
      throw ParseError("dialogue #" + std::to_string(this_index) +
                       ": missing \"scenario\" or \"dialogue\"");
    const json& scenario = entry["scenario"];
    std::string id = scenario.value("uuid", std::string());
    if (id.empty()) id = "#" + std::to_string(this_index);
    std::string intent;
    try {
      intent = scenario.at("task").at("intent").get<std::string>();
    } catch (const json::exception&) {
      throw ParseError("dialogue " + id + ": missing scenario.task.intent");
    }
    if (intent != domain_name(domain)) continue;

    const json* items = nullptr;
    if (scenario.contains("kb") && scenario["kb"].is_object() && scenario["kb"].contains("items"))
      items = &scenario["kb"]["items"];
    if (!items || !items->is_array() || items->empty()) continue;

    auto kb = std::make_shared<KBTable>(parse_kb(*items, domain, id));
    if (kb->rows.empty()) continue;
    const EntityLexicon lex = kb->lexicon();

    Dialogue d;
    d.id = id;
    d.split = split;
    d.kb = kb;
    if (!entry["dialogue"].is_array())
      throw ParseError("dialogue " + id + ": \"dialogue\" is not an array");
    for (const auto& turn : entry["dialogue"]) {
      std::string who = turn.value("turn", std::string());
      Speaker sp;
      if (who == "driver") sp = Speaker::driver;
      else if (who == "assistant" || who == "car") sp = Speaker::car;
      else throw ParseError("dialogue " + id + ": unknown speaker \"" + who + "\"");
      std::string utt;
      if (turn.contains("data") && turn["data"].contains("utterance") &&
          turn["data"]["utterance"].is_string())
        utt = turn["data"]["utterance"].get<std::string>();
      Tokens toks = lex.merge(tokenize(utt));
      if (toks.empty()) continue;
      if (!d.turns.empty() && d.turns.back().speaker == sp) {
        auto& prev = d.turns.back().tokens;
        prev.insert(prev.end(), toks.begin(), toks.end());
      } else {
        d.turns.push_back({sp, std::move(toks)});
      }
    }
    const bool has_car = std::any_of(d.turns.begin(), d.turns.end(),
                                     [](const Turn& t) { return t.speaker == Speaker::car; });
    if (has_car) out.push_back(std::move(d));
  }
  return out;
}

std::vector<Dialogue> load_kvret(const std::filesystem::path& path, Domain domain, Split split) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_kvret(root, domain, split);
}

Tokens delexicalize(const Tokens& tokens, const KBTable& kb) {
  std::unordered_map<std::string, std::string> slot_of;
  for (std::size_t c = 0; c < kb.columns.size(); ++c)
    for (const auto& row : kb.rows)
      if (row[c] != kNoneToken) slot_of.emplace(row[c], slot_token(kb.columns[c]));
  Tokens merged = kb.lexicon().merge(tokens);
  for (auto& t : merged)
    if (auto it = slot_of.find(t); it != slot_of.end()) t = it->second;
  return merged;
}

std::vector<Instance> build_instances(const std::vector<Dialogue>& dialogues, bool augment) {
  std::vector<Instance> out;
  const auto& special = Vocabulary::special_tokens();
  for (const auto& d : dialogues) {
    Tokens history;
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const Turn& turn = d.turns[t];
      if (turn.speaker == Speaker::car && !history.empty()) {
        Instance inst;
        inst.dialogue_id = d.id;
        inst.turn_index = t;
        inst.input = history;
        inst.target = turn.tokens;
        inst.target.push_back(special[Vocabulary::kEos]);
        inst.kb = d.kb;
        Tokens delex;
        if (augment) delex = delexicalize(turn.tokens, *d.kb);
        const bool add_delex = augment && delex != turn.tokens;
        out.push_back(inst);
        if (add_delex) {
          inst.target = std::move(delex);
          inst.target.push_back(special[Vocabulary::kEos]);
          inst.delexicalized = true;
          out.push_back(std::move(inst));
        }
      }
      history.push_back(special[turn.speaker == Speaker::driver ? Vocabulary::kDriver
                                                                : Vocabulary::kCar]);
      history.insert(history.end(), turn.tokens.begin(), turn.tokens.end());
    }
  }
  return out;
}

json instance_to_json(const Instance& inst) {
  json j;
  j["dialogue_id"] = inst.dialogue_id;
  j["turn"] = inst.turn_index;
  j["input"] = inst.input;
  j["target"] = inst.target;
  j["delexicalized"] = inst.delexicalized;
  j["kb_rows"] = inst.kb ? inst.kb->row_count() : 0;
  return j;
}

const std::vector<std::string>& Vocabulary::special_tokens() {
  static const std::vector<std::string> tokens = {"<pad>",    "<bos>", "<eos>", "<unk>",
                                                  "<driver>", "<car>", "<none>"};
  return tokens;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> words,
                                   const std::vector<std::string>& columns) {
  Vocabulary v;
  const auto& special = special_tokens();
  for (const auto& s : special) {
    v.index_.emplace(s, v.tokens_.size());
    v.tokens_.push_back(s);
  }
  for (auto& w : words) {
    if (v.index_.count(w)) continue;
    v.index_.emplace(w, v.tokens_.size());
    v.tokens_.push_back(std::move(w));
  }
  v.word_count_ = v.tokens_.size();
  for (const auto& c : columns) {
    auto s = slot_token(c);
    if (v.index_.count(s)) throw ContractError("slot token collides with a word: " + s);
    v.index_.emplace(s, v.tokens_.size());
    v.tokens_.push_back(std::move(s));
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<Dialogue>& train,
                             const std::vector<std::string>& columns, std::size_t min_dialogues) {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::size_t> spread;  // dialogues containing the token
  for (const auto& d : train) {
    if (d.split != Split::train)
      throw ParseError("vocabulary must be built from the train split only (dialogue " + d.id + ")");
    std::set<std::string> here;
    for (const auto& t : d.turns)
      for (const auto& tok : t.tokens) {
        ++counts[tok];
        here.insert(tok);
      }
    for (const auto& row : d.kb->rows)
      for (const auto& v : row) {
        ++counts[v];
        here.insert(v);
      }
    for (const auto& tok : here) ++spread[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> sorted;
  for (const auto& [w, n] : counts)
    if (spread[w] >= min_dialogues) sorted.emplace_back(w, n);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  words.reserve(sorted.size());
  for (auto& [w, n] : sorted) words.push_back(w);
  return from_tokens(std::move(words), columns);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path,
                            const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  const auto& special = special_tokens();
  if (lines.size() < special.size() + columns.size())
    throw ParseError("vocabulary " + path.string() + " is too short");
  for (std::size_t i = 0; i < special.size(); ++i)
    if (lines[i] != special[i])
      throw ParseError("vocabulary " + path.string() + ": line " + std::to_string(i + 1) +
                       " should be " + special[i]);
  const std::size_t words_end = lines.size() - columns.size();
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (lines[words_end + c] != slot_token(columns[c]))
      throw ParseError("vocabulary " + path.string() + ": expected slot token " +
                       slot_token(columns[c]) + " at line " + std::to_string(words_end + c + 1));
  std::vector<std::string> words(lines.begin() + static_cast<long>(special.size()),
                                 lines.begin() + static_cast<long>(words_end));
  return from_tokens(std::move(words), columns);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::optional<std::size_t> Vocabulary::find_word(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end() || it->second >= word_count_) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= '\n';
    h *= 1099511628211ull;
  }
  return h;
}

double oov_rate(const std::vector<Instance>& instances, const Vocabulary& vocab) {
  std::size_t total = 0, oov = 0;
  for (const auto& inst : instances) {
    for (const auto* seq : {&inst.input, &inst.target})
      for (const auto& t : *seq) {
        ++total;
        if (vocab.id(t) == Vocabulary::kUnk && t != "<unk>") ++oov;
      }
  }
  return total ? static_cast<double>(oov) / static_cast<double>(total) : 0.0;
}

}  // namespace kbdial
