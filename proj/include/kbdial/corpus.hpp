#ifndef KBDIAL_CORPUS_HPP_
#define KBDIAL_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kbdial/text.hpp"

namespace kbdial {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Domain { navigation, weather };

// Accepts "navigate"/"navigation" and "weather".
Domain parse_domain(const std::string& name);
std::string domain_name(Domain d);
// Slot columns of a domain, in table order.
const std::vector<std::string>& domain_columns(Domain d);
std::string slot_token(const std::string& column);

inline const std::string kNoneToken = "<none>";

struct KBTable {
  Domain domain = Domain::navigation;
  std::vector<std::string> columns;
  // rows[k][c] is the single-token value of column c in entry k.
  std::vector<std::vector<std::string>> rows;

  std::size_t column_count() const { return columns.size(); }
  std::size_t row_count() const { return rows.size(); }
  std::optional<std::size_t> column_index(const std::string& name) const;
  EntityLexicon lexicon() const;
};

nlohmann::json kb_to_json(const KBTable& kb);
// Accepts {"domain"?, "columns": [...], "rows": [[...]] or [{col: value}]}.
// Raw values are normalized; missing cells become <none>. Throws ParseError
// naming the offending column.
KBTable kb_from_json(const nlohmann::json& j);

enum class Speaker { driver, car };
enum class Split { train, dev, test };
Split parse_split(const std::string& name);

struct Turn {
  Speaker speaker = Speaker::driver;
  Tokens tokens;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
  std::shared_ptr<const KBTable> kb;
  Split split = Split::train;
};

// KVRET JSON: an array of {"dialogue": [...turns...], "scenario": {"kb":
// {"items": [...]}, "task": {"intent": ...}, "uuid": ...}}. Dialogues of other
// intents are skipped, as are dialogues without KB items or without an
// assistant turn. Consecutive turns of one speaker are merged.
std::vector<Dialogue> parse_kvret(const nlohmann::json& root, Domain domain, Split split);
std::vector<Dialogue> load_kvret(const std::filesystem::path& path, Domain domain, Split split);

// Parses "<attr phrases>, low of <t>F, high of <t>F" into
// {weather_attribute, lowest, highest}.
struct Forecast {
  std::string attribute;
  std::string lowest;
  std::string highest;
};
Forecast parse_forecast(const std::string& text);

// Replaces tokens equal to a cell value of kb with the slot token of that
// cell's column (first column in table order on ties).
Tokens delexicalize(const Tokens& tokens, const KBTable& kb);

struct Instance {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  Tokens input;   // flattened history with <driver>/<car> prefixes
  Tokens target;  // response followed by <eos>
  std::shared_ptr<const KBTable> kb;
  bool delexicalized = false;
};

std::vector<Instance> build_instances(const std::vector<Dialogue>& dialogues, bool augment);
nlohmann::json instance_to_json(const Instance& inst);

// Word ids [0, word_count) followed by one slot-type id per KB column.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0, kBos = 1, kEos = 2, kUnk = 3, kDriver = 4, kCar = 5,
                               kNone = 6;
  static const std::vector<std::string>& special_tokens();

  // Built from training dialogues only: utterance tokens and KB cell values
  // that occur in at least min_dialogues dialogues.
  static Vocabulary build(const std::vector<Dialogue>& train,
                          const std::vector<std::string>& columns,
                          std::size_t min_dialogues = 1);
  static Vocabulary from_tokens(std::vector<std::string> words,
                                const std::vector<std::string>& columns);
  static Vocabulary load(const std::filesystem::path& path,
                         const std::vector<std::string>& columns);
  void save(const std::filesystem::path& path) const;

  std::size_t word_count() const { return word_count_; }
  std::size_t slot_count() const { return tokens_.size() - word_count_; }
  std::size_t size() const { return tokens_.size(); }

  std::optional<std::size_t> find_word(const std::string& token) const;
  std::size_t word_id(const std::string& token) const { return find_word(token).value_or(kUnk); }
  std::size_t slot_id(std::size_t column) const { return word_count_ + column; }
  bool is_slot(std::size_t id) const { return id >= word_count_ && id < tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  // Id of any token, slot tokens included; <unk> when unknown.
  std::size_t id(const std::string& token) const;

  std::vector<std::size_t> encode(const Tokens& tokens) const;
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t word_count_ = 0;
};

// Fraction of input and target tokens outside the vocabulary.
double oov_rate(const std::vector<Instance>& instances, const Vocabulary& vocab);

}  // namespace kbdial

#endif  // KBDIAL_CORPUS_HPP_
