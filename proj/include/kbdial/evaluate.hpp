#ifndef KBDIAL_EVALUATE_HPP_
#define KBDIAL_EVALUATE_HPP_

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbdial/corpus.hpp"
#include "kbdial/model.hpp"
#include "kbdial/text.hpp"

namespace kbdial {

using EntitySet = std::set<std::string>;

// Entities mentioned in a response: lexicon members after multi-word merging.
EntitySet extract_entities(const Tokens& tokens, const EntityLexicon& lexicon);

struct EntityRecord {
  EntitySet gold;
  EntitySet predicted;
  std::size_t tp = 0, fp = 0, fn = 0;
};

EntityRecord score_entities(EntitySet gold, EntitySet predicted);

struct F1Scores {
  double micro = 0.0;  // percent, from pooled TP/FP/FN
  double macro = 0.0;  // percent, mean over instances with any entity
  std::size_t macro_instances = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Instances where neither side has an entity are left out of the macro
// average. An undefined score (nothing to average) is reported as 0.
// Throws ContractError on an empty list.
F1Scores entity_f1(const std::vector<EntityRecord>& records);

// Corpus BLEU-4 with uniform weights, clipped counts and the standard brevity
// penalty. A zero n-gram match count is replaced by kBleuEpsilon matches,
// a sentence with no n-grams of some order contributes 1 to that order's
// denominator, and a corpus without a single unigram match scores 0. These
// follow NLTK's corpus_bleu with smoothing method1. Returns a percentage.
inline constexpr double kBleuEpsilon = 0.1;
double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

struct EvalReport {
  double bleu = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t instances = 0;
  std::vector<std::string> dialogue_ids;
  std::vector<Tokens> references;
  std::vector<Tokens> predictions;
  std::vector<EntityRecord> records;

  nlohmann::json to_json() const;
  // "BLEU / Macro F1 / Micro F1" table row.
  std::string table_row(const std::string& label) const;
};

struct EvalOptions {
  // Match entities against every scenario's values instead of the
  // instance's own KB.
  bool global_lexicon = false;
  std::size_t max_len = 60;
};

// Greedy-decodes every non-delexicalized instance and scores it. Decoding
// runs in parallel across instances.
EvalReport evaluate(const Model& model, const Vocabulary& vocab,
                    const std::vector<Instance>& instances, const EvalOptions& options = {});

// Scores fixed predictions (one per instance) without decoding.
EvalReport score_predictions(const std::vector<Instance>& instances,
                             const std::vector<Tokens>& predictions,
                             const EvalOptions& options = {});

}  // namespace kbdial

#endif  // KBDIAL_EVALUATE_HPP_
