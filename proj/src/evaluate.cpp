#include "kbdial/evaluate.hpp"

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>

#include "kbdial/decoder.hpp"

namespace kbdial {

EntitySet extract_entities(const Tokens& tokens, const EntityLexicon& lexicon) {
  EntitySet out;
  for (const auto& t : lexicon.merge(tokens))
    if (lexicon.contains(t)) out.insert(t);
  return out;
}

EntityRecord score_entities(EntitySet gold, EntitySet predicted) {
  EntityRecord r;
  for (const auto& e : predicted) (gold.count(e) ? r.tp : r.fp)++;
  for (const auto& e : gold)
    if (!predicted.count(e)) ++r.fn;
  r.gold = std::move(gold);
  r.predicted = std::move(predicted);
  return r;
}

namespace {
double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}
}  // namespace

F1Scores entity_f1(const std::vector<EntityRecord>& records) {
  if (records.empty()) throw ContractError("entity_f1: empty corpus");
  F1Scores s;
  double macro_sum = 0.0;
  for (const auto& r : records) {
    s.tp += r.tp;
    s.fp += r.fp;
    s.fn += r.fn;
    if (r.gold.empty() && r.predicted.empty()) continue;
    macro_sum += f1(r.tp, r.fp, r.fn);
    ++s.macro_instances;
  }
  s.micro = 100.0 * f1(s.tp, s.fp, s.fn);
  s.macro = s.macro_instances ? 100.0 * macro_sum / static_cast<double>(s.macro_instances) : 0.0;
  return s;
}

double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  if (candidates.empty()) throw ContractError("corpus_bleu: empty candidate set");
  if (candidates.size() != references.size())
    throw ContractError("corpus_bleu: candidate and reference counts differ");
  constexpr std::size_t kMaxOrder = 4;
  std::uint64_t matches[kMaxOrder] = {}, totals[kMaxOrder] = {};
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const Tokens& c = candidates[s];
    const Tokens& r = references[s];
    cand_len += c.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      std::map<std::vector<std::string>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i)
        ++ref_counts[std::vector<std::string>(r.begin() + i, r.begin() + i + n)];
      std::map<std::vector<std::string>, std::size_t> cand_counts;
      for (std::size_t i = 0; i + n <= c.size(); ++i)
        ++cand_counts[std::vector<std::string>(c.begin() + i, c.begin() + i + n)];
      std::size_t grams = 0;
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        grams += count;
      }
      // a sentence too short for this order still adds 1 to the denominator (NLTK convention)
      totals[n - 1] += std::max<std::size_t>(grams, 1);
    }
  }
  if (cand_len == 0 || matches[0] == 0) return 0.0;
  double log_precision = 0.0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    const double total = static_cast<double>(totals[n]);
    const double hit = matches[n] ? static_cast<double>(matches[n]) : kBleuEpsilon;
    log_precision += std::log(hit / total) / static_cast<double>(kMaxOrder);
  }
  const double c = static_cast<double>(cand_len), r = static_cast<double>(ref_len);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_precision);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["bleu"] = bleu;
  j["micro_f1"] = micro_f1;
  j["macro_f1"] = macro_f1;
  j["instances"] = instances;
  auto per = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    per.push_back({{"dialogue_id", i < dialogue_ids.size() ? dialogue_ids[i] : ""},
                   {"reference", join(references[i])},
                   {"prediction", join(predictions[i])},
                   {"gold_entities", r.gold},
                   {"predicted_entities", r.predicted},
                   {"tp", r.tp},
                   {"fp", r.fp},
                   {"fn", r.fn}});
  }
  j["per_instance"] = per;
  return j;
}

std::string EvalReport::table_row(const std::string& label) const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << label << " | BLEU " << bleu << " | Macro F1 "
     << macro_f1 << " | Micro F1 " << micro_f1;
  return os.str();
}

namespace {

std::vector<const Instance*> scored_instances(const std::vector<Instance>& instances) {
  std::vector<const Instance*> out;
  for (const auto& inst : instances)
    if (!inst.delexicalized) out.push_back(&inst);
  return out;
}

Tokens strip_eos(const Tokens& t) {
  const auto& eos = Vocabulary::special_tokens()[Vocabulary::kEos];
  Tokens out = t;
  if (!out.empty() && out.back() == eos) out.pop_back();
  return out;
}

EvalReport score(const std::vector<const Instance*>& chosen, std::vector<Tokens> predictions,
                 const EvalOptions& options) {
  EvalReport report;
  report.instances = chosen.size();
  EntityLexicon global;
  if (options.global_lexicon)
    for (const auto* inst : chosen)
      for (const auto& row : inst->kb->rows)
        for (const auto& v : row)
          if (v != kNoneToken) global.add(v);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const Instance& inst = *chosen[i];
    const EntityLexicon lex = options.global_lexicon ? global : inst.kb->lexicon();
    Tokens ref = strip_eos(inst.target);
    report.records.push_back(
        score_entities(extract_entities(ref, lex), extract_entities(predictions[i], lex)));
    report.dialogue_ids.push_back(inst.dialogue_id);
    report.references.push_back(std::move(ref));
  }
  report.predictions = std::move(predictions);
  report.bleu = corpus_bleu(report.predictions, report.references);
  const F1Scores f = entity_f1(report.records);
  report.micro_f1 = f.micro;
  report.macro_f1 = f.macro;
  return report;
}

}  // namespace

EvalReport evaluate(const Model& model, const Vocabulary& vocab,
                    const std::vector<Instance>& instances, const EvalOptions& options) {
  const auto chosen = scored_instances(instances);
  if (chosen.empty()) throw ContractError("evaluate: no instances to score");
  std::vector<Tokens> predictions(chosen.size());
  const auto count = static_cast<std::int64_t>(chosen.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const Instance& inst = *chosen[static_cast<std::size_t>(i)];
    predictions[static_cast<std::size_t>(i)] =
        decode_greedy(model, vocab, *inst.kb, inst.input, options.max_len).tokens;
  }
  return score(chosen, std::move(predictions), options);
}

EvalReport score_predictions(const std::vector<Instance>& instances,
                             const std::vector<Tokens>& predictions, const EvalOptions& options) {
  const auto chosen = scored_instances(instances);
  if (chosen.empty()) throw ContractError("score_predictions: no instances to score");
  if (chosen.size() != predictions.size())
    throw ContractError("score_predictions: prediction count does not match instances");
  return score(chosen, predictions, options);
}

}  // namespace kbdial
