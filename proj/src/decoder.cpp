#include "kbdial/decoder.hpp"

#include <unordered_map>

#include "kbdial/kb_attention.hpp"

namespace kbdial {

Attention additive_attention(Var keys, Var projected_keys, Var w_query, Var v, Var query) {
  Var q = ad::matmul(w_query, query);
  Var scores = ad::matmul(v, ad::tanh(ad::add(projected_keys, q)));
  Var weights = ad::softmax(scores, 1);
  Var context = ad::matmul(keys, ad::transpose(weights));
  return {weights, context};
}

Attention input_attention(Var states, Var h_dec, Var w_enc, Var w_dec, Var v) {
  return additive_attention(states, ad::matmul(w_enc, states), w_dec, v, h_dec);
}

Attention memory_attention(Var memory, Var h_dec, Var w_mem, Var w_dec, Var v) {
  return additive_attention(memory, ad::matmul(w_mem, memory), w_dec, v, h_dec);
}

CopyMap::CopyMap(const KBTable& kb, const Vocabulary& vocab)
    : word_count_(vocab.word_count()), entries_(kb.row_count()), columns_(kb.column_count()) {
  std::unordered_map<std::string, std::size_t> extra_index;
  cell_targets_.reserve(entries_ * columns_);
  for (const auto& row : kb.rows) {
    for (const auto& value : row) {
      if (auto id = vocab.find_word(value)) {
        cell_targets_.push_back(*id);
        continue;
      }
      auto [it, inserted] = extra_index.emplace(value, word_count_ + extras_.size());
      if (inserted) extras_.push_back(value);
      cell_targets_.push_back(it->second);
    }
  }
}

CopyMap::CopyMap(std::size_t word_count, std::size_t entries, std::size_t columns,
                 std::vector<std::size_t> cell_targets, std::vector<std::string> extra_tokens)
    : word_count_(word_count),
      entries_(entries),
      columns_(columns),
      cell_targets_(std::move(cell_targets)),
      extras_(std::move(extra_tokens)) {
  if (cell_targets_.size() != entries_ * columns_)
    throw DimensionError("CopyMap: cell target count does not match entries x columns");
  for (auto t : cell_targets_)
    if (t >= size()) throw DimensionError("CopyMap: cell target outside the output space");
}

std::size_t CopyMap::index_of(const std::string& token, const Vocabulary& vocab) const {
  if (auto id = vocab.find_word(token)) return *id;
  for (std::size_t i = 0; i < extras_.size(); ++i)
    if (extras_[i] == token) return word_count_ + i;
  return Vocabulary::kUnk;
}

std::string CopyMap::token(std::size_t index, const Vocabulary& vocab) const {
  if (index < word_count_) return vocab.token(index);
  return extras_.at(index - word_count_);
}

Var output_distribution(Var out_w, Var features, std::size_t word_count, bool copy) {
  Var logits = ad::matmul(out_w, features);
  if (!copy) logits = ad::slice_rows(logits, 0, word_count);
  return ad::softmax(logits, 0);
}

Var copy_redistribute(Var extended, Var entry_probs, const CopyMap& map) {
  const std::size_t words = map.word_count(), m = map.columns(), n = map.entries();
  if (extended.rows() != words + m)
    throw DimensionError("copy_redistribute: extended distribution has " +
                         std::to_string(extended.rows()) + " rows, expected " +
                         std::to_string(words + m));
  if (entry_probs.rows() != n || entry_probs.cols() != 1)
    throw DimensionError("copy_redistribute: entry distribution does not match the KB");
  Graph& g = extended.graph();
  const std::size_t steps = extended.cols();
  Var generated = ad::slice_rows(extended, 0, words);
  if (map.size() > words) {
    const Var parts[] = {generated, g.constant(Tensor({map.size() - words, steps}, 0.0))};
    generated = ad::concat_rows(parts);
  }
  Var slots = ad::slice_rows(extended, words, m);
  std::vector<std::pair<std::size_t, std::size_t>> spread;
  spread.reserve(n * m);
  const auto targets = map.cell_targets();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t c = 0; c < m; ++c) spread.emplace_back(k, targets[k * m + c] * m + c);
  Var value_given_slot = ad::scatter_add(entry_probs, {map.size(), m}, spread);
  return ad::add(generated, ad::matmul(value_given_slot, slots));
}

DecoderContext make_decoder_context(const ModelVars& w, const EncoderOutput& enc, Var memory,
                                    Var entry_probs) {
  DecoderContext ctx;
  ctx.states = enc.states;
  ctx.states_proj = ad::matmul(w.in_w_enc, enc.states);
  ctx.memory = memory;
  ctx.memory_proj = ad::matmul(w.mem_w_mem, memory);
  ctx.init = enc.final;
  ctx.entry_probs = entry_probs;
  return ctx;
}

StepOutput decoder_step(const ModelVars& w, const DecoderContext& ctx, Var gate_input,
                        const LstmState& prev, const ForwardMode& mode) {
  StepOutput out;
  out.state = lstm_step(gate_input, prev, w.dec_wh);
  Var h = mode.apply(out.state.h);
  out.input = additive_attention(ctx.states, ctx.states_proj, w.in_w_dec, w.in_v, h);
  out.memory = additive_attention(ctx.memory, ctx.memory_proj, w.mem_w_dec, w.mem_v, h);
  const Var parts[] = {h, out.input.context, out.memory.context};
  out.features = ad::concat_rows(parts);
  return out;
}

TeacherForced decode_teacher_forced(const ModelVars& w, const DecoderContext& ctx,
                                    std::span<const std::size_t> input_ids,
                                    const ForwardMode& mode, std::size_t word_count,
                                    const CopyMap* copy_map) {
  if (input_ids.empty()) throw ContractError("decode_teacher_forced: no decoder inputs");
  Var x = mode.apply(ad::embed_lookup(w.embedding, input_ids));
  Var gates = ad::add(ad::matmul(w.dec_wx, x), w.dec_b);
  TeacherForced out;
  out.steps.reserve(input_ids.size());
  LstmState state = ctx.init;
  std::vector<Var> features;
  for (std::size_t t = 0; t < input_ids.size(); ++t) {
    Var gt = input_ids.size() == 1 ? gates : ad::slice_cols(gates, t, 1);
    out.steps.push_back(decoder_step(w, ctx, gt, state, mode));
    state = out.steps.back().state;
    features.push_back(out.steps.back().features);
  }
  Var all = features.size() == 1 ? features[0] : ad::concat_cols(features);
  out.extended = output_distribution(w.out_w, all, word_count, copy_map != nullptr);
  out.final_probs = copy_map ? copy_redistribute(out.extended, ctx.entry_probs, *copy_map)
                             : out.extended;
  return out;
}

std::vector<std::size_t> kb_value_ids(const KBTable& kb, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(kb.row_count() * kb.column_count());
  for (const auto& row : kb.rows)
    for (const auto& v : row) ids.push_back(vocab.word_id(v));
  return ids;
}

std::vector<std::size_t> kb_column_ids(const KBTable& kb, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  for (const auto& c : kb.columns) {
    const std::size_t id = vocab.id(slot_token(c));
    if (!vocab.is_slot(id)) throw ContractError("KB column \"" + c + "\" is not a model slot");
    ids.push_back(id);
  }
  return ids;
}

namespace {
std::vector<double> row_values(const Tensor& t, std::size_t r) {
  std::vector<double> out(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) out[j] = t.at(r, j);
  return out;
}

double total(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}
}  // namespace

DecodeResult decode_greedy(const Model& model, const Vocabulary& vocab, const KBTable& kb,
                           const Tokens& input, std::size_t max_len) {
  const ModelConfig& cfg = model.config();
  if (kb.column_count() != cfg.slot_count)
    throw ContractError("KB has " + std::to_string(kb.column_count()) + " columns, model expects " +
                        std::to_string(cfg.slot_count));
  Graph g = Graph::inference();
  ModelVars w(g, model);
  const ForwardMode eval;
  const auto ids = vocab.encode(input);
  const EncoderOutput enc = encode(w, ids, eval);
  const StateRepresentation state = state_representation(enc.states, w.state_wa);
  const auto values = kb_value_ids(kb, vocab);
  const auto columns = kb_column_ids(kb, vocab);
  const TableEncoding table = encode_table(w.embedding, w.kb_wc, values, columns);
  const KBQueryResult kbq = query(table, state.memory, w.kb_wcat);
  const DecoderContext ctx = make_decoder_context(w, enc, kbq.memory, kbq.entry_probs);
  const CopyMap map(kb, vocab);

  DecodeResult result;
  DecodeTrace& trace = result.trace;
  trace.input_tokens = input;
  for (const auto& c : kb.columns) trace.slots.push_back(c);
  const Tensor& att = state.attention.value();
  for (std::size_t k = 0; k < att.rows(); ++k) trace.state_attention.push_back(row_values(att, k));
  const Tensor& probs = kbq.entry_probs.value();
  trace.entry_probs.assign(probs.values().begin(), probs.values().end());
  for (const auto& row : kb.rows) trace.entry_ids.push_back(row.front());

  LstmState st = ctx.init;
  std::size_t prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    const std::size_t feed[] = {prev};
    Var x = ad::embed_lookup(w.embedding, feed);
    Var gate = ad::add(ad::matmul(w.dec_wx, x), w.dec_b);
    StepOutput step = decoder_step(w, ctx, gate, st, eval);
    st = step.state;
    Var ext = output_distribution(w.out_w, step.features, cfg.word_count, cfg.copy);
    Var fin = cfg.copy ? copy_redistribute(ext, kbq.entry_probs, map) : ext;
    const Tensor& fp = fin.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < fp.size(); ++i)
      if (fp[i] > fp[best]) best = i;
    if (best == Vocabulary::kEos) break;
    DecodeStepTrace s;
    s.index = best;
    s.token = map.token(best, vocab);
    s.probability = fp[best];
    s.input_attention = row_values(step.input.weights.value(), 0);
    s.memory_attention = row_values(step.memory.weights.value(), 0);
    s.extended_mass = total(ext.value());
    s.final_mass = total(fp);
    result.tokens.push_back(s.token);
    trace.steps.push_back(std::move(s));
    prev = best < cfg.word_count ? best : Vocabulary::kUnk;
  }
  trace.tokens = result.tokens;
  return result;
}

nlohmann::json DecodeTrace::to_json() const {
  nlohmann::json j;
  j["tokens"] = tokens;
  j["input_tokens"] = input_tokens;
  j["slots"] = slots;
  j["state_attention"] = state_attention;
  j["entry_probs"] = entry_probs;
  j["entry_ids"] = entry_ids;
  auto in = nlohmann::json::array();
  auto mem = nlohmann::json::array();
  auto probs = nlohmann::json::array();
  for (const auto& s : steps) {
    in.push_back(s.input_attention);
    mem.push_back(s.memory_attention);
    probs.push_back(s.probability);
  }
  j["input_attention"] = in;
  j["memory_attention"] = mem;
  j["token_probs"] = probs;
  return j;
}

DecodeTrace DecodeTrace::from_json(const nlohmann::json& j) {
  DecodeTrace t;
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  t.input_tokens = j.at("input_tokens").get<std::vector<std::string>>();
  t.slots = j.at("slots").get<std::vector<std::string>>();
  t.state_attention = j.at("state_attention").get<std::vector<std::vector<double>>>();
  t.entry_probs = j.at("entry_probs").get<std::vector<double>>();
  t.entry_ids = j.at("entry_ids").get<std::vector<std::string>>();
  const auto& in = j.at("input_attention");
  const auto& mem = j.at("memory_attention");
  const auto& probs = j.at("token_probs");
  for (std::size_t i = 0; i < in.size(); ++i) {
    DecodeStepTrace s;
    s.token = t.tokens.at(i);
    s.input_attention = in[i].get<std::vector<double>>();
    s.memory_attention = mem[i].get<std::vector<double>>();
    s.probability = probs[i].get<double>();
    t.steps.push_back(std::move(s));
  }
  return t;
}

}  // namespace kbdial
