#ifndef KBDIAL_DECODER_HPP_
#define KBDIAL_DECODER_HPP_

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbdial/corpus.hpp"
#include "kbdial/encoder.hpp"
#include "kbdial/model.hpp"

namespace kbdial {

struct Attention {
  Var weights;  // 1 x n
  Var context;  // d x 1
};

// score_i = v . tanh(projected_keys[:, i] + w_query * query); the context is
// the softmax-weighted sum of the key columns.
Attention additive_attention(Var keys, Var projected_keys, Var w_query, Var v, Var query);

// Attention over encoder states (input attention) and over the fused memory
// columns (memory attention). Both project their keys on the fly; the decoder
// loop projects once per turn and calls additive_attention directly.
Attention input_attention(Var states, Var h_dec, Var w_enc, Var w_dec, Var v);
Attention memory_attention(Var memory, Var h_dec, Var w_mem, Var w_dec, Var v);

// Maps the KB of one turn into the final output space: ids [0, |V|) are the
// words, followed by the KB cell values that are not words.
class CopyMap {
 public:
  CopyMap(const KBTable& kb, const Vocabulary& vocab);
  // Raw form: cell_targets holds |T|*m final-space indices, row-major.
  CopyMap(std::size_t word_count, std::size_t entries, std::size_t columns,
          std::vector<std::size_t> cell_targets, std::vector<std::string> extra_tokens);

  std::size_t word_count() const { return word_count_; }
  std::size_t size() const { return word_count_ + extras_.size(); }
  std::size_t entries() const { return entries_; }
  std::size_t columns() const { return columns_; }
  std::span<const std::size_t> cell_targets() const { return cell_targets_; }
  const std::vector<std::string>& extra_tokens() const { return extras_; }

  // Final-space index of a token: word id, KB extra, else <unk>.
  std::size_t index_of(const std::string& token, const Vocabulary& vocab) const;
  std::string token(std::size_t index, const Vocabulary& vocab) const;

 private:
  std::size_t word_count_ = 0;
  std::size_t entries_ = 0;
  std::size_t columns_ = 0;
  std::vector<std::size_t> cell_targets_;
  std::vector<std::string> extras_;
};

// softmax(W^O features) over words and slot types, one column per step.
// Without copying the slot rows are dropped and the softmax covers words only.
Var output_distribution(Var out_w, Var features, std::size_t word_count, bool copy);

// final[y] = extended[y] + sum_c extended[slot c] * sum_k [cell(k,c) = y] p_k,
// over the final space of `map`. extended is (|V|+m) x steps.
Var copy_redistribute(Var extended, Var entry_probs, const CopyMap& map);

// Keys and initial state the decoder needs for one turn.
struct DecoderContext {
  Var states, states_proj;  // H^ENC and W_enc H^ENC
  Var memory, memory_proj;  // U and W_mem U
  LstmState init;
  Var entry_probs;
};

DecoderContext make_decoder_context(const ModelVars& w, const EncoderOutput& enc, Var memory,
                                    Var entry_probs);

struct StepOutput {
  LstmState state;
  Attention input;
  Attention memory;
  Var features;  // [h; c_in; c_mem], 3d x 1
};

// One decoder step: LSTM update on gate_input (Wx*emb + b), then both
// attentions over the dropout-applied hidden state.
StepOutput decoder_step(const ModelVars& w, const DecoderContext& ctx, Var gate_input,
                        const LstmState& prev, const ForwardMode& mode);

struct TeacherForced {
  Var extended;  // (|V|+m) x steps, or |V| x steps without copying
  Var final_probs;  // final space x steps; equals extended without copying
  std::vector<StepOutput> steps;
};

TeacherForced decode_teacher_forced(const ModelVars& w, const DecoderContext& ctx,
                                    std::span<const std::size_t> input_ids,
                                    const ForwardMode& mode, std::size_t word_count,
                                    const CopyMap* copy_map);

struct DecodeStepTrace {
  std::string token;
  std::size_t index = 0;  // final-space index
  double probability = 0.0;
  std::vector<double> input_attention;
  std::vector<double> memory_attention;
  double extended_mass = 0.0;
  double final_mass = 0.0;
};

struct DecodeTrace {
  std::vector<std::string> input_tokens;
  std::vector<std::string> slots;
  std::vector<std::vector<double>> state_attention;  // m x n
  std::vector<double> entry_probs;                   // |T|
  std::vector<std::string> entry_ids;                // subject value of each row
  std::vector<DecodeStepTrace> steps;
  std::vector<std::string> tokens;  // emitted tokens, <eos> excluded

  nlohmann::json to_json() const;
  static DecodeTrace from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kMaxDecodeLength = 60;

struct DecodeResult {
  std::vector<std::string> tokens;
  DecodeTrace trace;
};

// Greedy decoding: start at <bos>, feed back the argmax of the final
// distribution (lowest index on ties), stop at <eos> or max_len tokens.
DecodeResult decode_greedy(const Model& model, const Vocabulary& vocab, const KBTable& kb,
                           const Tokens& input, std::size_t max_len = kMaxDecodeLength);

// Cell value ids for encode_table: word ids, <unk> for unknown values.
std::vector<std::size_t> kb_value_ids(const KBTable& kb, const Vocabulary& vocab);
std::vector<std::size_t> kb_column_ids(const KBTable& kb, const Vocabulary& vocab);

}  // namespace kbdial

#endif  // KBDIAL_DECODER_HPP_
