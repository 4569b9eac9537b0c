#ifndef KBDIAL_MODEL_HPP_
#define KBDIAL_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbdial/autodiff.hpp"
#include "kbdial/parameters.hpp"

namespace kbdial {

struct ModelConfig {
  std::size_t dim = 200;
  std::size_t word_count = 0;  // |V|
  std::size_t slot_count = 5;  // m, one per KB column
  double dropout = 0.75;
  bool copy = true;
  double init_range = 0.08;
  double embed_init_range = 0.08;
  double forget_bias = 1.0;

  std::size_t extended_size() const { return word_count + slot_count; }
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Owns the trainable arrays. Names:
//   embedding            (|V|+m) x d, shared by words, cells and column names
//   encoder.{wx,wh,b}    LSTM, gates ordered i,f,g,o
//   decoder.{wx,wh,b}
//   state.wa             d x m, one scoring vector per slot
//   kb.wc                d x 2d, cell encoder
//   kb.wcat              d x 2d, fuses state and KB summaries
//   input_attn.{w_enc,w_dec,v}, memory_attn.{w_mem,w_dec,v}
//   output.w             (|V|+m) x 3d
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Arrays trained by the RL-only first phase: embeddings, encoder, state
  // attention and cell encoder.
  std::vector<std::size_t> kb_attention_indices() const;

 private:
  ModelConfig config_;
  ParameterSet params_;
};

// Graph-side handles to every model array.
struct ModelVars {
  ModelVars(Graph& g, const Model& model);

  Var embedding;
  Var enc_wx, enc_wh, enc_b;
  Var dec_wx, dec_wh, dec_b;
  Var state_wa;
  Var kb_wc, kb_wcat;
  Var in_w_enc, in_w_dec, in_v;
  Var mem_w_mem, mem_w_dec, mem_v;
  Var out_w;
};

// Dropout switch for a forward pass. rng may be null when train is false.
struct ForwardMode {
  bool train = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var apply(Var x) const;
};

}  // namespace kbdial

#endif  // KBDIAL_MODEL_HPP_
