#include "kbdial/encoder.hpp"

namespace kbdial {

LstmState lstm_step(Var gate_input, const LstmState& prev, Var wh) {
  const std::size_t d = prev.h.rows();
  Var z = ad::add(gate_input, ad::matmul(wh, prev.h));
  Var i = ad::sigmoid(ad::slice_rows(z, 0, d));
  Var f = ad::sigmoid(ad::slice_rows(z, d, d));
  Var g = ad::tanh(ad::slice_rows(z, 2 * d, d));
  Var o = ad::sigmoid(ad::slice_rows(z, 3 * d, d));
  Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

EncoderOutput encode(const ModelVars& w, std::span<const std::size_t> ids, const ForwardMode& mode) {
  if (ids.empty()) throw ContractError("encode: empty input sequence");
  Graph& g = w.embedding.graph();
  const std::size_t d = w.enc_wh.cols();
  Var x = mode.apply(ad::embed_lookup(w.embedding, ids));
  Var gates = ad::add(ad::matmul(w.enc_wx, x), w.enc_b);
  LstmState state{g.constant(Tensor({d, 1}, 0.0)), g.constant(Tensor({d, 1}, 0.0))};
  std::vector<Var> hs;
  hs.reserve(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    Var gt = ids.size() == 1 ? gates : ad::slice_cols(gates, t, 1);
    state = lstm_step(gt, state, w.enc_wh);
    hs.push_back(state.h);
  }
  Var states = hs.size() == 1 ? hs[0] : ad::concat_cols(hs);
  return {mode.apply(states), state};
}

StateRepresentation state_representation(Var states, Var wa) {
  if (wa.rows() != states.rows())
    throw DimensionError("state_representation: W^A has " + std::to_string(wa.rows()) +
                         " rows but states have dimension " + std::to_string(states.rows()));
  // scores[k, t] = wa[:, k] . h_t
  Var scores = ad::matmul(ad::transpose(wa), states);
  Var attention = ad::softmax(scores, 1);
  Var memory = ad::matmul(states, ad::transpose(attention));
  return {memory, attention};
}

}  // namespace kbdial
