#ifndef KBDIAL_ENCODER_HPP_
#define KBDIAL_ENCODER_HPP_

#include <span>

#include "kbdial/model.hpp"

namespace kbdial {

struct LstmState {
  Var h;  // d x 1
  Var c;  // d x 1
};

// One LSTM step. gate_input is the precomputed Wx*x + b column (4d x 1).
LstmState lstm_step(Var gate_input, const LstmState& prev, Var wh);

struct EncoderOutput {
  Var states;  // d x n, one column per input token (after output dropout)
  LstmState final;
};

// Runs the encoder LSTM over the token ids. Dropout is applied to the
// embedded inputs and the emitted states when mode.train is set.
EncoderOutput encode(const ModelVars& w, std::span<const std::size_t> ids, const ForwardMode& mode);

struct StateRepresentation {
  Var memory;     // U^IN, d x m
  Var attention;  // m x n, row k is the softmax of slot k's scores
};

// Slot k scores every encoder state with column k of wa (d x m) and takes
// the softmax-weighted average of the states.
StateRepresentation state_representation(Var states, Var wa);

}  // namespace kbdial

#endif  // KBDIAL_ENCODER_HPP_
