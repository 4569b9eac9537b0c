#ifndef KBDIAL_TRAINING_HPP_
#define KBDIAL_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbdial/checkpoint.hpp"
#include "kbdial/corpus.hpp"
#include "kbdial/decoder.hpp"
#include "kbdial/evaluate.hpp"
#include "kbdial/model.hpp"

namespace kbdial {

struct TrainConfig {
  std::size_t dim = 200;
  double embed_init = 0.08;
  double dropout = 0.75;
  double lr = 1e-3;
  double weight_decay = 5e-6;
  double clip_norm = 5.0;
  double lambda = 0.1;
  double baseline = 1.5;
  std::size_t batch_size = 32;
  std::size_t rl_epochs = 30;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  bool copy = true;
  bool rl = true;
  bool augment = false;
  // Single-sample REINFORCE instead of the exact expectation over entries.
  bool sampled_rl = false;
  // Decode the dev set after RL-only epochs too (otherwise those log lines
  // carry null dev metrics).
  bool eval_rl_epochs = false;
  std::uint64_t seed = 1;

  // RL weight actually used in the joint phase.
  double effective_lambda() const { return rl ? lambda : 0.0; }
  std::size_t effective_rl_epochs() const { return rl ? rl_epochs : 0; }

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// R_k: number of distinct values of entry k that occur in the dialogue
// history or the gold response.
std::vector<double> compute_rewards(const Tokens& input, const Tokens& target, const KBTable& kb);

// Exact expected-reward loss -sum_k p_k (R_k - b). Its gradient equals the
// expectation of the single-sample estimator below.
Var rl_loss(Var entry_probs, std::span<const double> rewards, double baseline);
// -(R_k - b) log p_k for one sampled entry k.
Var rl_loss_sampled(Var entry_probs, std::span<const double> rewards, double baseline,
                    std::size_t k);
std::size_t sample_entry(const Tensor& entry_probs, std::mt19937_64& rng);

inline constexpr double kProbFloor = 1e-12;

struct NllResult {
  Var loss;
  std::size_t clamped = 0;  // gold probabilities below kProbFloor
};
// Mean over steps of -log probs[gold[t], t].
NllResult nll_loss(Var probs, std::span<const std::size_t> gold);

// Everything a training step needs about one instance, in id form.
struct PreparedInstance {
  const Instance* source = nullptr;
  std::vector<std::size_t> input_ids;
  std::vector<std::size_t> value_ids;
  std::vector<std::size_t> column_ids;
  std::vector<std::size_t> decoder_inputs;  // <bos> y_1 .. y_{s-1}
  std::vector<std::size_t> gold;            // indices into the scored distribution
  std::optional<CopyMap> copy_map;
  std::vector<double> rewards;
  // Gold indexes the extended (word + slot) distribution rather than the
  // final one.
  bool gold_extended = false;
  bool use_rl = true;
};

PreparedInstance prepare_instance(const Instance& inst, const Vocabulary& vocab, bool copy);
std::vector<PreparedInstance> prepare_instances(const std::vector<Instance>& instances,
                                                const Vocabulary& vocab, bool copy);

struct LossWeights {
  bool nll = true;
  double rl = 0.0;
  double baseline = 1.5;
  bool sampled = false;
};

struct LossTerms {
  double total = 0.0;
  double nll = 0.0;
  double rl = 0.0;
  std::size_t clamped = 0;
  std::vector<double> entry_probs;
};

// Forward pass for one instance; with a sink, also backpropagates into it.
// `rng` drives dropout and entry sampling and may be null in eval mode.
LossTerms instance_loss(const Model& model, const PreparedInstance& inst, const LossWeights& weights,
                        const ForwardMode& mode, Gradients* sink, std::mt19937_64* rng);

// Fraction of instances whose most probable entry is one of the highest
// reward entries.
double entry_selection_accuracy(const Model& model, const std::vector<PreparedInstance>& instances);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string phase;  // "rl" or "joint"
  double loss = 0.0;
  std::optional<double> dev_bleu, dev_micro_f1, dev_macro_f1;

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  double best_dev_micro_f1 = -1.0;
  std::size_t best_epoch = 0;
  double rl_entry_accuracy = 0.0;  // on the training set after the RL phase
};

struct TrainCallbacks {
  std::function<void(const EpochMetrics&)> on_epoch;
  // Called with the current parameters whenever dev micro-F1 improves.
  std::function<void(const Model&, const EpochMetrics&)> on_best;
};

// Runs the RL-only phase on the KB-attention arrays, then the joint phase on
// everything with early stopping on dev micro-F1. On return the model holds
// the best joint-phase parameters.
TrainResult train(Model& model, const Vocabulary& vocab, const TrainConfig& config,
                  const std::vector<Instance>& train_set, const std::vector<Instance>& dev_set,
                  const TrainCallbacks& callbacks = {});

// Model hyperparameters implied by a training config and vocabulary.
ModelConfig model_config(const TrainConfig& config, const Vocabulary& vocab);

}  // namespace kbdial

#endif  // KBDIAL_TRAINING_HPP_
