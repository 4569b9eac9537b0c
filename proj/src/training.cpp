#include "kbdial/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kbdial/encoder.hpp"
#include "kbdial/kb_attention.hpp"

namespace kbdial {

nlohmann::json TrainConfig::to_json() const {
  return {{"dim", dim},
          {"embed_init", embed_init},
          {"dropout", dropout},
          {"lr", lr},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"lambda", lambda},
          {"baseline", baseline},
          {"batch_size", batch_size},
          {"rl_epochs", rl_epochs},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"copy", copy},
          {"rl", rl},
          {"augment", augment},
          {"sampled_rl", sampled_rl},
          {"eval_rl_epochs", eval_rl_epochs},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.dim = j.value("dim", c.dim);
  c.embed_init = j.value("embed_init", c.embed_init);
  c.dropout = j.value("dropout", c.dropout);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.lambda = j.value("lambda", c.lambda);
  c.baseline = j.value("baseline", c.baseline);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.rl_epochs = j.value("rl_epochs", c.rl_epochs);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.copy = j.value("copy", c.copy);
  c.rl = j.value("rl", c.rl);
  c.augment = j.value("augment", c.augment);
  c.sampled_rl = j.value("sampled_rl", c.sampled_rl);
  c.eval_rl_epochs = j.value("eval_rl_epochs", c.eval_rl_epochs);
  c.seed = j.value("seed", c.seed);
  return c;
}

ModelConfig model_config(const TrainConfig& config, const Vocabulary& vocab) {
  ModelConfig m;
  m.dim = config.dim;
  m.embed_init_range = config.embed_init;
  m.word_count = vocab.word_count();
  m.slot_count = vocab.slot_count();
  m.dropout = config.dropout;
  m.copy = config.copy;
  return m;
}

std::vector<double> compute_rewards(const Tokens& input, const Tokens& target, const KBTable& kb) {
  std::unordered_set<std::string> seen(input.begin(), input.end());
  seen.insert(target.begin(), target.end());
  std::vector<double> rewards;
  rewards.reserve(kb.row_count());
  for (const auto& row : kb.rows) {
    std::unordered_set<std::string> hits;
    for (const auto& v : row)
      if (v != kNoneToken && seen.count(v)) hits.insert(v);
    rewards.push_back(static_cast<double>(hits.size()));
  }
  return rewards;
}

namespace {
void check_rewards(Var entry_probs, std::span<const double> rewards) {
  if (entry_probs.cols() != 1 || entry_probs.rows() != rewards.size())
    throw DimensionError("rl loss: " + std::to_string(rewards.size()) + " rewards for " +
                         std::to_string(entry_probs.rows()) + " entries");
}
}  // namespace

Var rl_loss(Var entry_probs, std::span<const double> rewards, double baseline) {
  check_rewards(entry_probs, rewards);
  Tensor advantage({rewards.size(), 1});
  for (std::size_t k = 0; k < rewards.size(); ++k) advantage[k] = -(rewards[k] - baseline);
  Var a = entry_probs.graph().constant(std::move(advantage));
  return ad::sum(ad::mul(entry_probs, a));
}

Var rl_loss_sampled(Var entry_probs, std::span<const double> rewards, double baseline,
                    std::size_t k) {
  check_rewards(entry_probs, rewards);
  if (k >= rewards.size()) throw DimensionError("rl_loss_sampled: entry index out of range");
  const std::size_t idx[] = {k};
  Var logp = ad::log_clamped(ad::gather(entry_probs, idx), kProbFloor);
  return ad::scale(ad::sum(logp), -(rewards[k] - baseline));
}

std::size_t sample_entry(const Tensor& entry_probs, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> pick(entry_probs.values().begin(),
                                               entry_probs.values().end());
  return pick(rng);
}

NllResult nll_loss(Var probs, std::span<const std::size_t> gold) {
  const std::size_t steps = probs.cols();
  if (gold.size() != steps)
    throw DimensionError("nll_loss: " + std::to_string(gold.size()) + " gold indices for " +
                         std::to_string(steps) + " steps");
  NllResult r;
  std::vector<std::size_t> flat(steps);
  const Tensor& p = probs.value();
  for (std::size_t t = 0; t < steps; ++t) {
    if (gold[t] >= probs.rows()) throw DimensionError("nll_loss: gold index outside distribution");
    flat[t] = gold[t] * steps + t;
    if (p[flat[t]] < kProbFloor) ++r.clamped;
  }
  Var logp = ad::log_clamped(ad::gather(probs, flat), kProbFloor);
  r.loss = ad::scale(ad::sum(logp), -1.0 / static_cast<double>(steps));
  return r;
}

PreparedInstance prepare_instance(const Instance& inst, const Vocabulary& vocab, bool copy) {
  if (inst.delexicalized && !copy)
    throw ContractError("delexicalized instances need the copy mechanism");
  PreparedInstance p;
  p.source = &inst;
  p.input_ids = vocab.encode(inst.input);
  p.value_ids = kb_value_ids(*inst.kb, vocab);
  p.column_ids = kb_column_ids(*inst.kb, vocab);
  if (copy) p.copy_map.emplace(*inst.kb, vocab);
  p.gold_extended = inst.delexicalized;
  // A delexicalized target names no values, so it says nothing about which
  // entry was used.
  p.use_rl = !inst.delexicalized;
  p.rewards = compute_rewards(inst.input, inst.target, *inst.kb);

  p.decoder_inputs.push_back(Vocabulary::kBos);
  for (std::size_t t = 0; t < inst.target.size(); ++t) {
    const std::string& tok = inst.target[t];
    std::size_t gold;
    if (inst.delexicalized)
      gold = vocab.id(tok);
    else if (copy)
      gold = p.copy_map->index_of(tok, vocab);
    else
      gold = vocab.word_id(tok);
    p.gold.push_back(gold);
    if (t + 1 < inst.target.size()) {
      // Slot tokens and KB extras are fed back as <unk>, as at decode time.
      const std::size_t w = vocab.word_id(tok);
      p.decoder_inputs.push_back(w);
    }
  }
  return p;
}

std::vector<PreparedInstance> prepare_instances(const std::vector<Instance>& instances,
                                                const Vocabulary& vocab, bool copy) {
  std::vector<PreparedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    if (inst.delexicalized && !copy) continue;
    out.push_back(prepare_instance(inst, vocab, copy));
  }
  return out;
}

LossTerms instance_loss(const Model& model, const PreparedInstance& inst, const LossWeights& weights,
                        const ForwardMode& mode, Gradients* sink, std::mt19937_64* rng) {
  Graph g = sink ? Graph(sink) : Graph::inference();
  ModelVars w(g, model);
  const EncoderOutput enc = encode(w, inst.input_ids, mode);
  const StateRepresentation state = state_representation(enc.states, w.state_wa);
  const TableEncoding table = encode_table(w.embedding, w.kb_wc, inst.value_ids, inst.column_ids);
  const KBQueryResult kbq = query(table, state.memory, w.kb_wcat);

  LossTerms terms;
  const Tensor& probs = kbq.entry_probs.value();
  terms.entry_probs.assign(probs.values().begin(), probs.values().end());

  std::vector<Var> parts;
  if (weights.rl != 0.0 && inst.use_rl) {
    Var rl;
    if (weights.sampled) {
      if (!rng) throw ContractError("sampled RL loss needs a random source");
      rl = rl_loss_sampled(kbq.entry_probs, inst.rewards, weights.baseline,
                           sample_entry(probs, *rng));
    } else {
      rl = rl_loss(kbq.entry_probs, inst.rewards, weights.baseline);
    }
    terms.rl = rl.value()[0];
    parts.push_back(ad::scale(rl, weights.rl));
  }
  if (weights.nll) {
    const DecoderContext ctx = make_decoder_context(w, enc, kbq.memory, kbq.entry_probs);
    const CopyMap* map = inst.copy_map ? &*inst.copy_map : nullptr;
    const TeacherForced tf = decode_teacher_forced(w, ctx, inst.decoder_inputs, mode,
                                                   model.config().word_count, map);
    NllResult nll = nll_loss(inst.gold_extended ? tf.extended : tf.final_probs, inst.gold);
    terms.nll = nll.loss.value()[0];
    terms.clamped = nll.clamped;
    parts.push_back(nll.loss);
  }
  if (parts.empty()) return terms;
  Var total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total = ad::add(total, parts[i]);
  terms.total = total.value()[0];
  if (sink && std::isfinite(terms.total)) g.backward(total);
  return terms;
}

double entry_selection_accuracy(const Model& model, const std::vector<PreparedInstance>& instances) {
  std::size_t scored = 0, hits = 0;
  const ForwardMode eval;
  const LossWeights none{false, 0.0, 0.0, false};
  for (const auto& inst : instances) {
    if (!inst.use_rl) continue;
    const LossTerms t = instance_loss(model, inst, none, eval, nullptr, nullptr);
    const auto best_p = std::max_element(t.entry_probs.begin(), t.entry_probs.end());
    const double best_r = *std::max_element(inst.rewards.begin(), inst.rewards.end());
    const std::size_t k = static_cast<std::size_t>(best_p - t.entry_probs.begin());
    ++scored;
    if (inst.rewards[k] == best_r) ++hits;
  }
  return scored ? static_cast<double>(hits) / static_cast<double>(scored) : 0.0;
}

nlohmann::json EpochMetrics::to_json() const {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"epoch", epoch},
          {"phase", phase},
          {"loss", loss},
          {"dev_bleu", opt(dev_bleu)},
          {"dev_micro_f1", opt(dev_micro_f1)},
          {"dev_macro_f1", opt(dev_macro_f1)}};
}

namespace {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config)
      : model_(model),
        config_(config),
        adam_(model.params(), AdamConfig{config.lr, 0.9, 0.999, 1e-8, config.weight_decay}),
        total_(model.params()),
        local_(static_cast<std::size_t>(thread_count()), Gradients(model.params())) {}

  // One pass over `pool` in a seeded shuffled order. Returns the mean loss.
  double epoch(const std::vector<const PreparedInstance*>& pool, const LossWeights& weights,
               std::span<const std::size_t> subset, std::size_t epoch_no, std::size_t phase_tag) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq shuffle_seed{config_.seed, std::uint64_t{epoch_no}, std::uint64_t{phase_tag}};
    std::mt19937_64 shuffle_rng(shuffle_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    const std::size_t bs = std::max<std::size_t>(1, config_.batch_size);
    for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
      const std::size_t count = std::min(bs, order.size() - start);
      for (auto& l : local_) l.zero();
      std::vector<double> losses(count, 0.0);
      const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
      for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t pos = order[start + static_cast<std::size_t>(i)];
        std::seed_seq seed{config_.seed, std::uint64_t{epoch_no}, std::uint64_t{pos},
                           std::uint64_t{phase_tag}};
        std::mt19937_64 rng(seed);
        const ForwardMode mode{true, config_.dropout, &rng};
        Gradients& sink = local_[static_cast<std::size_t>(thread_id())];
        losses[static_cast<std::size_t>(i)] =
            instance_loss(model_, *pool[pos], weights, mode, &sink, &rng).total;
      }
      const double batch_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "training diverged: non-finite loss in batch " << batch << " of epoch " << epoch_no;
        throw TrainingDiverged(os.str());
      }
      total_.zero();
      for (const auto& l : local_) total_.add(l);
      total_.scale(1.0 / static_cast<double>(count));
      clip_global_norm(total_, subset, config_.clip_norm);
      try {
        adam_.step(total_, subset);
      } catch (const std::runtime_error& e) {
        std::ostringstream os;
        os << "training diverged in batch " << batch << " of epoch " << epoch_no << ": "
           << e.what();
        throw TrainingDiverged(os.str());
      }
      loss_sum += batch_loss;
    }
    return pool.empty() ? 0.0 : loss_sum / static_cast<double>(pool.size());
  }

 private:
  Model& model_;
  const TrainConfig& config_;
  Adam adam_;
  Gradients total_;
  std::vector<Gradients> local_;
};

}  // namespace

TrainResult train(Model& model, const Vocabulary& vocab, const TrainConfig& config,
                  const std::vector<Instance>& train_set, const std::vector<Instance>& dev_set,
                  const TrainCallbacks& callbacks) {
  if (train_set.empty()) throw ContractError("train: empty training set");
  if (model.config().copy != config.copy)
    throw ContractError("train: model and training config disagree on copying");
  const auto prepared = prepare_instances(train_set, vocab, config.copy);
  std::vector<const PreparedInstance*> all, rl_pool;
  for (const auto& p : prepared) {
    all.push_back(&p);
    if (p.use_rl) rl_pool.push_back(&p);
  }

  Trainer trainer(model, config);
  TrainResult result;
  std::size_t epoch_no = 0;

  auto dev_metrics = [&](EpochMetrics& m) {
    if (dev_set.empty()) return;
    const EvalReport r = evaluate(model, vocab, dev_set);
    m.dev_bleu = r.bleu;
    m.dev_micro_f1 = r.micro_f1;
    m.dev_macro_f1 = r.macro_f1;
  };
  auto emit = [&](const EpochMetrics& m) {
    result.log.push_back(m);
    if (callbacks.on_epoch) callbacks.on_epoch(m);
  };

  const auto kb_subset = model.kb_attention_indices();
  const LossWeights rl_only{false, 1.0, config.baseline, config.sampled_rl};
  for (std::size_t e = 0; e < config.effective_rl_epochs(); ++e) {
    EpochMetrics m;
    m.epoch = ++epoch_no;
    m.phase = "rl";
    m.loss = trainer.epoch(rl_pool, rl_only, kb_subset, epoch_no, 1);
    if (config.eval_rl_epochs) dev_metrics(m);
    emit(m);
  }
  result.rl_entry_accuracy = entry_selection_accuracy(model, prepared);

  const auto everything = all_indices(model.params());
  const LossWeights joint{true, config.effective_lambda(), config.baseline, config.sampled_rl};
  std::optional<Checkpoint> best;
  std::size_t stale = 0;
  for (std::size_t e = 0; e < config.max_epochs; ++e) {
    EpochMetrics m;
    m.epoch = ++epoch_no;
    m.phase = "joint";
    m.loss = trainer.epoch(all, joint, everything, epoch_no, 2);
    dev_metrics(m);
    emit(m);
    const double score = m.dev_micro_f1.value_or(-m.loss);
    if (!best || score > result.best_dev_micro_f1) {
      result.best_dev_micro_f1 = score;
      result.best_epoch = m.epoch;
      best = snapshot(model.params(), nlohmann::json::object());
      stale = 0;
      if (callbacks.on_best) callbacks.on_best(model, m);
    } else if (++stale >= config.patience) {
      break;
    }
  }
  if (best) restore(*best, model.params());
  return result;
}

}  // namespace kbdial
