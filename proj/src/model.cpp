#include "kbdial/model.hpp"

namespace kbdial {

nlohmann::json ModelConfig::to_json() const {
  return {{"dim", dim},       {"word_count", word_count}, {"slot_count", slot_count},
          {"dropout", dropout}, {"copy", copy},          {"init_range", init_range},
          {"forget_bias", forget_bias}, {"embed_init_range", embed_init_range}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.word_count = j.at("word_count").get<std::size_t>();
  c.slot_count = j.at("slot_count").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.copy = j.at("copy").get<bool>();
  c.init_range = j.value("init_range", 0.08);
  c.forget_bias = j.value("forget_bias", 1.0);
  c.embed_init_range = j.value("embed_init_range", c.init_range);
  return c;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  const std::size_t d = config_.dim;
  const std::size_t m = config_.slot_count;
  const std::size_t ext = config_.extended_size();
  if (d == 0 || m == 0 || config_.word_count == 0)
    throw ContractError("model needs positive dim, slot count and vocabulary");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0)
    throw ContractError("dropout must be in [0, 1)");
  std::mt19937_64 rng(seed);
  const double r = config_.init_range;
  auto add = [&](const char* name, Shape shape) {
    params_.add(name, uniform_tensor(std::move(shape), r, rng));
  };
  params_.add("embedding", uniform_tensor({ext, d}, config_.embed_init_range, rng));
  for (const char* prefix : {"encoder", "decoder"}) {
    const std::string p(prefix);
    add((p + ".wx").c_str(), {4 * d, d});
    add((p + ".wh").c_str(), {4 * d, d});
    add((p + ".b").c_str(), {4 * d, 1});
    auto& b = params_.get(p + ".b").value;
    for (std::size_t i = d; i < 2 * d; ++i) b[i] = config_.forget_bias;
  }
  add("state.wa", {d, m});
  add("kb.wc", {d, 2 * d});
  add("kb.wcat", {d, 2 * d});
  add("input_attn.w_enc", {d, d});
  add("input_attn.w_dec", {d, d});
  add("input_attn.v", {1, d});
  add("memory_attn.w_mem", {d, d});
  add("memory_attn.w_dec", {d, d});
  add("memory_attn.v", {1, d});
  add("output.w", {ext, 3 * d});
}

std::vector<std::size_t> Model::kb_attention_indices() const {
  std::vector<std::size_t> idx;
  for (const char* name : {"embedding", "encoder.wx", "encoder.wh", "encoder.b", "state.wa", "kb.wc"})
    idx.push_back(params_.get(name).index);
  return idx;
}

ModelVars::ModelVars(Graph& g, const Model& model) {
  const auto& p = model.params();
  embedding = g.param(p.get("embedding"));
  enc_wx = g.param(p.get("encoder.wx"));
  enc_wh = g.param(p.get("encoder.wh"));
  enc_b = g.param(p.get("encoder.b"));
  dec_wx = g.param(p.get("decoder.wx"));
  dec_wh = g.param(p.get("decoder.wh"));
  dec_b = g.param(p.get("decoder.b"));
  state_wa = g.param(p.get("state.wa"));
  kb_wc = g.param(p.get("kb.wc"));
  kb_wcat = g.param(p.get("kb.wcat"));
  in_w_enc = g.param(p.get("input_attn.w_enc"));
  in_w_dec = g.param(p.get("input_attn.w_dec"));
  in_v = g.param(p.get("input_attn.v"));
  mem_w_mem = g.param(p.get("memory_attn.w_mem"));
  mem_w_dec = g.param(p.get("memory_attn.w_dec"));
  mem_v = g.param(p.get("memory_attn.v"));
  out_w = g.param(p.get("output.w"));
}

Var ForwardMode::apply(Var x) const {
  if (!train || dropout == 0.0) return x;
  if (!rng) throw ContractError("training-mode dropout needs a random generator");
  return ad::dropout(x, dropout, true, *rng);
}

}  // namespace kbdial
