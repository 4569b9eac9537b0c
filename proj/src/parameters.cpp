#include "kbdial/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace kbdial {

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(init);
  p->index = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::get(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw std::out_of_range("unknown parameter: " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("unknown parameter: " + name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

Gradients::Gradients(const ParameterSet& params) {
  grads_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    grads_.emplace_back(params[i].value.shape(), 0.0);
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void Gradients::scale(double factor) {
  for (auto& g : grads_)
    for (auto& v : g.values()) v *= factor;
}

void Gradients::add(const Gradients& other) {
  if (other.size() != size()) throw DimensionError("gradient set size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto dst = grads_[i].values();
    auto src = other.grads_[i].values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

double Gradients::squared_norm(std::span<const std::size_t> subset) const {
  double total = 0.0;
  for (auto i : subset)
    for (double v : grads_[i].values()) total += v * v;
  return total;
}

Tensor uniform_tensor(Shape shape, double limit, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

std::vector<std::size_t> all_indices(const ParameterSet& params) {
  std::vector<std::size_t> idx(params.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

double clip_global_norm(Gradients& grads, std::span<const std::size_t> subset,
                        double max_norm) {
  const double norm = std::sqrt(grads.squared_norm(subset));
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto i : subset)
      for (auto& v : grads[i].values()) v *= factor;
  }
  return norm;
}

Adam::Adam(ParameterSet& params, AdamConfig config)
    : params_(params), config_(config), steps_(params.size(), 0) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value.shape(), 0.0);
    v_.emplace_back(params[i].value.shape(), 0.0);
  }
}

void Adam::step(const Gradients& grads, std::span<const std::size_t> subset) {
  for (auto i : subset) {
    if (!grads[i].all_finite())
      throw std::runtime_error("non-finite gradient for parameter " + params_[i].name);
  }
  const auto& c = config_;
  for (auto i : subset) {
    auto p = params_[i].value.values();
    auto g = grads[i].values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    const long t = ++steps_[i];
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    const double decay = c.lr * c.weight_decay;
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] -= decay * p[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace kbdial
