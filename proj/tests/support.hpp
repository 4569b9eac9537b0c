#ifndef KBDIAL_TESTS_SUPPORT_HPP_
#define KBDIAL_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "kbdial/autodiff.hpp"
#include "kbdial/model.hpp"

namespace kbdial::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

// f maps input Vars to an output Var. The scalar checked is sum(R .* f(x))
// for a fixed random R. Returns the largest relative error over every
// element of every input.
using OpFn = std::function<Var(Graph&, const std::vector<Var>&)>;

inline double op_gradient_error(const OpFn& f, std::vector<Tensor> inputs, std::uint64_t seed = 3,
                                double eps = 1e-5) {
  std::mt19937_64 rng(seed);
  Tensor weights;
  auto objective = [&](Graph& g, const std::vector<Var>& xs) {
    Var out = f(g, xs);
    if (weights.size() == 0) weights = random_tensor(out.value().shape(), rng);
    return ad::sum(ad::mul(out, g.constant(weights)));
  };
  Graph g;
  std::vector<Var> xs;
  for (const auto& t : inputs) xs.push_back(g.input(t));
  Var loss = objective(g, xs);
  g.backward(loss);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = g.grad(xs[i]);
    for (std::size_t e = 0; e < inputs[i].size(); ++e) {
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted = inputs;
        shifted[i][e] += delta;
        Graph h = Graph::inference();
        std::vector<Var> ys;
        for (const auto& t : shifted) ys.push_back(h.constant(t));
        return objective(h, ys).value()[0];
      };
      const double numeric = (eval(eps) - eval(-eps)) / (2 * eps);
      worst = std::max(worst, rel_error(analytic[e], numeric));
    }
  }
  return worst;
}

// Finite-difference check of a scalar loss against model parameters. Checks
// at most `per_param` randomly chosen entries of each parameter.
using ModelLossFn = std::function<Var(Graph&, const ModelVars&)>;

inline double model_gradient_error(Model& model, const ModelLossFn& f, std::size_t per_param = 12,
                                   std::uint64_t seed = 5, double eps = 1e-5) {
  Gradients grads(model.params());
  {
    Graph g(&grads);
    ModelVars w(g, model);
    g.backward(f(g, w));
  }
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    Tensor& value = model.params()[p].value;
    std::uniform_int_distribution<std::size_t> pick(0, value.size() - 1);
    for (std::size_t s = 0; s < std::min(per_param, value.size()); ++s) {
      const std::size_t e = per_param >= value.size() ? s : pick(rng);
      const double saved = value[e];
      auto eval = [&](double delta) {
        value[e] = saved + delta;
        Graph h = Graph::inference();
        ModelVars w(h, model);
        return f(h, w).value()[0];
      };
      const double numeric = (eval(eps) - eval(-eps)) / (2 * eps);
      value[e] = saved;
      worst = std::max(worst, rel_error(grads[p][e], numeric));
    }
  }
  return worst;
}

}  // namespace kbdial::testing

#endif  // KBDIAL_TESTS_SUPPORT_HPP_
