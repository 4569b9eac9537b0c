#ifndef KBDIAL_PARAMETERS_HPP_
#define KBDIAL_PARAMETERS_HPP_

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kbdial/tensor.hpp"

namespace kbdial {

struct Parameter {
  std::string name;
  Tensor value;
  std::size_t index = 0;
};

// Owns every trainable array of a model. Addresses are stable, so graphs may
// hold Parameter pointers for the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Gradient buffers parallel to a ParameterSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const { return grads_.size(); }

  void zero();
  void scale(double factor);
  void add(const Gradients& other);
  double squared_norm(std::span<const std::size_t> subset) const;

 private:
  std::vector<Tensor> grads_;
};

Tensor uniform_tensor(Shape shape, double limit, std::mt19937_64& rng);

// All parameter indices, in order.
std::vector<std::size_t> all_indices(const ParameterSet& params);

// Scales gradients in `subset` so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(Gradients& grads, std::span<const std::size_t> subset,
                        double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-6;
};

// Adam with decoupled weight decay: p <- p - lr*wd*p, then the usual
// bias-corrected moment update. Step counts are kept per parameter so a
// subset can be trained for a while without disturbing the rest.
class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config);

  // Throws std::runtime_error naming the parameter on a non-finite gradient.
  void step(const Gradients& grads, std::span<const std::size_t> subset);

  const AdamConfig& config() const { return config_; }

 private:
  ParameterSet& params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::vector<long> steps_;
};

}  // namespace kbdial

#endif  // KBDIAL_PARAMETERS_HPP_
