#ifndef KBDIAL_AUTODIFF_HPP_
#define KBDIAL_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kbdial/parameters.hpp"
#include "kbdial/tensor.hpp"

namespace kbdial {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of nodes in creation order. Creation order is a topological order, so
// backward() is one reverse sweep.
//
// Parameter leaves do not copy the parameter value. When the graph is given a
// Gradients sink, parameter gradients accumulate straight into it; otherwise
// they live on the node and are read back with grad().
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(Gradients* sink = nullptr) : sink_(sink) {}
  // Inference graph: no node requires a gradient, so no closures are kept.
  static Graph inference() { Graph g; g.track_ = false; return g; }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;

  Var constant(Tensor value);
  Var input(Tensor value);
  Var param(const Parameter& p);

  const Tensor& value(Var v) const { return value(v.id()); }
  const Tensor& value(std::size_t id) const;
  // Gradient of the last backward() loss w.r.t. v (zeros if unreached).
  const Tensor& grad(Var v);

  void backward(Var loss);
  // Clears all gradients so backward() may run again.
  void reset_gradients();

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_ref(std::size_t id);

 private:
  struct Node {
    Tensor value;
    const Parameter* param = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  Gradients* sink_ = nullptr;
  bool track_ = true;
  bool backward_done_ = false;
};

namespace ad {

Var matmul(Var a, Var b);
// Elementwise a + b. b may also be a column (rows x 1) broadcast over a's
// columns.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
// log(max(x, floor)); entries below the floor get zero gradient.
Var log_clamped(Var a, double floor);
// axis 0 normalizes each column, axis 1 each row.
Var softmax(Var a, int axis);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var transpose(Var a);
Var sum(Var a);
// Column i of the result is row ids[i] of table (table is vocab x dim).
Var embed_lookup(Var table, std::span<const std::size_t> ids);
// Inverted dropout; identity when !train or rate == 0.
Var dropout(Var a, double rate, bool train, std::mt19937_64& rng);

// out[dst] += a[src] over flat indices, out has the given shape.
Var scatter_add(Var a, Shape out_shape,
                std::span<const std::pair<std::size_t, std::size_t>> pairs);
// Column vector of a's flat entries at the given indices.
Var gather(Var a, std::span<const std::size_t> flat_indices);

}  // namespace ad
}  // namespace kbdial

#endif  // KBDIAL_AUTODIFF_HPP_
