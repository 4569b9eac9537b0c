#include "kbdial/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "kbdial/kernels.hpp"

namespace kbdial {

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = track_;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.param = &p;
  n.requires_grad = track_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

Tensor& Graph::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (n.param && sink_) return (*sink_)[n.param->index];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

const Tensor& Graph::grad(Var v) { return grad_ref(v.id()); }

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                [this](std::size_t p) { return nodes_[p].requires_grad; });
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (backward_done_)
    throw ContractError("backward already ran on this graph; call reset_gradients() first");
  const Tensor& lv = value(loss);
  if (lv.size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(lv.shape()));
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_ref(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

void Graph::reset_gradients() {
  for (auto& n : nodes_) n.grad = Tensor();
  backward_done_ = false;
}

namespace ad {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
}

Shape mat_shape(const Tensor& t) { return {t.rows(), t.cols()}; }

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t p = av.rows(), q = av.cols(), r = bv.cols();
  if (bv.rows() != q)
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  Tensor out({p, r}, 0.0);
  kernels::gemm_nn(p, q, r, av.data(), bv.data(), out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib, p, q, r](Graph& g, const Tensor& dy) {
    if (g.requires_grad(ia))
      kernels::gemm_nt(p, r, q, dy.data(), g.value(ib).data(), g.grad_ref(ia).data());
    if (g.requires_grad(ib))
      kernels::gemm_tn(q, p, r, g.value(ia).data(), dy.data(), g.grad_ref(ib).data());
  });
}

Var add(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t ia = a.id(), ib = b.id();
  if (bv.cols() == 1 && av.cols() > 1 && bv.rows() == av.rows()) {
    const std::size_t rows = av.rows(), cols = av.cols();
    Tensor out(mat_shape(av));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = av.at(i, j) + bv[i];
    return g.record(std::move(out), {ia, ib}, [ia, ib, rows, cols](Graph& g, const Tensor& dy) {
      if (g.requires_grad(ia)) accumulate(g.grad_ref(ia), dy);
      if (g.requires_grad(ib)) {
        Tensor& gb = g.grad_ref(ib);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j) gb[i] += dy.at(i, j);
      }
    });
  }
  require_same_shape("add", av, bv);
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& g, const Tensor& dy) {
    if (g.requires_grad(ia)) accumulate(g.grad_ref(ia), dy);
    if (g.requires_grad(ib)) accumulate(g.grad_ref(ib), dy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape("sub", av, bv);
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& g, const Tensor& dy) {
    if (g.requires_grad(ia)) accumulate(g.grad_ref(ia), dy);
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_ref(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape("mul", av, bv);
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& g, const Tensor& dy) {
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_ref(ia);
      const Tensor& bv = g.value(ib);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[i] * bv[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_ref(ib);
      const Tensor& av = g.value(ia);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += dy[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, factor](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[i] * factor;
  });
}

Var tanh(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  const std::size_t ia = a.id();
  const std::size_t self = g.size();
  return g.record(std::move(out), {ia}, [ia, self](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    const Tensor& y = g.value(self);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    out[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  const std::size_t ia = a.id();
  const std::size_t self = g.size();
  return g.record(std::move(out), {ia}, [ia, self](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    const Tensor& y = g.value(self);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var log_clamped(Var a, double floor) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(av[i], floor));
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, floor](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    const Tensor& x = g.value(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > floor) ga[i] += dy[i] / x[i];
  });
}

Var softmax(Var a, int axis) {
  if (axis != 0 && axis != 1) throw DimensionError("softmax: axis must be 0 or 1");
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  // A slice is `len` entries spaced `stride` apart starting at slice_start(s).
  const std::size_t slices = axis == 0 ? cols : rows;
  const std::size_t len = axis == 0 ? rows : cols;
  const std::size_t stride = axis == 0 ? cols : 1;
  const std::size_t step = axis == 0 ? 1 : cols;
  if (len == 0) throw DimensionError("softmax over an empty axis");
  Tensor out({rows, cols});
  for (std::size_t s = 0; s < slices; ++s) {
    const std::size_t base = s * step;
    double mx = av[base];
    for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, av[base + k * stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(av[base + k * stride] - mx);
      out[base + k * stride] = e;
      total += e;
    }
    for (std::size_t k = 0; k < len; ++k) out[base + k * stride] /= total;
  }
  const std::size_t ia = a.id();
  const std::size_t self = g.size();
  return g.record(std::move(out), {ia},
                  [ia, self, slices, len, stride, step](Graph& g, const Tensor& dy) {
                    Tensor& ga = g.grad_ref(ia);
                    const Tensor& y = g.value(self);
                    for (std::size_t s = 0; s < slices; ++s) {
                      const std::size_t base = s * step;
                      double dot = 0.0;
                      for (std::size_t k = 0; k < len; ++k)
                        dot += y[base + k * stride] * dy[base + k * stride];
                      for (std::size_t k = 0; k < len; ++k) {
                        const std::size_t i = base + k * stride;
                        ga[i] += y[i] * (dy[i] - dot);
                      }
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Graph& g = parts[0].graph();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw DimensionError("concat_rows: column counts differ (" + std::to_string(cols) + " vs " +
                           std::to_string(p.cols()) + ")");
    rows += p.rows();
    ids.push_back(p.id());
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offset);
    offset += v.size();
  }
  return g.record(std::move(out), ids, [ids](Graph& g, const Tensor& dy) {
    std::size_t offset = 0;
    for (auto id : ids) {
      const std::size_t n = g.value(id).size();
      if (g.requires_grad(id)) {
        Tensor& gi = g.grad_ref(id);
        for (std::size_t i = 0; i < n; ++i) gi[i] += dy[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Graph& g = parts[0].graph();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw DimensionError("concat_cols: row counts differ (" + std::to_string(rows) + " vs " +
                           std::to_string(p.rows()) + ")");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Tensor out({rows, cols});
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    const std::size_t pc = v.cols();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pc; ++j) out.at(i, col0 + j) = v.at(i, j);
    col0 += pc;
  }
  return g.record(std::move(out), ids, [ids, rows, cols](Graph& g, const Tensor& dy) {
    std::size_t col0 = 0;
    for (auto id : ids) {
      const std::size_t pc = g.value(id).cols();
      if (g.requires_grad(id)) {
        Tensor& gi = g.grad_ref(id);
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < pc; ++j) gi[i * pc + j] += dy[i * cols + col0 + j];
      }
      col0 += pc;
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  if (count == 0 || start + count > av.rows())
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of range for " + shape_string(av.shape()));
  Tensor out({count, cols});
  std::copy(av.data() + start * cols, av.data() + (start + count) * cols, out.data());
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, start, cols](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    double* dst = ga.data() + start * cols;
    for (std::size_t i = 0; i < dy.size(); ++i) dst[i] += dy[i];
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (count == 0 || start + count > cols)
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of range for " + shape_string(av.shape()));
  Tensor out({rows, count});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = av.at(i, start + j);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, start, rows, cols, count](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < count; ++j) ga[i * cols + start + j] += dy[i * count + j];
  });
}

Var transpose(Var a) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({cols, rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(j, i) = av.at(i, j);
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, rows, cols](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += dy[j * rows + i];
  });
}

Var sum(Var a) {
  Graph& g = a.graph();
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return g.record(Tensor::scalar(total), {ia}, [ia](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (auto& v : ga.values()) v += dy[0];
  });
}

Var embed_lookup(Var table, std::span<const std::size_t> ids) {
  Graph& g = table.graph();
  const Tensor& tv = table.value();
  const std::size_t vocab = tv.rows(), dim = tv.cols();
  if (ids.empty()) throw DimensionError("embed_lookup: no ids");
  for (auto id : ids)
    if (id >= vocab)
      throw DimensionError("embed_lookup: id " + std::to_string(id) + " outside table of " +
                           std::to_string(vocab) + " rows");
  const std::size_t n = ids.size();
  Tensor out({dim, n});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < dim; ++k) out.at(k, j) = tv.at(ids[j], k);
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  const std::size_t it = table.id();
  return g.record(std::move(out), {it}, [it, idv = std::move(idv), dim](Graph& g, const Tensor& dy) {
    Tensor& gt = g.grad_ref(it);
    const std::size_t n = idv.size();
    for (std::size_t j = 0; j < n; ++j) {
      double* row = gt.data() + idv[j] * dim;
      for (std::size_t k = 0; k < dim; ++k) row[k] += dy[k * n + j];
    }
  });
}

Var dropout(Var a, double rate, bool train, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must be in [0, 1)");
  if (!train || rate == 0.0) return a;
  Graph& g = a.graph();
  const Tensor& av = a.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(mat_shape(av));
  Tensor out(mat_shape(av));
  for (std::size_t i = 0; i < av.size(); ++i) {
    mask[i] = keep(rng) ? keep_scale : 0.0;
    out[i] = av[i] * mask[i];
  }
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, mask = std::move(mask)](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += dy[i] * mask[i];
  });
}

Var scatter_add(Var a, Shape out_shape,
                std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  Tensor out(std::move(out_shape), 0.0);
  for (const auto& [src, dst] : pairs) {
    if (src >= av.size() || dst >= out.size())
      throw DimensionError("scatter_add: index pair out of range");
    out[dst] += av[src];
  }
  std::vector<std::pair<std::size_t, std::size_t>> pv(pairs.begin(), pairs.end());
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, pv = std::move(pv)](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (const auto& [src, dst] : pv) ga[src] += dy[dst];
  });
}

Var gather(Var a, std::span<const std::size_t> flat_indices) {
  Graph& g = a.graph();
  const Tensor& av = a.value();
  if (flat_indices.empty()) throw DimensionError("gather: no indices");
  Tensor out({flat_indices.size(), 1});
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= av.size()) throw DimensionError("gather: index out of range");
    out[i] = av[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  const std::size_t ia = a.id();
  return g.record(std::move(out), {ia}, [ia, idx = std::move(idx)](Graph& g, const Tensor& dy) {
    Tensor& ga = g.grad_ref(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += dy[i];
  });
}

}  // namespace ad
}  // namespace kbdial
