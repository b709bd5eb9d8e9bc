// Dense 2-D tensors with reverse-mode differentiation.
//
// Every op returns a fresh Tensor. While recording is enabled and an input
// requires a gradient, the result keeps its inputs alive together with a
// closure that pushes its gradient back to them. backward() runs those
// closures in reverse topological order.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace structadapt::ad {

#ifdef STRUCTADAPT_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Matrix>;
using ConstMatMap = Eigen::Map<const Matrix>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool& recording_flag() {
  thread_local bool on = true;
  return on;
}
inline bool& finite_check_flag() {
#ifdef NDEBUG
  thread_local bool on = false;
#else
  thread_local bool on = true;
#endif
  return on;
}

struct Node {
  std::size_t rows = 0, cols = 0;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;

  Scalar* ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Scalar(0));
    return grad.data();
  }
};

}  // namespace detail

/// Suspends recording for its lifetime (inference).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::recording_flag()) { detail::recording_flag() = false; }
  ~NoGradGuard() { detail::recording_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Turns NaN/Inf detection after every op on or off for this thread.
inline void set_finite_checks(bool on) { detail::finite_check_flag() = on; }
inline bool finite_checks() { return detail::finite_check_flag(); }

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->rows = rows;
    t.node_->cols = cols;
    t.node_->value.assign(rows * cols, Scalar(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<Scalar> values,
                     bool requires_grad = false) {
    if (values.size() != rows * cols) throw ShapeError("Tensor::from: value count mismatch");
    Tensor t = zeros(0, 0, requires_grad);
    t.node_->rows = rows;
    t.node_->cols = cols;
    t.node_->value = std::move(values);
    return t;
  }
  static Tensor scalar(Scalar v) { return from(1, 1, {v}); }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t numel() const { return node_->value.size(); }
  std::array<std::size_t, 2> shape() const { return {node_->rows, node_->cols}; }

  std::span<Scalar> data() { return node_->value; }
  std::span<const Scalar> data() const { return node_->value; }
  std::span<Scalar> grad() { return {node_->ensure_grad(), node_->value.size()}; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() { node_->grad.clear(); }

  Scalar operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  Scalar& operator()(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }
  Scalar item() const {
    if (numel() != 1) throw ShapeError("item() on a tensor with more than one element");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  MatMap mat() { return MatMap(node_->value.data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(node_->value.data(), rows(), cols()); }
  MatMap grad_mat() { return MatMap(node_->ensure_grad(), rows(), cols()); }

  /// Deep copy of the values, detached from any recorded graph.
  Tensor clone() const { return from(rows(), cols(), node_->value, requires_grad()); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline bool tracks(std::initializer_list<const Tensor*> inputs) {
  if (!recording_flag()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

inline void check_finite(const Tensor& t, const char* op) {
  if (!finite_check_flag()) return;
  for (Scalar v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value produced by ") + op);
  }
}

// Attaches the backward closure when any input needs a gradient.
template <class Fn>
Tensor finish(Tensor out, std::initializer_list<const Tensor*> inputs, const char* op, Fn&& fn) {
  check_finite(out, op);
  if (tracks(inputs)) {
    Node* o = out.node();
    o->requires_grad = true;
    for (const Tensor* t : inputs) o->parents.push_back(t->node_ptr());
    o->backward = std::forward<Fn>(fn);
  }
  return out;
}

inline MatMap gmat(Node* n) { return MatMap(n->ensure_grad(), n->rows, n->cols); }
inline MatMap gmat(const Tensor& t) { return gmat(t.node()); }

}  // namespace detail

using detail::Node;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Tensor out = Tensor::zeros(a.rows(), b.cols());
  out.mat().noalias() = a.mat() * b.mat();
  Node* o = out.node();
  return detail::finish(out, {&a, &b}, "matmul", [o, a, b]() mutable {
    auto go = detail::gmat(o);
    if (a.requires_grad()) detail::gmat(a).noalias() += go * b.mat().transpose();
    if (b.requires_grad()) detail::gmat(b).noalias() += a.mat().transpose() * go;
  });
}
/// a · bᵀ; with b stored as (out × in) this is a linear layer.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Tensor out = Tensor::zeros(a.rows(), b.rows());
  out.mat().noalias() = a.mat() * b.mat().transpose();
  Node* o = out.node();
  return detail::finish(out, {&a, &b}, "matmul_nt", [o, a, b]() mutable {
    auto go = detail::gmat(o);
    if (a.requires_grad()) detail::gmat(a).noalias() += go * b.mat();
    if (b.requires_grad()) detail::gmat(b).noalias() += go.transpose() * a.mat();
  });
}
inline Tensor linear(const Tensor& x, const Tensor& weight) { return matmul_nt(x, weight); }

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: shapes differ");
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  out.mat() = a.mat() + b.mat();
  Node* o = out.node();
  return detail::finish(out, {&a, &b}, "add", [o, a, b]() mutable {
    auto go = detail::gmat(o);
    if (a.requires_grad()) detail::gmat(a) += go;
    if (b.requires_grad()) detail::gmat(b) += go;
  });
}

/// Adds a 1 × n row to every row of a.
inline Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: row shape mismatch");
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  out.mat() = a.mat().rowwise() + row.mat().row(0);
  Node* o = out.node();
  return detail::finish(out, {&a, &row}, "add_row", [o, a, row]() mutable {
    auto go = detail::gmat(o);
    if (a.requires_grad()) detail::gmat(a) += go;
    if (row.requires_grad()) detail::gmat(row).row(0) += go.colwise().sum();
  });
}

/// Elementwise product.
inline Tensor multiply(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("multiply: shapes differ");
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  out.mat() = a.mat().cwiseProduct(b.mat());
  Node* o = out.node();
  return detail::finish(out, {&a, &b}, "multiply", [o, a, b]() mutable {
    auto go = detail::gmat(o);
    if (a.requires_grad()) detail::gmat(a) += go.cwiseProduct(b.mat());
    if (b.requires_grad()) detail::gmat(b) += go.cwiseProduct(a.mat());
  });
}

inline Tensor scale(const Tensor& a, Scalar s) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  out.mat() = a.mat() * s;
  Node* o = out.node();
  return detail::finish(out, {&a}, "scale", [o, a, s]() mutable {
    detail::gmat(a) += detail::gmat(o) * s;
  });
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::size_t rows = 0, cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t at = 0;
  bool any = false;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + at * cols);
    at += p.rows();
    any = any || p.requires_grad();
  }
  detail::check_finite(out, "concat_rows");
  if (detail::recording_flag() && any) {
    Node* o = out.node();
    o->requires_grad = true;
    for (const auto& p : parts) o->parents.push_back(p.node_ptr());
    o->backward = [o, parts, cols]() mutable {
      std::size_t r = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          Scalar* g = p.node()->ensure_grad();
          for (std::size_t i = 0; i < p.numel(); ++i) g[i] += o->grad[r * cols + i];
        }
        r += p.rows();
      }
    };
  }
  return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::size_t rows = parts[0].rows(), cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out = Tensor::zeros(rows, cols);
  std::size_t at = 0;
  bool any = false;
  for (const auto& p : parts) {
    out.mat().middleCols(at, p.cols()) = p.mat();
    at += p.cols();
    any = any || p.requires_grad();
  }
  detail::check_finite(out, "concat_cols");
  if (detail::recording_flag() && any) {
    Node* o = out.node();
    o->requires_grad = true;
    for (const auto& p : parts) o->parents.push_back(p.node_ptr());
    o->backward = [o, parts]() mutable {
      auto go = detail::gmat(o);
      std::size_t c = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) detail::gmat(p) += go.middleCols(c, p.cols());
        c += p.cols();
      }
    };
  }
  return out;
}

inline Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ShapeError("slice_rows: out of range");
  Tensor out = Tensor::zeros(count, a.cols());
  out.mat() = a.mat().middleRows(begin, count);
  Node* o = out.node();
  return detail::finish(out, {&a}, "slice_rows", [o, a, begin, count]() mutable {
    detail::gmat(a).middleRows(begin, count) += detail::gmat(o);
  });
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Tensor out = Tensor::zeros(a.rows(), count);
  out.mat() = a.mat().middleCols(begin, count);
  Node* o = out.node();
  return detail::finish(out, {&a}, "slice_cols", [o, a, begin, count]() mutable {
    detail::gmat(a).middleCols(begin, count) += detail::gmat(o);
  });
}

/// Same values in row-major order under a new shape.
inline Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.numel()) throw ShapeError("reshape: element count differs");
  Tensor out = Tensor::from(rows, cols, std::vector<Scalar>(a.data().begin(), a.data().end()));
  Node* o = out.node();
  return detail::finish(out, {&a}, "reshape", [o, a]() mutable {
    Scalar* g = a.node()->ensure_grad();
    for (std::size_t i = 0; i < o->grad.size(); ++i) g[i] += o->grad[i];
  });
}

/// Embedding lookup: row i of the result is table[ids[i]].
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  Tensor out = Tensor::zeros(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " out of range");
    }
    out.mat().row(i) = table.mat().row(ids[i]);
  }
  Node* o = out.node();
  return detail::finish(out, {&table}, "gather_rows", [o, table, ids]() mutable {
    auto go = detail::gmat(o);
    auto gt = detail::gmat(table);
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += go.row(i);
  });
}

inline Tensor relu(const Tensor& a) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  out.mat() = a.mat().cwiseMax(Scalar(0));
  Node* o = out.node();
  return detail::finish(out, {&a}, "relu", [o, a]() mutable {
    auto ga = detail::gmat(a);
    auto go = detail::gmat(o);
    auto x = a.mat();
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x.data()[i] > 0) ga.data()[i] += go.data()[i];
  });
}

/// Row-wise softmax after subtracting the row maximum. When `allowed` is
/// given (row-major, same shape), disallowed entries get probability zero;
/// a row must allow at least one entry.
inline Tensor softmax_rows(const Tensor& a, const std::vector<std::uint8_t>* allowed = nullptr) {
  if (allowed && allowed->size() != a.numel()) throw ShapeError("softmax_rows: mask shape mismatch");
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out = Tensor::zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* x = a.data().data() + i * m;
    Scalar* y = out.data().data() + i * m;
    const std::uint8_t* ok = allowed ? allowed->data() + i * m : nullptr;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (!ok || ok[j]) mx = std::max(mx, x[j]);
    if (!std::isfinite(mx)) throw ShapeError("softmax_rows: row with no allowed entries");
    Scalar z = 0;
    for (std::size_t j = 0; j < m; ++j) {
      y[j] = (!ok || ok[j]) ? std::exp(x[j] - mx) : Scalar(0);
      z += y[j];
    }
    for (std::size_t j = 0; j < m; ++j) y[j] /= z;
  }
  Node* o = out.node();
  return detail::finish(out, {&a}, "softmax_rows", [o, a, n, m]() mutable {
    Scalar* ga = a.node()->ensure_grad();
    const Scalar* y = o->value.data();
    const Scalar* gy = o->grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      Scalar dot = 0;
      for (std::size_t j = 0; j < m; ++j) dot += gy[i * m + j] * y[i * m + j];
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += y[i * m + j] * (gy[i * m + j] - dot);
    }
  });
}

/// Per-row normalization with learned 1 × n scale and shift.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         Scalar eps = Scalar(1e-6)) {
  const std::size_t n = x.rows(), m = x.cols();
  if (gain.rows() != 1 || gain.cols() != m || bias.shape() != gain.shape()) {
    throw ShapeError("layer_norm: parameter shape mismatch");
  }
  Tensor out = Tensor::zeros(n, m);
  auto xhat = std::make_shared<std::vector<Scalar>>(n * m);
  auto inv_std = std::make_shared<std::vector<Scalar>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar* xi = x.data().data() + i * m;
    Scalar mean = 0;
    for (std::size_t j = 0; j < m; ++j) mean += xi[j];
    mean /= static_cast<Scalar>(m);
    Scalar var = 0;
    for (std::size_t j = 0; j < m; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<Scalar>(m);
    Scalar is = Scalar(1) / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < m; ++j) {
      Scalar h = (xi[j] - mean) * is;
      (*xhat)[i * m + j] = h;
      out.data()[i * m + j] = h * gain.data()[j] + bias.data()[j];
    }
  }
  Node* o = out.node();
  return detail::finish(out, {&x, &gain, &bias}, "layer_norm",
                        [o, x, gain, bias, xhat, inv_std, n, m]() mutable {
    const Scalar* gy = o->grad.data();
    if (gain.requires_grad() || bias.requires_grad()) {
      Scalar* gg = gain.requires_grad() ? gain.node()->ensure_grad() : nullptr;
      Scalar* gb = bias.requires_grad() ? bias.node()->ensure_grad() : nullptr;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          if (gg) gg[j] += gy[i * m + j] * (*xhat)[i * m + j];
          if (gb) gb[j] += gy[i * m + j];
        }
    }
    if (x.requires_grad()) {
      Scalar* gx = x.node()->ensure_grad();
      const Scalar* g = gain.data().data();
      for (std::size_t i = 0; i < n; ++i) {
        Scalar sum_d = 0, sum_dx = 0;
        for (std::size_t j = 0; j < m; ++j) {
          Scalar d = gy[i * m + j] * g[j];
          sum_d += d;
          sum_dx += d * (*xhat)[i * m + j];
        }
        Scalar mm = static_cast<Scalar>(m);
        for (std::size_t j = 0; j < m; ++j) {
          Scalar d = gy[i * m + j] * g[j];
          gx[i * m + j] += (*inv_std)[i] * (d - sum_d / mm - (*xhat)[i * m + j] * sum_dx / mm);
        }
      }
    }
  });
}

/// Mean negative log-likelihood of integer targets under row-wise softmax of
/// `logits`; rows whose target equals `ignore_index` are skipped. Returns
/// 1 × 1 (zero when every row is ignored).
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            int ignore_index = -100) {
  const std::size_t n = logits.rows(), m = logits.cols();
  if (targets.size() != n) throw ShapeError("cross_entropy: target count mismatch");
  auto probs = std::make_shared<std::vector<Scalar>>(n * m);
  Scalar total = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] == ignore_index) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= m) {
      throw ShapeError("cross_entropy: target out of range");
    }
    const Scalar* x = logits.data().data() + i * m;
    Scalar mx = *std::max_element(x, x + m);
    Scalar z = 0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(x[j] - mx);
    Scalar lz = std::log(z) + mx;
    for (std::size_t j = 0; j < m; ++j) (*probs)[i * m + j] = std::exp(x[j] - lz);
    total += lz - x[targets[i]];
    ++counted;
  }
  Tensor out = Tensor::scalar(counted ? total / static_cast<Scalar>(counted) : Scalar(0));
  Node* o = out.node();
  return detail::finish(out, {&logits}, "cross_entropy",
                        [o, logits, targets, probs, n, m, counted, ignore_index]() mutable {
    if (!counted) return;
    Scalar* g = logits.node()->ensure_grad();
    Scalar s = o->grad[0] / static_cast<Scalar>(counted);
    for (std::size_t i = 0; i < n; ++i) {
      if (targets[i] == ignore_index) continue;
      for (std::size_t j = 0; j < m; ++j) g[i * m + j] += s * (*probs)[i * m + j];
      g[i * m + targets[i]] -= s;
    }
  });
}

struct WeightedEdge {
  std::size_t src;
  std::size_t tgt;
  Scalar weight;
};

/// out[tgt] += weight · h[src] for every edge; `out_rows` rows.
inline Tensor neighborhood_aggregate(const Tensor& h, const std::vector<WeightedEdge>& edges,
                                     std::size_t out_rows) {
  Tensor out = Tensor::zeros(out_rows, h.cols());
  auto x = h.mat();
  auto y = out.mat();
  for (const auto& e : edges) {
    if (e.src >= h.rows() || e.tgt >= out_rows) throw ShapeError("neighborhood_aggregate: edge out of range");
    y.row(e.tgt) += e.weight * x.row(e.src);
  }
  Node* o = out.node();
  return detail::finish(out, {&h}, "neighborhood_aggregate", [o, h, edges]() mutable {
    auto go = detail::gmat(o);
    auto gh = detail::gmat(h);
    for (const auto& e : edges) gh.row(e.src) += e.weight * go.row(e.tgt);
  });
}

inline Tensor sum(const Tensor& a) {
  Tensor out = Tensor::scalar(a.mat().sum());
  Node* o = out.node();
  return detail::finish(out, {&a}, "sum", [o, a]() mutable {
    detail::gmat(a).array() += o->grad[0];
  });
}

/// Reverse-mode sweep from a 1 × 1 tensor; gradients accumulate into every
/// reachable tensor that requires one.
inline void backward(const Tensor& root) {
  if (root.numel() != 1) throw ShapeError("backward: root must be a scalar");
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

/// Adam with bias correction; the learning rate is passed per step so
/// schedules live outside the optimizer.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999),
                Scalar eps = Scalar(1e-8))
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), Scalar(0));
      v_.emplace_back(p.numel(), Scalar(0));
    }
  }

  void step(Scalar lr) {
    ++t_;
    const Scalar c1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m_[k][i] = beta1_ * m_[k][i] + (1 - beta1_) * g[i];
        v_[k][i] = beta2_ * v_[k][i] + (1 - beta2_) * g[i] * g[i];
        w[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  const std::vector<Tensor>& params() const { return params_; }
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<Scalar>> m_, v_;
  Scalar beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// One Adam update over `params` with externally held state.
inline void adam_step(Adam& state, Scalar lr) { state.step(lr); }

/// Normal(0, stddev) fill from a seeded engine. Uses Box-Muller on raw
/// engine output so values do not depend on the standard library.
inline void fill_normal(Tensor& t, Scalar stddev, std::mt19937_64& rng) {
  auto uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  auto d = t.data();
  for (std::size_t i = 0; i < d.size(); i += 2) {
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    d[i] = static_cast<Scalar>(stddev * r * std::cos(2 * M_PI * u2));
    if (i + 1 < d.size()) d[i + 1] = static_cast<Scalar>(stddev * r * std::sin(2 * M_PI * u2));
  }
}

}  // namespace structadapt::ad
