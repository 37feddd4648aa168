#include "radpose/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "radpose/error.hpp"

namespace radpose::ad {

// ---------------------------------------------------------------------------
// Dense kernels (row-major).

namespace {

// C[m,n] += A[m,k] B[k,n]
void gemm_nn_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C + i * n;
    const double* a = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

// GA[m,k] += G[m,n] B[k,n]^T
void gemm_nt_acc(const double* G, const double* B, double* GA, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* g = G + i * n;
    double* ga = GA + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* b = B + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[j] * b[j];
      ga[p] += s;
    }
  }
}

// GB[k,n] += A[m,k]^T G[m,n]
void gemm_tn_acc(const double* A, const double* G, double* GB, std::size_t m, std::size_t k,
                 std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* a = A + i * k;
    const double* g = G + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p];
      double* gb = GB + p * n;
      for (std::size_t j = 0; j < n; ++j) gb[j] += av * g[j];
    }
  }
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2 && !t.is_complex(), ErrorKind::kShapeMismatch,
          std::string(op) + " needs a real matrix, got " + shape_string(t.shape()));
}

void require_same(const Var& a, const Var& b, const char* op) {
  require(&a.tape() == &b.tape(), ErrorKind::kInvalidArgument,
          std::string(op) + ": operands live on different tapes");
  require(a.value().same_shape(b.value()), ErrorKind::kShapeMismatch,
          std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out = x;
  for (double& v : out.data()) v = f(v);
  return out;
}

}  // namespace

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  require(a.dim(1) == b.dim(0), ErrorKind::kShapeMismatch,
          "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Tensor c({a.dim(0), b.dim(1)});
  gemm_nn_acc(a.data().data(), b.data().data(), c.data().data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

Tensor transpose_values(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

// ---------------------------------------------------------------------------
// Tape.

const Tensor& Var::value() const { return tape_->value_of(id_); }

const Tensor& Tape::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.param != nullptr ? n.param->value : n.value;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  // The node reads the parameter in place; the tape must not outlive a change
  // of p.value.
  Node n;
  n.requires_grad = grad_enabled_;
  n.param = &p;
  n.param_grad = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) {
      require(&v.tape() == this, ErrorKind::kInvalidArgument, "input from a different tape");
      if (nodes_[v.id()].requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_slot(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.param_grad != nullptr) {
    Parameter& p = *n.param_grad;
    if (p.grad.empty()) p.grad = Tensor::zeros(p.value.shape());
    return &p.grad;
  }
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return &n.grad;
}

void Tape::backward(const Var& loss) {
  require(&loss.tape() == this, ErrorKind::kInvalidArgument, "loss from a different tape");
  require(!backward_done_, ErrorKind::kInvalidArgument,
          "backward() already ran on this tape; build a new tape per step");
  require(loss.value().numel() == 1 && !loss.value().is_complex(), ErrorKind::kShapeMismatch,
          "backward() needs a scalar loss, got " + shape_string(loss.shape()));
  backward_done_ = true;
  Tensor* seed = grad_slot(loss);
  if (seed == nullptr) return;
  (*seed)[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.param != nullptr && !n.param->grad.empty()) return n.param->grad;
  if (n.grad.empty()) return Tensor::zeros(value_of(v.id()).shape());
  return n.grad;
}

// ---------------------------------------------------------------------------
// Primitives.

Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul_values(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (Tensor* ga = t.grad_slot(a))
      gemm_nt_acc(g.data().data(), bv.data().data(), ga->data().data(), m, k, n);
    if (Tensor* gb = t.grad_slot(b))
      gemm_tn_acc(av.data().data(), g.data().data(), gb->data().data(), m, k, n);
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) *ga += g;
    if (Tensor* gb = t.grad_slot(b)) *gb += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) *ga += g;
    if (Tensor* gb = t.grad_slot(b)) axpy(-1.0, g, *gb);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  return a.tape().record(hadamard(a.value(), b.value()), {a, b},
                         [a, b](Tape& t, const Tensor& g) {
                           if (Tensor* ga = t.grad_slot(a)) *ga += hadamard(g, b.value());
                           if (Tensor* gb = t.grad_slot(b)) *gb += hadamard(g, a.value());
                         });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  const auto x = a.value().data();
  const auto y = b.value().data();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / std::max(y[i], kClampFloor);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const auto x = a.value().data();
    const auto y = b.value().data();
    if (Tensor* ga = t.grad_slot(a))
      for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] / std::max(y[i], kClampFloor);
    if (Tensor* gb = t.grad_slot(b))
      for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] > kClampFloor) (*gb)[i] -= g[i] * x[i] / (y[i] * y[i]);
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(a.value() * s, {a}, [a, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) axpy(s, g, *ga);
  });
}

Var add_scalar(const Var& a, double s) {
  return a.tape().record(map_values(a.value(), [s](double v) { return v + s; }), {a},
                         [a](Tape& t, const Tensor& g) {
                           if (Tensor* ga = t.grad_slot(a)) *ga += g;
                         });
}

Var scale_by(const Var& s, const Var& x) {
  require(s.value().numel() == 1, ErrorKind::kShapeMismatch, "scale_by needs a one-element scale");
  const double sv = s.value()[0];
  return x.tape().record(x.value() * sv, {s, x}, [s, x](Tape& t, const Tensor& g) {
    if (Tensor* gs = t.grad_slot(s)) {
      double acc = 0.0;
      const auto xv = x.value().data();
      for (std::size_t i = 0; i < xv.size(); ++i) acc += g[i] * xv[i];
      (*gs)[0] += acc;
    }
    if (Tensor* gx = t.grad_slot(x)) axpy(s.value()[0], g, *gx);
  });
}

Var exp(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) { return std::exp(v); });
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(out), {a}, [a, self](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const Tensor& y = t.value_of(self);
      for (std::size_t i = 0; i < y.numel(); ++i) (*ga)[i] += g[i] * y[i];
    }
  });
}

Var log(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) { return std::log(std::max(v, kClampFloor)); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const auto x = a.value().data();
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > kClampFloor) (*ga)[i] += g[i] / x[i];
    }
  });
}

Var abs(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) { return std::abs(v); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const auto x = a.value().data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) (*ga)[i] += g[i];
        else if (x[i] < 0.0) (*ga)[i] -= g[i];
      }
    }
  });
}

Var square(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) { return v * v; });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const auto x = a.value().data();
      for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += 2.0 * x[i] * g[i];
    }
  });
}

Var relu(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const auto x = a.value().data();
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0) (*ga)[i] += g[i];
    }
  });
}

Var softplus(const Var& a) {
  Tensor out = map_values(a.value(), [](double v) {
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const auto x = a.value().data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double sig = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                       : std::exp(x[i]) / (1.0 + std::exp(x[i]));
        (*ga)[i] += g[i] * sig;
      }
    }
  });
}

Var softmax(const Var& a) {
  require_matrix(a.value(), "softmax");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = out.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out.at(i, j) = std::exp(out.at(i, j) - mx));
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= z;
  }
  const std::size_t self = a.tape().size();
  return a.tape().record(std::move(out), {a}, [a, self, m, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      const Tensor& y = t.value_of(self);
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y.at(i, j);
        for (std::size_t j = 0; j < n; ++j) ga->at(i, j) += y.at(i, j) * (g[i * n + j] - dot);
      }
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a))
      for (double& v : ga->data()) v += g[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

Var sum_rows(const Var& a) {
  require_matrix(a.value(), "sum_rows");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value().at(i, j);
  return a.tape().record(std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga->at(i, j) += g[j];
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "concat of nothing");
  require(axis < 2, ErrorKind::kInvalidArgument, "concat axis must be 0 or 1");
  const Tensor& first = parts.front().value();
  require_matrix(first, "concat");
  const std::size_t other = first.dim(1 - axis);
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat");
    require(p.value().dim(1 - axis) == other, ErrorKind::kShapeMismatch,
            "concat: mismatched extent on the non-concatenated axis");
    total += p.value().dim(axis);
  }
  Tensor out(axis == 0 ? Shape{total, other} : Shape{other, total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < v.dim(0); ++i)
      for (std::size_t j = 0; j < v.dim(1); ++j)
        if (axis == 0) out.at(offset + i, j) = v.at(i, j);
        else out.at(i, offset + j) = v.at(i, j);
    offset += v.dim(axis);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs, axis](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t r = p.value().dim(0), c = p.value().dim(1);
      if (Tensor* gp = t.grad_slot(p))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            gp->at(i, j) += axis == 0 ? g.at(offset + i, j) : g.at(i, offset + j);
      offset += axis == 0 ? r : c;
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_matrix(a.value(), "slice");
  require(axis < 2 && begin < end && end <= a.value().dim(axis), ErrorKind::kInvalidArgument,
          "slice range out of bounds");
  const std::size_t m = axis == 0 ? end - begin : a.rows();
  const std::size_t n = axis == 1 ? end - begin : a.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.at(i, j) = axis == 0 ? a.value().at(begin + i, j) : a.value().at(i, begin + j);
  return a.tape().record(std::move(out), {a}, [a, axis, begin, m, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          (axis == 0 ? ga->at(begin + i, j) : ga->at(i, begin + j)) += g.at(i, j);
  });
}

Var transpose(const Var& a) {
  return a.tape().record(transpose_values(a.value()), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_slot(a)) *ga += transpose_values(g);
  });
}

Var broadcast_rows(const Var& row, std::size_t m) {
  require(row.value().rank() == 2 && row.rows() == 1, ErrorKind::kShapeMismatch,
          "broadcast_rows needs a [1, n] row");
  if (m == 1) return row;
  Var ones = row.tape().constant(Tensor::filled({m, 1}, 1.0));
  return matmul(ones, row);
}

Var linear(const Var& x, const Var& w, const Var& b) {
  return add(matmul(x, w), broadcast_rows(b, x.rows()));
}

// ---------------------------------------------------------------------------
// Parameters.

Parameter& ParamStore::add(const std::string& name, Tensor init) {
  require(!contains(name), ErrorKind::kInvalidArgument, "duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  p.value = std::move(init);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorKind::kInvalidArgument, "no parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorKind::kInvalidArgument, "no parameter '" + name + "'");
  return params_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& p : params_)
    if (!p.grad.empty()) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
}

double ParamStore::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm && max_norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params_)
      for (double& g : p.grad.data()) g *= s;
  }
  return norm;
}

void ParamStore::adam_step(const AdamConfig& c) {
  for (const auto& p : params_) {
    if (p.grad.empty()) continue;
    for (double g : p.grad.data())
      if (!std::isfinite(g))
        fail(ErrorKind::kNumerical, "non-finite gradient in parameter '" + p.name + "'");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  for (auto& p : params_) {
    if (p.grad.empty()) continue;
    if (p.adam_m.empty()) {
      p.adam_m = Tensor::zeros(p.value.shape());
      p.adam_v = Tensor::zeros(p.value.shape());
    }
    auto w = p.value.data();
    auto g = p.grad.data();
    const auto& sh = p.value.shape();
    const bool decay = c.weight_decay > 0.0 && sh.size() == 2 && sh[0] > 1 && sh[1] > 1;
    auto m = p.adam_m.data();
    auto v = p.adam_v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      if (decay) w[i] -= c.lr * c.weight_decay * w[i];
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  require(other.size() == size(), ErrorKind::kShapeMismatch, "parameter stores differ in size");
  for (auto& p : params_) {
    const Parameter& q = other.at(p.name);
    require(q.value.shape() == p.value.shape(), ErrorKind::kShapeMismatch,
            "parameter '" + p.name + "' changed shape");
    p.value = q.value;
  }
}

void ParamStore::save(const std::filesystem::path& path, const std::string& meta) const {
  std::vector<std::pair<std::string, Tensor>> entries;
  for (const auto& p : params_) entries.emplace_back(p.name, p.value);
  write_tensor_file(path, entries, meta);
}

ParamStore ParamStore::load(const std::filesystem::path& path, std::string* meta) {
  ParamStore store;
  for (auto& [name, t] : read_tensor_file(path, meta)) store.add(name, std::move(t));
  return store;
}

// ---------------------------------------------------------------------------
// Tensor archive.

namespace {

constexpr char kArchiveMagic[4] = {'R', 'P', 'C', 'K'};
constexpr std::uint32_t kArchiveVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), ErrorKind::kTruncatedPayload, "truncated archive: " + what);
  return v;
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, Tensor>>& entries,
                       const std::string& meta) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  os.write(kArchiveMagic, 4);
  put<std::uint32_t>(os, kArchiveVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    require(!t.is_complex(), ErrorKind::kUnsupported, "archive stores real tensors only");
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  }
  require(static_cast<bool>(os), ErrorKind::kIo, "write failed for " + path.string());
}

std::vector<std::pair<std::string, Tensor>> read_tensor_file(const std::filesystem::path& path,
                                                             std::string* meta) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kFileNotFound, "cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, kArchiveMagic, 4) == 0,
          ErrorKind::kBadMagic, path.string() + ": bad magic");
  const auto version = take<std::uint32_t>(is, "version");
  require(version == kArchiveVersion, ErrorKind::kUnsupportedVersion,
          path.string() + ": unsupported archive version");
  const auto meta_len = take<std::uint32_t>(is, "meta length");
  std::string m(meta_len, '\0');
  is.read(m.data(), meta_len);
  require(static_cast<bool>(is), ErrorKind::kTruncatedPayload, "truncated archive: meta");
  if (meta) *meta = std::move(m);
  const auto count = take<std::uint32_t>(is, "entry count");
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = take<std::uint32_t>(is, "name length");
    require(name_len < (1u << 16), ErrorKind::kDimOverflow, "archive entry name too long");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = take<std::uint32_t>(is, "rank");
    require(rank >= 1 && rank <= 8, ErrorKind::kDimOverflow, "archive entry rank out of range");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = take<std::uint64_t>(is, "dims");
      require(d > 0 && n <= (std::uint64_t{1} << 36) / d, ErrorKind::kDimOverflow,
              "archive entry too large");
      n *= d;
    }
    std::vector<double> data(n);
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    require(static_cast<bool>(is), ErrorKind::kTruncatedPayload,
            "truncated archive payload for '" + name + "'");
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checks.

namespace {

std::vector<std::size_t> pick_entries(std::size_t numel, std::size_t max_entries) {
  std::vector<std::size_t> idx;
  if (max_entries == 0 || max_entries >= numel) {
    for (std::size_t i = 0; i < numel; ++i) idx.push_back(i);
  } else {
    for (std::size_t k = 0; k < max_entries; ++k) idx.push_back(k * numel / max_entries);
  }
  return idx;
}

void record_error(GradCheckReport& r, double analytic, double numeric, double floor,
                  const std::string& where) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  const double err = std::abs(analytic - numeric) / denom;
  ++r.checked;
  if (err > r.max_rel_error || r.worst.empty()) {
    r.max_rel_error = std::max(err, r.max_rel_error);
    std::ostringstream os;
    os << where << ": analytic " << analytic << " vs numeric " << numeric;
    r.worst = os.str();
  }
}

}  // namespace

GradCheckReport check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    Var loss = fn(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape(false);
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return fn(tape, vars).item();
  };
  GradCheckReport report;
  std::vector<Tensor> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j : pick_entries(xs[i].numel(), options.max_entries)) {
      const double orig = xs[i][j];
      xs[i][j] = orig + options.h;
      const double fp = eval(xs);
      xs[i][j] = orig - options.h;
      const double fm = eval(xs);
      xs[i][j] = orig;
      const double numeric = (fp - fm) / (2.0 * options.h);
      record_error(report, analytic[i][j], numeric, options.abs_floor,
                   "input " + std::to_string(i) + " entry " + std::to_string(j));
    }
  }
  return report;
}

GradCheckReport check_param_gradients(ParamStore& store, const std::function<Var(Tape&)>& fn,
                                      const std::vector<std::pair<std::string, std::size_t>>& entries,
                                      const GradCheckOptions& options) {
  store.zero_grad();
  {
    Tape tape;
    Var loss = fn(tape);
    tape.backward(loss);
  }
  GradCheckReport report;
  for (const auto& [name, index] : entries) {
    Parameter& p = store.at(name);
    require(index < p.value.numel(), ErrorKind::kInvalidArgument, "entry index out of range");
    const double analytic = p.grad.empty() ? 0.0 : p.grad[index];
    const double orig = p.value[index];
    auto eval = [&] {
      Tape tape(false);
      return fn(tape).item();
    };
    p.value[index] = orig + options.h;
    const double fp = eval();
    p.value[index] = orig - options.h;
    const double fm = eval();
    p.value[index] = orig;
    record_error(report, analytic, (fp - fm) / (2.0 * options.h), options.abs_floor,
                 name + "[" + std::to_string(index) + "]");
  }
  store.zero_grad();
  return report;
}

}  // namespace radpose::ad
