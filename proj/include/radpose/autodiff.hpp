#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose::ad {

class Tape;
struct Parameter;


// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  std::size_t rows() const { return value().dim(0); }
  std::size_t cols() const { return value().dim(1); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

// Eager reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, so backward() walks them once in reverse.
//
// Gradient contract: a tape may be back-propagated once; a second backward()
// throws. Parameter gradients accumulate into Parameter::grad across tapes
// until ParamStore::zero_grad().
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is kept on the tape (read with grad()).
  Var variable(Tensor value);
  // Leaf bound to a parameter; backward() adds its gradient into p.grad.
  Var param(Parameter& p);
  // Read-only binding; never receives a gradient.
  Var param(const Parameter& p);

  void backward(const Var& loss);
  bool backward_done() const { return backward_done_; }
  bool grad_enabled() const { return grad_enabled_; }

  // Gradient of a node after backward(); zeros if it was never reached.
  Tensor grad(const Var& v) const;
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  // Op-implementation interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  // Gradient accumulator for v, zero-initialized on first use; nullptr when v
  // does not require a gradient.
  Tensor* grad_slot(const Var& v);
  const Tensor& value_of(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    const Parameter* param = nullptr;
    Parameter* param_grad = nullptr;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Elementwise ops require identical shapes; the only broadcasts
// are the explicit scalar forms.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Denominator floored at kClampFloor.
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// s is a one-element Var multiplying every entry of x.
Var scale_by(const Var& s, const Var& x);
Var exp(const Var& a);
// Argument floored at kClampFloor.
Var log(const Var& a);
// Subgradient 0 at exactly 0.
Var abs(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
// Row-wise softmax over the last axis of a matrix.
Var softmax(const Var& a);
// Sum of all entries, shape [1].
Var sum(const Var& a);
Var mean(const Var& a);
// Column sums of a matrix, shape [1, n].
Var sum_rows(const Var& a);
Var concat(std::span<const Var> parts, std::size_t axis);
Var reshape(const Var& a, Shape shape);
// Matrix rows/cols [begin, end) along axis 0 or 1.
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var transpose(const Var& a);

// Composites.
Var broadcast_rows(const Var& row, std::size_t m);  // [1,n] -> [m,n], via matmul
Var linear(const Var& x, const Var& w, const Var& b);  // x w + b per row

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }

inline constexpr double kClampFloor = 1e-12;

// Dense kernels shared with the loss code.
Tensor matmul_values(const Tensor& a, const Tensor& b);
Tensor transpose_values(const Tensor& a);

// ---------------------------------------------------------------------------
// Parameters and optimizer.

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay w -= lr * weight_decay * w, applied to matrices only
  // (rank 2, both dims > 1), never to biases.
  double weight_decay = 0.0;
};

class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t step_count() const { return step_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  // Bias-corrected Adam. A non-finite gradient aborts before any update with
  // an error naming the parameter.
  void adam_step(const AdamConfig& config);
  // Rescales all gradients so their joint L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Copies values (not optimizer state) from a store with identical layout.
  void copy_values_from(const ParamStore& other);

  void save(const std::filesystem::path& path, const std::string& meta) const;
  static ParamStore load(const std::filesystem::path& path, std::string* meta = nullptr);

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  std::size_t step_ = 0;
};

// Tensor archive ("RPCK" v1): magic, u32 version, u32 meta length + bytes,
// u32 count, then per entry: u32 name length + bytes, u32 rank, u64 dims,
// f64 payload (little-endian). Used for checkpoints and latent caches.
void write_tensor_file(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, Tensor>>& entries,
                       const std::string& meta);
std::vector<std::pair<std::string, Tensor>> read_tensor_file(const std::filesystem::path& path,
                                                             std::string* meta = nullptr);

// ---------------------------------------------------------------------------
// Central finite-difference gradient check.

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input i, entry j: analytic a vs numeric n"
};

// Relative error is |a - n| / max(|a|, |n|, abs_floor).
struct GradCheckOptions {
  double h = 1e-5;
  double abs_floor = 1e-6;
  // Entries checked per input; all when 0. Picked by a seeded stride.
  std::size_t max_entries = 0;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

GradCheckReport check_gradients(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options = {});

// Same check against named parameter entries; fn builds the loss on a fresh
// tape from the store each call. `entries` lists (parameter name, flat index).
GradCheckReport check_param_gradients(ParamStore& store, const std::function<Var(Tape&)>& fn,
                                      const std::vector<std::pair<std::string, std::size_t>>& entries,
                                      const GradCheckOptions& options = {});

}  // namespace radpose::ad
