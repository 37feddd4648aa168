#include "radpose/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "radpose/error.hpp"

namespace radpose {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kBadMagic: return "bad magic";
    case ErrorKind::kUnsupportedVersion: return "unsupported version";
    case ErrorKind::kDimOverflow: return "dim overflow";
    case ErrorKind::kTruncatedPayload: return "truncated payload";
    case ErrorKind::kFileNotFound: return "file not found";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kNumerical: return "numerical error";
    case ErrorKind::kUnsupported: return "unsupported";
  }
  return "unknown";
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  for (auto d : shape_) require(d > 0, ErrorKind::kShapeMismatch, "zero-sized dimension");
  data_.assign(shape_product(shape_) * (is_complex() ? 2 : 1), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(std::move(data)) {
  require(data_.size() == shape_product(shape_) * (is_complex() ? 2 : 1),
          ErrorKind::kShapeMismatch,
          "data length does not match shape " + shape_string(shape_));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::span<cplx> Tensor::cdata() {
  require(is_complex(), ErrorKind::kInvalidArgument, "cdata() on a real tensor");
  return {reinterpret_cast<cplx*>(data_.data()), data_.size() / 2};
}

std::span<const cplx> Tensor::cdata() const {
  require(is_complex(), ErrorKind::kInvalidArgument, "cdata() on a real tensor");
  return {reinterpret_cast<const cplx*>(data_.data()), data_.size() / 2};
}

double Tensor::item() const {
  require(!is_complex() && data_.size() == 1, ErrorKind::kShapeMismatch,
          "item() needs a one-element real tensor, got " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_product(shape) == numel(), ErrorKind::kShapeMismatch,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::real_part() const {
  if (!is_complex()) return *this;
  Tensor out(shape_);
  for (std::size_t i = 0; i < numel(); ++i) out.data_[i] = data_[2 * i];
  return out;
}

Tensor Tensor::imag_part() const {
  Tensor out(shape_);
  if (!is_complex()) return out;
  for (std::size_t i = 0; i < numel(); ++i) out.data_[i] = data_[2 * i + 1];
  return out;
}

Tensor make_complex(const Tensor& re, const Tensor& im) {
  require(re.shape() == im.shape() && !re.is_complex() && !im.is_complex(),
          ErrorKind::kShapeMismatch, "make_complex needs two real tensors of equal shape");
  Tensor out(re.shape(), DType::kComplex);
  auto d = out.data();
  for (std::size_t i = 0; i < re.numel(); ++i) {
    d[2 * i] = re[i];
    d[2 * i + 1] = im[i];
  }
  return out;
}

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::kShapeMismatch, std::string(op) + ": " + shape_string(a.shape()) +
                                        " vs " + shape_string(b.shape()));
  }
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  Tensor out = a;
  out += b;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  check_same(a, b, "sub");
  Tensor out = a;
  axpy(-1.0, b, out);
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same(a, b, "mul");
  require(!a.is_complex(), ErrorKind::kUnsupported, "hadamard on complex tensors");
  Tensor out = a;
  auto o = out.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
  return out;
}

Tensor operator*(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

Tensor operator*(double s, const Tensor& a) { return a * s; }

Tensor& operator+=(Tensor& a, const Tensor& b) {
  check_same(a, b, "add");
  auto o = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return a;
}

void axpy(double s, const Tensor& b, Tensor& a) {
  check_same(a, b, "axpy");
  auto o = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += s * y[i];
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same(a, b, "max_abs_diff");
  double m = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor permute(const Tensor& t, std::span<const std::size_t> order) {
  const std::size_t rank = t.rank();
  require(order.size() == rank, ErrorKind::kShapeMismatch, "permute order has wrong rank");
  std::vector<bool> seen(rank, false);
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    require(order[i] < rank && !seen[order[i]], ErrorKind::kInvalidArgument,
            "permute order is not a permutation");
    seen[order[i]] = true;
    out_shape[i] = t.dim(order[i]);
  }
  Tensor out(out_shape, t.dtype());
  const auto in_strides = strides_of(t.shape());
  const std::size_t width = t.is_complex() ? 2 : 1;
  std::vector<std::size_t> idx(rank, 0);
  auto src = t.data();
  auto dst = out.data();
  const std::size_t n = t.numel();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < rank; ++i) s += idx[i] * in_strides[order[i]];
    for (std::size_t w = 0; w < width; ++w) dst[flat * width + w] = src[s * width + w];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace radpose
