#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace radpose {

using Shape = std::vector<std::size_t>;
using cplx = std::complex<double>;

enum class DType { kReal, kComplex };

std::size_t shape_product(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major N-d array of doubles. Complex tensors store interleaved
// (re, im) pairs so data().size() == 2 * numel().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, DType dtype = DType::kReal);
  Tensor(Shape shape, std::vector<double> data, DType dtype = DType::kReal);

  static Tensor zeros(Shape shape, DType dtype = DType::kReal) {
    return Tensor(std::move(shape), dtype);
  }
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor row(std::span<const double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return shape_product(shape_); }
  DType dtype() const { return dtype_; }
  bool is_complex() const { return dtype_ == DType::kComplex; }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  // Complex view; only valid on complex tensors.
  std::span<cplx> cdata();
  std::span<const cplx> cdata() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-d accessors for real matrices.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double item() const;

  Tensor reshaped(Shape shape) const;
  Tensor real_part() const;
  Tensor imag_part() const;

  bool same_shape(const Tensor& other) const {
    return shape_ == other.shape_ && dtype_ == other.dtype_;
  }

 private:
  Shape shape_;
  DType dtype_ = DType::kReal;
  std::vector<double> data_;
};

Tensor make_complex(const Tensor& re, const Tensor& im);

// Exact-shape elementwise arithmetic; scalars are the only broadcast.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
Tensor operator*(double s, const Tensor& a);
Tensor& operator+=(Tensor& a, const Tensor& b);

// a += s * b
void axpy(double s, const Tensor& b, Tensor& a);

double sum_squares(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

// Moves `axis` of a shape-generic tensor via an axis permutation.
Tensor permute(const Tensor& t, std::span<const std::size_t> order);

// Row-major strides for a shape.
std::vector<std::size_t> strides_of(const Shape& shape);

}  // namespace radpose
