#include "radpose/fft.hpp"

#include <cmath>
#include <numbers>

#include "radpose/error.hpp"

namespace radpose {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

std::vector<cplx> twiddle_table(std::size_t n) {
  std::vector<cplx> w(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    w[k] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

// Iterative Cooley-Tukey, decimation in time. `w` is twiddle_table(a.size()).
void fft_inplace(std::span<cplx> a, const std::vector<cplx>& w) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * w[k * step];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

void check_pad(std::size_t len, std::size_t pad_to) {
  require(is_power_of_two(pad_to), ErrorKind::kInvalidArgument,
          "fft size " + std::to_string(pad_to) + " is not a power of two");
  require(pad_to >= len, ErrorKind::kInvalidArgument,
          "fft size " + std::to_string(pad_to) + " is shorter than the input (" +
              std::to_string(len) + ")");
}

struct FiberLayout {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

FiberLayout fiber_layout(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), ErrorKind::kInvalidArgument,
          "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  FiberLayout f;
  for (std::size_t i = 0; i < axis; ++i) f.outer *= shape[i];
  f.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) f.inner *= shape[i];
  return f;
}

}  // namespace

std::vector<cplx> fft_1d(std::span<const cplx> x, std::size_t pad_to) {
  check_pad(x.size(), pad_to);
  std::vector<cplx> out(pad_to, cplx{0.0, 0.0});
  std::copy(x.begin(), x.end(), out.begin());
  fft_inplace(out, twiddle_table(pad_to));
  return out;
}

Tensor fft_along(const Tensor& t, std::size_t axis, std::size_t pad_to) {
  require(t.is_complex(), ErrorKind::kInvalidArgument, "fft_along needs a complex tensor");
  const auto f = fiber_layout(t.shape(), axis);
  check_pad(f.len, pad_to);

  Shape out_shape = t.shape();
  out_shape[axis] = pad_to;
  Tensor out(out_shape, DType::kComplex);
  const auto w = twiddle_table(pad_to);
  auto src = t.cdata();
  auto dst = out.cdata();
  std::vector<cplx> fiber(pad_to);
  for (std::size_t o = 0; o < f.outer; ++o) {
    for (std::size_t i = 0; i < f.inner; ++i) {
      std::fill(fiber.begin(), fiber.end(), cplx{0.0, 0.0});
      for (std::size_t k = 0; k < f.len; ++k) fiber[k] = src[(o * f.len + k) * f.inner + i];
      fft_inplace(fiber, w);
      for (std::size_t k = 0; k < pad_to; ++k) dst[(o * pad_to + k) * f.inner + i] = fiber[k];
    }
  }
  return out;
}

Tensor center_along(const Tensor& t, std::size_t axis) {
  const auto f = fiber_layout(t.shape(), axis);
  Tensor out = t;
  const double inv = 1.0 / static_cast<double>(f.len);
  if (t.is_complex()) {
    auto d = out.cdata();
    for (std::size_t o = 0; o < f.outer; ++o) {
      for (std::size_t i = 0; i < f.inner; ++i) {
        cplx mean{0.0, 0.0};
        for (std::size_t k = 0; k < f.len; ++k) mean += d[(o * f.len + k) * f.inner + i];
        mean *= inv;
        for (std::size_t k = 0; k < f.len; ++k) d[(o * f.len + k) * f.inner + i] -= mean;
      }
    }
  } else {
    auto d = out.data();
    for (std::size_t o = 0; o < f.outer; ++o) {
      for (std::size_t i = 0; i < f.inner; ++i) {
        double mean = 0.0;
        for (std::size_t k = 0; k < f.len; ++k) mean += d[(o * f.len + k) * f.inner + i];
        mean *= inv;
        for (std::size_t k = 0; k < f.len; ++k) d[(o * f.len + k) * f.inner + i] -= mean;
      }
    }
  }
  return out;
}

}  // namespace radpose
