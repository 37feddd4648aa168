#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "radpose/error.hpp"
#include "radpose/rng.hpp"
#include "radpose/tensor.hpp"

namespace radpose::test {

inline Tensor random_real(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

inline Tensor random_complex(Shape shape, Rng& rng) {
  Tensor t(std::move(shape), DType::kComplex);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// O(N^2) DFT of x zero-padded to n.
inline std::vector<std::complex<double>> brute_dft(const std::vector<std::complex<double>>& x,
                                                   std::size_t n) {
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * j % n) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

// Kind of the radpose::Error thrown by fn; fails the test if none is thrown.
inline ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "radpose_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace radpose::test
