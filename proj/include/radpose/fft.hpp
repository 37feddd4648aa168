#pragma once

#include <span>
#include <vector>

#include "radpose/tensor.hpp"

namespace radpose {

bool is_power_of_two(std::size_t n);

// Unnormalized forward DFT, X_k = sum_n x_n exp(-2 pi i k n / N), of x
// zero-padded to `pad_to` samples. Radix-2 only: pad_to must be a power of
// two and at least x.size().
std::vector<cplx> fft_1d(std::span<const cplx> x, std::size_t pad_to);

// Applies fft_1d to every fiber of a complex tensor along `axis`; the output
// has dim(axis) == pad_to.
Tensor fft_along(const Tensor& t, std::size_t axis, std::size_t pad_to);

// Subtracts the per-fiber mean along `axis` (complex mean for complex input).
Tensor center_along(const Tensor& t, std::size_t axis);

}  // namespace radpose
