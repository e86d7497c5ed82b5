#pragma once

#include <complex>
#include <span>
#include <vector>

namespace qpower::fft {

// Unnormalized forward real transform: n real samples -> n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// Inverse of rfft including the 1/n factor; `n` is the real output length.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

}  // namespace qpower::fft
