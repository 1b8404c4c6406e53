#pragma once
// Thin thread-safe wrapper over FFTW's complex-to-complex transform.

#include <complex>
#include <vector>

namespace stablecf {

// In-place forward DFT (negative-exponent convention), length must be a
// power of two for the callers in this library but any length FFTW accepts
// works.  Planning is serialized internally; execution is concurrent-safe.
void fft_forward(std::vector<std::complex<double>>& data);

}  // namespace stablecf
