#include "stablecf/fftwrap.hpp"

#include <fftw3.h>

#include <mutex>

namespace stablecf {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void fft_forward(std::vector<std::complex<double>>& data) {
  const int n = static_cast<int>(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    // FFTW planning mutates global state; FFTW_ESTIMATE leaves the input
    // buffer untouched, so planning in place is safe.
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
}

}  // namespace stablecf
