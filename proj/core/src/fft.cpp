#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

namespace edecoh::detail {

namespace {

struct PlanCache {
  std::mutex mutex;
  std::map<std::size_t, fftw_plan> plans;

  ~PlanCache() {
    for (auto& [n, plan] : plans) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> in(fftw_alloc_complex(n), fftw_free);
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(fftw_alloc_complex(n), fftw_free);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans.emplace(n, plan);
    return plan;
  }
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

std::vector<std::complex<double>> forward_dft(const std::vector<std::complex<double>>& in) {
  std::vector<std::complex<double>> input = in;
  std::vector<std::complex<double>> out(in.size());
  if (in.empty()) return out;
  fftw_plan plan = cache().get(in.size());
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(input.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace edecoh::detail
