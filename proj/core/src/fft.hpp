#pragma once

#include <complex>
#include <vector>

namespace edecoh::detail {

/// Unnormalized forward DFT, sum_j in_j exp(-2 pi i j k / n). Plans are
/// cached per size; safe to call from several threads.
std::vector<std::complex<double>> forward_dft(const std::vector<std::complex<double>>& in);

}  // namespace edecoh::detail
