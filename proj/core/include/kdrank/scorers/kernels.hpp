#pragma once

#include <cstddef>
#include <vector>

#include "kdrank/autodiff/tape.hpp"

namespace kdrank {

/// Gaussian kernels over cosine similarity. Centers are kept strictly increasing.
struct KernelConfig {
  std::vector<double> centers;
  double sigma = 0.1;

  /// 11 kernels: -0.9, -0.7, ..., 0.9 and an exact-match kernel at 1.0; sigma 0.1.
  static KernelConfig defaults();

  std::size_t count() const { return centers.size(); }
  void validate() const;
  bool operator==(const KernelConfig&) const = default;
};

/// Guard added inside the log of a kernel's passage-term sum.
inline constexpr double kKernelLogEpsilon = 1e-10;

/// act[k, i, j] = exp(-(cos[i, j] - mu_k)^2 / (2 sigma^2)) for a [m × n] input.
Var kernel_activations(const Var& cos, const KernelConfig& kernels);

/// Per-kernel soft-match features: sum_i log(sum_j act[k, i, j] + eps). Shape [K].
Var kernel_pooling(const Var& query_rep, const Var& passage_rep, const KernelConfig& kernels);

}  // namespace kdrank
