#include "kdrank/scorers/kernels.hpp"

#include <cmath>

#include "kdrank/autodiff/ops.hpp"
#include "kdrank/error.hpp"

namespace kdrank {

KernelConfig KernelConfig::defaults() {
  return KernelConfig{{-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}, 0.1};
}

void KernelConfig::validate() const {
  KDRANK_CHECK(!centers.empty(), ConfigError, "kernel config needs at least one kernel");
  KDRANK_CHECK(sigma > 0.0 && std::isfinite(sigma), ConfigError, "kernel sigma must be positive");
  for (std::size_t k = 0; k < centers.size(); ++k) {
    KDRANK_CHECK(centers[k] >= -1.0 && centers[k] <= 1.0, ConfigError, "kernel centers must lie in [-1, 1]");
    KDRANK_CHECK(k == 0 || centers[k] > centers[k - 1], ConfigError,
                 "kernel centers must be strictly increasing");
  }
}

Var kernel_activations(const Var& cos, const KernelConfig& kernels) {
  KDRANK_CHECK(cos.valid(), Error, "kernel_activations on an unbound variable");
  KDRANK_CHECK(cos.shape().size() == 2, ShapeError, "kernel_activations expects a [m x n] matrix");
  const Tensor& c = cos.value();
  const std::size_t cells = c.size();
  const std::size_t kcount = kernels.count();
  const double two_sigma_sq = 2.0 * kernels.sigma * kernels.sigma;
  Tensor out(Shape{kcount, c.rows(), c.cols()});
  for (std::size_t k = 0; k < kcount; ++k) {
    const double mu = kernels.centers[k];
    for (std::size_t i = 0; i < cells; ++i) {
      const double d = c[i] - mu;
      out[k * cells + i] = std::exp(-(d * d) / two_sigma_sq);
    }
  }
  Tensor acts = out;
  return cos.tape().record(
      "kernel_activations", std::move(out), {cos},
      [cos, centers = kernels.centers, sigma = kernels.sigma, acts = std::move(acts)](Tape& t,
                                                                                     const Tensor& g) {
        const Tensor& c = cos.value();
        const std::size_t cells = c.size();
        const double inv_sigma_sq = 1.0 / (sigma * sigma);
        Tensor& gc = t.grad_buffer(cos);
        for (std::size_t k = 0; k < centers.size(); ++k) {
          for (std::size_t i = 0; i < cells; ++i) {
            gc[i] -= g[k * cells + i] * acts[k * cells + i] * (c[i] - centers[k]) * inv_sigma_sq;
          }
        }
      });
}

Var kernel_pooling(const Var& query_rep, const Var& passage_rep, const KernelConfig& kernels) {
  using namespace ops;
  const Var acts = kernel_activations(cosine_matrix(query_rep, passage_rep), kernels);
  const Var per_query_term = log(add_scalar(sum_axis(acts, 2), kKernelLogEpsilon));
  return sum_axis(per_query_term, 1);
}

}  // namespace kdrank
