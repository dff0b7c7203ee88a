#include "kdrank/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kdrank/error.hpp"

namespace kdrank::ops {
namespace {

Tape& tape_of(const Var& a) {
  KDRANK_CHECK(a.valid(), Error, "operation on an unbound variable");
  return a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  KDRANK_CHECK(b.valid() && &b.tape() == &t, Error, "operands recorded on different tapes");
  return t;
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  KDRANK_CHECK(a.shape().size() == rank, ShapeError,
               std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                   shape_to_string(a.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  KDRANK_CHECK(a.shape() == b.shape(), ShapeError,
               std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                   shape_to_string(b.shape()));
}

// C[m×n] += A[m×k] · B[k×n]. For each C entry the products are added in k order.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n].
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
             double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[p * m + i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor transposed(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  }
  return out;
}

template <typename F, typename D>
Var unary(const char* name, const Var& a, F forward, D derivative) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  return t.record(name, std::move(out), {a}, [a, derivative](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * derivative(x[i]);
  });
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d != axis) out.push_back(shape[d]);
  }
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  KDRANK_CHECK(A.cols() == B.rows(), ShapeError,
               "matmul: inner dimensions differ " + shape_to_string(A.shape()) + " x " +
                   shape_to_string(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out(Shape{m, n});
  gemm_nn(m, k, n, A.ptr(), B.ptr(), out.ptr());
  return t.record("matmul", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      const Tensor bt = transposed(b.value());
      gemm_nn(m, n, k, g.ptr(), bt.ptr(), t.grad_buffer(a).ptr());
    }
    if (b.requires_grad()) {
      gemm_tn(k, m, n, a.value().ptr(), g.ptr(), t.grad_buffer(b).ptr());
    }
  });
}

Var matmul_bt(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_rank(a, 2, "matmul_bt");
  require_rank(b, 2, "matmul_bt");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  KDRANK_CHECK(A.cols() == B.cols(), ShapeError,
               "matmul_bt: feature dimensions differ " + shape_to_string(A.shape()) + " vs " +
                   shape_to_string(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor out(Shape{m, n});
  const Tensor bt = transposed(B);
  gemm_nn(m, k, n, A.ptr(), bt.ptr(), out.ptr());
  return t.record("matmul_bt", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    // out = A Bᵀ: dA = G B, dB = Gᵀ A.
    if (a.requires_grad()) gemm_nn(m, n, k, g.ptr(), b.value().ptr(), t.grad_buffer(a).ptr());
    if (b.requires_grad()) gemm_tn(n, m, k, g.ptr(), a.value().ptr(), t.grad_buffer(b).ptr());
  });
}

Var transpose(const Var& a) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "transpose");
  return t.record("transpose", transposed(a.value()), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor gt = transposed(g);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < gt.size(); ++i) ga[i] += gt[i];
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return t.record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    for (const Var& v : {a, b}) {
      if (!v.requires_grad()) continue;
      Tensor& gv = t.grad_buffer(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = tape_of(a, row);
  require_rank(a, 2, "add_row");
  const Tensor& A = a.value();
  const Tensor& R = row.value();
  const std::size_t m = A.rows(), n = A.cols();
  KDRANK_CHECK(R.size() == n, ShapeError,
               "add_row: row of shape " + shape_to_string(R.shape()) + " vs matrix " +
                   shape_to_string(A.shape()));
  Tensor out(A.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[i * n + j] + R[j];
  }
  return t.record("add_row", std::move(out), {a, row}, [a, row, m, n](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (row.requires_grad()) {
      Tensor& gr = t.grad_buffer(row);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return t.record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "mul");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return t.record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      const Tensor& B = b.value();
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (b.requires_grad()) {
      const Tensor& A = a.value();
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var neg(const Var& a) {
  return unary("neg", a, [](double x) { return -x; }, [](double) { return -1.0; });
}

Var scale(const Var& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Var add_scalar(const Var& a, double value) {
  return unary(
      "add_scalar", a, [value](double x) { return x + value; }, [](double) { return 1.0; });
}

Var scale_by(const Var& a, const Var& factor) {
  Tape& t = tape_of(a, factor);
  KDRANK_CHECK(factor.value().size() == 1, ShapeError, "scale_by: factor must hold one element");
  const Tensor& A = a.value();
  const double s = factor.value()[0];
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * s;
  return t.record("scale_by", std::move(out), {a, factor}, [a, factor](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      const double s = factor.value()[0];
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    }
    if (factor.requires_grad()) {
      const Tensor& A = a.value();
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      t.grad_buffer(factor)[0] += acc;
    }
  });
}

Var exp(const Var& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

namespace {
double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var sigmoid(const Var& a) {
  return unary("sigmoid", a, logistic, [](double x) {
    const double s = logistic(x);
    return s * (1.0 - s);
  });
}

Var gelu(const Var& a) {
  return unary(
      "gelu", a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](double x) {
        const double u = kGeluC * (x + kGeluA * x * x * x);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
      });
}

Var softplus(const Var& a) {
  return unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }, logistic);
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
  return t.record("sum", Tensor::scalar(acc), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(const Var& a) {
  KDRANK_CHECK(a.value().size() > 0, ShapeError, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_axis(const Var& a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  KDRANK_CHECK(axis < A.rank(), ShapeError, "sum_axis: axis out of range");
  const AxisSplit s = split_axis(A.shape(), axis);
  Tensor out(drop_axis(A.shape(), axis));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      double acc = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) acc += A[(o * s.extent + e) * s.inner + in];
      out[o * s.inner + in] = acc;
    }
  }
  return t.record("sum_axis", std::move(out), {a}, [a, s](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          ga[(o * s.extent + e) * s.inner + in] += g[o * s.inner + in];
        }
      }
    }
  });
}

Var max_axis(const Var& a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  KDRANK_CHECK(axis < A.rank(), ShapeError, "max_axis: axis out of range");
  const AxisSplit s = split_axis(A.shape(), axis);
  KDRANK_CHECK(s.extent > 0, ShapeError, "max_axis: reduction over an empty axis");
  Tensor out(drop_axis(A.shape(), axis));
  std::vector<std::size_t> argmax(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      std::size_t best = 0;
      double best_v = A[(o * s.extent) * s.inner + in];
      for (std::size_t e = 1; e < s.extent; ++e) {
        const double v = A[(o * s.extent + e) * s.inner + in];
        if (v > best_v) {
          best_v = v;
          best = e;
        }
      }
      out[o * s.inner + in] = best_v;
      argmax[o * s.inner + in] = best;
    }
  }
  return t.record("max_axis", std::move(out), {a},
                  [a, s, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                    Tensor& ga = t.grad_buffer(a);
                    for (std::size_t o = 0; o < s.outer; ++o) {
                      for (std::size_t in = 0; in < s.inner; ++in) {
                        const std::size_t e = argmax[o * s.inner + in];
                        ga[(o * s.extent + e) * s.inner + in] += g[o * s.inner + in];
                      }
                    }
                  });
}

Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

Var softmax(const Var& a, std::span<const std::uint8_t> keep) {
  Tape& t = tape_of(a);
  const Tensor& A = a.value();
  KDRANK_CHECK(A.rank() >= 1, ShapeError, "softmax of a scalar");
  const std::size_t n = A.shape().back();
  const std::size_t rows = n ? A.size() / n : 0;
  KDRANK_CHECK(keep.empty() || keep.size() == n, ShapeError, "softmax: mask length mismatch");
  auto kept = [&keep](std::size_t j) { return keep.empty() || keep[j] != 0; };
  Tensor out(A.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = A.ptr() + r * n;
    double* y = out.ptr() + r * n;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (kept(j)) mx = std::max(mx, x[j]);
    }
    if (mx == -INFINITY) continue;  // fully masked row stays zero
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!kept(j)) continue;
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  Tensor probs = out;
  return t.record("softmax", std::move(out), {a},
                  [a, n, rows, probs = std::move(probs)](Tape& t, const Tensor& g) {
                    Tensor& ga = t.grad_buffer(a);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double* y = probs.ptr() + r * n;
                      const double* gy = g.ptr() + r * n;
                      double inner = 0.0;
                      for (std::size_t j = 0; j < n; ++j) inner += gy[j] * y[j];
                      double* gx = ga.ptr() + r * n;
                      for (std::size_t j = 0; j < n; ++j) gx[j] += y[j] * (gy[j] - inner);
                    }
                  });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape& t = tape_of(x, gain);
  tape_of(x, bias);
  require_rank(x, 2, "layer_norm_rows");
  const Tensor& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  KDRANK_CHECK(gain.value().size() == n && bias.value().size() == n, ShapeError,
               "layer_norm_rows: gain/bias length must equal column count");
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  Tensor out(X.shape());
  Tensor normalized(X.shape());
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = X.ptr() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (row[j] - mu) * is;
      normalized[i * n + j] = xhat;
      out[i * n + j] = xhat * G[j] + B[j];
    }
  }
  return t.record("layer_norm_rows", std::move(out), {x, gain, bias},
                  [x, gain, bias, m, n, normalized = std::move(normalized),
                   inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                    const Tensor& G = gain.value();
                    if (gain.requires_grad() || bias.requires_grad()) {
                      Tensor& gg = t.grad_buffer(gain);
                      Tensor& gb = t.grad_buffer(bias);
                      for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                          gg[j] += g[i * n + j] * normalized[i * n + j];
                          gb[j] += g[i * n + j];
                        }
                      }
                    }
                    if (!x.requires_grad()) return;
                    Tensor& gx = t.grad_buffer(x);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double sum_d = 0.0, sum_dx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * G[j];
                        sum_d += d;
                        sum_dx += d * normalized[i * n + j];
                      }
                      for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * G[j];
                        gx[i * n + j] +=
                            inv_std[i] * (d - inv_n * sum_d - normalized[i * n + j] * inv_n * sum_dx);
                      }
                    }
                  });
}

Var cosine_matrix(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_rank(a, 2, "cosine_matrix");
  require_rank(b, 2, "cosine_matrix");
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  KDRANK_CHECK(A.cols() == B.cols(), ShapeError, "cosine_matrix: feature dimensions differ");
  const std::size_t m = A.rows(), n = B.rows(), d = A.cols();
  std::vector<double> na(m), nb(n);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += A[i * d + k] * A[i * d + k];
    na[i] = std::sqrt(s);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += B[j * d + k] * B[j * d + k];
    nb[j] = std::sqrt(s);
  }
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (na[i] == 0.0 || nb[j] == 0.0) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += A[i * d + k] * B[j * d + k];
      out[i * n + j] = s / (na[i] * nb[j]);
    }
  }
  Tensor cos = out;
  return t.record(
      "cosine_matrix", std::move(out), {a, b},
      [a, b, m, n, d, na = std::move(na), nb = std::move(nb), cos = std::move(cos)](
          Tape& t, const Tensor& g) {
        const Tensor& A = a.value();
        const Tensor& B = b.value();
        // d cos_ij / d a_i = b_j / (|a_i||b_j|) - cos_ij * a_i / |a_i|^2
        if (a.requires_grad()) {
          Tensor& ga = t.grad_buffer(a);
          for (std::size_t i = 0; i < m; ++i) {
            if (na[i] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
              if (nb[j] == 0.0) continue;
              const double gij = g[i * n + j];
              if (gij == 0.0) continue;
              const double c1 = gij / (na[i] * nb[j]);
              const double c2 = gij * cos[i * n + j] / (na[i] * na[i]);
              for (std::size_t k = 0; k < d; ++k) ga[i * d + k] += c1 * B[j * d + k] - c2 * A[i * d + k];
            }
          }
        }
        if (b.requires_grad()) {
          Tensor& gb = t.grad_buffer(b);
          for (std::size_t j = 0; j < n; ++j) {
            if (nb[j] == 0.0) continue;
            for (std::size_t i = 0; i < m; ++i) {
              if (na[i] == 0.0) continue;
              const double gij = g[i * n + j];
              if (gij == 0.0) continue;
              const double c1 = gij / (na[i] * nb[j]);
              const double c2 = gij * cos[i * n + j] / (nb[j] * nb[j]);
              for (std::size_t k = 0; k < d; ++k) gb[j * d + k] += c1 * A[i * d + k] - c2 * B[j * d + k];
            }
          }
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  KDRANK_CHECK(!parts.empty(), ShapeError, "concat_rows of nothing");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    require_rank(p, 2, "concat_rows");
    KDRANK_CHECK(p.value().cols() == cols, ShapeError, "concat_rows: column counts differ");
    rows += p.value().rows();
  }
  Tensor out(Shape{rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.ptr(), v.ptr() + v.size(), out.ptr() + offset);
    offset += v.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record("concat_rows", std::move(out), parts, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t count = p.value().size();
      if (p.requires_grad()) {
        Tensor& gp = t.grad_buffer(p);
        for (std::size_t i = 0; i < count; ++i) gp[i] += g[offset + i];
      }
      offset += count;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  KDRANK_CHECK(!parts.empty(), ShapeError, "concat_cols of nothing");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    require_rank(p, 2, "concat_cols");
    KDRANK_CHECK(p.value().rows() == rows, ShapeError, "concat_cols: row counts differ");
    cols += p.value().cols();
  }
  Tensor out(Shape{rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = v.cols();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(v.ptr() + i * c, v.ptr() + (i + 1) * c, out.ptr() + i * cols + offset);
    }
    offset += c;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record("concat_cols", std::move(out), parts,
                  [inputs, rows, cols](Tape& t, const Tensor& g) {
                    std::size_t offset = 0;
                    for (const Var& p : inputs) {
                      const std::size_t c = p.value().cols();
                      if (p.requires_grad()) {
                        Tensor& gp = t.grad_buffer(p);
                        for (std::size_t i = 0; i < rows; ++i) {
                          for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * cols + offset + j];
                        }
                      }
                      offset += c;
                    }
                  });
}

Var stack(std::span<const Var> scalars) {
  KDRANK_CHECK(!scalars.empty(), ShapeError, "stack of nothing");
  Tape& t = tape_of(scalars[0]);
  Tensor out(Shape{scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    tape_of(scalars[0], scalars[i]);
    KDRANK_CHECK(scalars[i].value().size() == 1, ShapeError, "stack: inputs must hold one element");
    out[i] = scalars[i].value()[0];
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return t.record("stack", std::move(out), scalars, [inputs](Tape& t, const Tensor& g) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (inputs[i].requires_grad()) t.grad_buffer(inputs[i])[0] += g[i];
    }
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "slice_rows");
  const Tensor& A = a.value();
  KDRANK_CHECK(begin + count <= A.rows(), ShapeError, "slice_rows: range out of bounds");
  const std::size_t cols = A.cols();
  Tensor out(Shape{count, cols});
  std::copy(A.ptr() + begin * cols, A.ptr() + (begin + count) * cols, out.ptr());
  return t.record("slice_rows", std::move(out), {a}, [a, begin, cols](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "slice_cols");
  const Tensor& A = a.value();
  KDRANK_CHECK(begin + count <= A.cols(), ShapeError, "slice_cols: range out of bounds");
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out(Shape{rows, count});
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(A.ptr() + i * cols + begin, A.ptr() + i * cols + begin + count, out.ptr() + i * count);
  }
  return t.record("slice_cols", std::move(out), {a},
                  [a, begin, count, rows, cols](Tape& t, const Tensor& g) {
                    Tensor& ga = t.grad_buffer(a);
                    for (std::size_t i = 0; i < rows; ++i) {
                      for (std::size_t j = 0; j < count; ++j) ga[i * cols + begin + j] += g[i * count + j];
                    }
                  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> indices) {
  Tape& t = tape_of(table);
  require_rank(table, 2, "gather_rows");
  const Tensor& T = table.value();
  const std::size_t cols = T.cols();
  Tensor out(Shape{indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    KDRANK_CHECK(indices[i] < T.rows(), ShapeError,
                 "gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                     std::to_string(T.rows()) + " rows");
    std::copy(T.ptr() + indices[i] * cols, T.ptr() + (indices[i] + 1) * cols, out.ptr() + i * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return t.record("gather_rows", std::move(out), {table},
                  [table, cols, idx = std::move(idx)](Tape& t, const Tensor& g) {
                    Tensor& gt = t.grad_buffer(table);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      double* dst = gt.ptr() + idx[i] * cols;
                      const double* src = g.ptr() + i * cols;
                      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                    }
                  });
}

Var reshape(const Var& a, Shape shape) {
  Tape& t = tape_of(a);
  return t.record("reshape", a.value().reshaped(std::move(shape)), {a},
                  [a](Tape& t, const Tensor& g) {
                    Tensor& ga = t.grad_buffer(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  });
}

}  // namespace kdrank::ops
