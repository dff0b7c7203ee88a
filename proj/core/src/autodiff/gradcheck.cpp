#include "kdrank/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kdrank/error.hpp"

namespace kdrank {
namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

double evaluate(const TensorFunction& f, const Tensor& x) {
  Tape tape(Tape::Mode::kInference);
  const Var out = f(tape, tape.constant(x));
  const double v = out.value().item();
  KDRANK_CHECK(std::isfinite(v), NonFiniteError, "finite_diff_check: non-finite function value");
  return v;
}

double evaluate(const ParameterFunction& f) {
  Tape tape(Tape::Mode::kInference);
  const double v = f(tape).value().item();
  KDRANK_CHECK(std::isfinite(v), NonFiniteError, "finite_diff_check: non-finite function value");
  return v;
}

}  // namespace

double finite_diff_check(const TensorFunction& f, const Tensor& x, double h) {
  KDRANK_CHECK(h > 0.0, Error, "finite_diff_check: step must be positive");
  Tape tape;
  const Var input = tape.leaf(x);
  const Var out = f(tape, input);
  KDRANK_CHECK(std::isfinite(out.value().item()), NonFiniteError,
               "finite_diff_check: non-finite function value");
  tape.backward(out);
  const Tensor analytic = tape.grad(input);

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = evaluate(f, probe);
    probe[i] = x[i] - h;
    const double down = evaluate(f, probe);
    probe[i] = x[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double finite_diff_check(const ParameterFunction& f, ParameterSet& params, std::size_t param_index,
                         std::span<const std::size_t> coordinates, double h) {
  KDRANK_CHECK(h > 0.0, Error, "finite_diff_check: step must be positive");
  KDRANK_CHECK(param_index < params.size(), Error, "finite_diff_check: parameter index out of range");
  Gradients grads(params.size());
  {
    Tape tape;
    const Var out = f(tape);
    KDRANK_CHECK(std::isfinite(out.value().item()), NonFiniteError,
                 "finite_diff_check: non-finite function value");
    tape.backward(out);
    tape.accumulate_param_grads(grads);
  }
  Tensor& value = params[param_index].value;
  const Tensor& analytic = grads[param_index];

  double worst = 0.0;
  for (std::size_t c : coordinates) {
    KDRANK_CHECK(c < value.size(), Error, "finite_diff_check: coordinate out of range");
    const double original = value[c];
    value[c] = original + h;
    const double up = evaluate(f);
    value[c] = original - h;
    const double down = evaluate(f);
    value[c] = original;
    const double a = analytic.empty() ? 0.0 : analytic[c];
    worst = std::max(worst, relative_error(a, (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace kdrank
