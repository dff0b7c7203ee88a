#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/autodiff/tape.hpp"

namespace kdrank {

/// Scalar-valued function of one tensor input, expressed on a tape.
using TensorFunction = std::function<Var(Tape&, const Var&)>;

/// Compares the tape gradient of `f` at `x` with central differences
/// (f(x+h) - f(x-h)) / 2h. Returns the maximum over coordinates of
/// |analytic - numeric| / max(1, |numeric|). Throws NonFiniteError when f(x)
/// is not finite and Error when h <= 0.
double finite_diff_check(const TensorFunction& f, const Tensor& x, double h = 1e-5);

/// Scalar-valued function of a parameter set (the set is bound on the tape).
using ParameterFunction = std::function<Var(Tape&)>;

/// Same criterion for selected coordinates of one parameter. The parameter is
/// perturbed in place and restored before returning.
double finite_diff_check(const ParameterFunction& f, ParameterSet& params, std::size_t param_index,
                         std::span<const std::size_t> coordinates, double h = 1e-5);

}  // namespace kdrank
