#include "kdrank/autodiff/parameters.hpp"

#include "kdrank/error.hpp"

namespace kdrank {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  KDRANK_CHECK(!contains(name), Error, "duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error("unknown parameter: " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Gradients::add(const Gradients& other) {
  KDRANK_CHECK(other.size() == grads_.size(), ShapeError, "gradient set size mismatch");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    const Tensor& src = other.grads_[i];
    if (src.empty()) continue;
    Tensor& dst = grads_[i];
    if (dst.empty()) {
      dst = src;
      continue;
    }
    KDRANK_CHECK(dst.shape() == src.shape(), ShapeError, "gradient shape mismatch");
    double* d = dst.ptr();
    const double* s = src.ptr();
    for (std::size_t k = 0; k < dst.size(); ++k) d[k] += s[k];
  }
}

void Gradients::scale(double factor) {
  for (auto& g : grads_) {
    for (double& v : g.data()) v *= factor;
  }
}

}  // namespace kdrank
