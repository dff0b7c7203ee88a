#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kdrank/autodiff/tensor.hpp"

namespace kdrank {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of trainable tensors. Indices are stable once added.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  /// Throws if no parameter carries this name.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t total_elements() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

/// Gradient buffers aligned with a ParameterSet. Untouched entries stay empty.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::size_t count) : grads_(count) {}

  std::size_t size() const { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }

  /// Adds `other` element-wise. Order of calls fixes the summation order.
  void add(const Gradients& other);
  void scale(double factor);

 private:
  std::vector<Tensor> grads_;
};

}  // namespace kdrank
