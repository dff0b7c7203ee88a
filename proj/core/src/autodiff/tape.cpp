#include "kdrank/autodiff/tape.hpp"

#include <string>

#include "kdrank/error.hpp"

namespace kdrank {

const Tensor& Var::value() const { return tape_->node(*this).value(); }

bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tape::Node& Tape::node(const Var& v) const {
  KDRANK_CHECK(v.tape_ == this && v.id_ < nodes_.size(), Error, "variable does not belong to this tape");
  return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) {
  KDRANK_CHECK(v.tape_ == this && v.id_ < nodes_.size(), Error, "variable does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  KDRANK_CHECK(value.all_finite(), NonFiniteError, "non-finite constant");
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::borrow(const Tensor& value) {
  Node n;
  n.borrowed = &value;
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  KDRANK_CHECK(value.all_finite(), NonFiniteError, "non-finite leaf");
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording();
  return push(std::move(n));
}

Var Tape::param(const ParameterSet& params, std::size_t index) {
  if (params_ == nullptr) {
    params_ = &params;
  }
  KDRANK_CHECK(params_ == &params, Error, "a tape can bind parameters from one set only");
  KDRANK_CHECK(index < params.size(), Error, "parameter index out of range");
  if (param_nodes_.size() < params.size()) param_nodes_.resize(params.size(), -1);
  if (param_nodes_[index] >= 0) return Var(this, static_cast<std::uint32_t>(param_nodes_[index]));
  Node n;
  n.borrowed = &params[index].value;
  n.requires_grad = recording();
  n.param_index = static_cast<std::int64_t>(index);
  Var v = push(std::move(n));
  param_nodes_[index] = v.id_;
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string("non-finite value produced by ") + op);
  }
  Node n;
  n.owned = std::move(value);
  if (recording()) {
    for (const Var& in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return push(std::move(n));
}

void Tape::backward(const Var& loss) {
  KDRANK_CHECK(recording(), Error, "backward on an inference tape");
  KDRANK_CHECK(!backward_done_, Error, "backward already ran on this tape");
  const Node& root = node(loss);
  KDRANK_CHECK(root.value().size() == 1, ShapeError,
               "backward requires a scalar loss, got shape " + shape_to_string(root.value().shape()));
  backward_done_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) {
      n.backward(*this, n.grad);
    }
  }
}

Tensor& Tape::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(n.value().shape(), 0.0);
  return n.grad;
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor(n.value().shape(), 0.0);
  return n.grad;
}

void Tape::accumulate_param_grads(Gradients& out) const {
  if (params_ == nullptr) return;
  KDRANK_CHECK(out.size() == params_->size(), ShapeError, "gradient set does not match parameters");
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    if (param_nodes_[i] < 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(param_nodes_[i])];
    if (n.grad.empty()) continue;
    Tensor& dst = out[i];
    if (dst.empty()) {
      dst = n.grad;
      continue;
    }
    double* d = dst.ptr();
    const double* s = n.grad.ptr();
    for (std::size_t k = 0; k < dst.size(); ++k) d[k] += s[k];
  }
}

}  // namespace kdrank
