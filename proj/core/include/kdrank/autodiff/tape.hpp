#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "kdrank/autodiff/parameters.hpp"
#include "kdrank/autodiff/tensor.hpp"

namespace kdrank {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Receives the gradient of the recorded output and routes it to the inputs.
using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
/// recording order is already a topological order and backward simply walks
/// it in reverse.
///
/// A tape is single-threaded. Parameters are borrowed by pointer and must not
/// be mutated while a tape that references them is alive.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }

  Var constant(Tensor value);
  /// Non-owning constant; `value` must outlive the tape.
  Var borrow(const Tensor& value);
  /// Owned leaf that requires grad (when recording).
  Var leaf(Tensor value);
  /// Borrowed view of a parameter. Repeated calls return the same node.
  Var param(const ParameterSet& params, std::size_t index);

  /// Appends the output of a primitive. Throws NonFiniteError if `value`
  /// holds NaN or infinity. `backward` is dropped when no input needs grad.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. One call per tape.
  void backward(const Var& loss);

  /// Zero-initialized on first access. Primitives add into it during backward.
  Tensor& grad_buffer(const Var& v);
  /// Gradient after backward; zeros if `v` received none.
  Tensor grad(const Var& v) const;

  /// Adds the gradients of every bound parameter into `out`.
  void accumulate_param_grads(Gradients& out) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::int64_t param_index = -1;
    BackwardFn backward;

    const Tensor& value() const { return borrowed ? *borrowed : owned; }
  };

  Var push(Node node);
  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  Mode mode_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;
  const ParameterSet* params_ = nullptr;
  std::vector<std::int64_t> param_nodes_;
};

}  // namespace kdrank
