// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "afcn/tensor.hpp"

namespace afcn {

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; only valid while
/// its tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient of the last backward() target; zeros if the node was not reached.
  Tensor grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward rule sees: the output value and its incoming gradient,
/// plus the input values and (nullable) input gradient buffers to accumulate into.
struct BackwardContext {
  const Tensor& out;
  const Tensor& out_grad;
  std::span<const Tensor* const> in;
  std::span<Tensor* const> in_grad;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Records operations in execution order and replays them in reverse.
/// Rebuilt for every forward pass; not thread-safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Appends an op node. `backward` is dropped when no input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse accumulation from a scalar. Gradients of all reachable nodes are
  /// summed across fan-out. Returns the number of backward rules executed.
  std::size_t backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor grad(std::size_t id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until reached during backward
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

/// Throws NumericError when finite checks are compiled in and `t` has NaN/Inf.
void check_finite(const Tensor& t, const char* op);

}  // namespace afcn
