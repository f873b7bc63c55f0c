// SPDX-License-Identifier: Apache-2.0
#include "afcn/tape.hpp"

#include <string>

#include "afcn/errors.hpp"

namespace afcn {

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("access through an empty Var handle");
  return tape_->value(id_);
}

Tensor Var::grad() const {
  if (!tape_) throw UsageError("access through an empty Var handle");
  return tape_->grad(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

void check_finite(const Tensor& t, const char* op) {
#ifdef AFCN_FINITE_CHECKS
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
#else
  (void)t;
  (void)op;
#endif
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  check_finite(value, "tape op");
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const auto& v : inputs) {
    if (v.tape() != this) throw UsageError("op input recorded on a different tape");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor Tape::grad(std::size_t id) const {
  const auto& n = nodes_[id];
  if (n.grad.size() == n.value.size() && n.grad.shape() == n.value.shape()) return n.grad;
  return Tensor(n.value.shape());
}

std::size_t Tape::backward(Var loss) {
  if (loss.tape() != this) throw UsageError("backward: loss was not recorded on this tape");
  if (nodes_[loss.id()].value.size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_str(nodes_[loss.id()].value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id()].grad = Tensor(nodes_[loss.id()].value.shape(), 1.0);

  std::size_t visited = 0;
  std::vector<const Tensor*> in;
  std::vector<Tensor*> in_grad;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.size() == 0) continue;
    in.clear();
    in_grad.clear();
    for (std::size_t input : n.inputs) {
      Node& src = nodes_[input];
      in.push_back(&src.value);
      if (src.requires_grad) {
        if (src.grad.size() == 0 && src.value.size() != 0) src.grad = Tensor(src.value.shape());
        in_grad.push_back(&src.grad);
      } else {
        in_grad.push_back(nullptr);
      }
    }
    n.backward(BackwardContext{n.value, n.grad, in, in_grad});
    ++visited;
  }
  return visited;
}

}  // namespace afcn
