// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "afcn/tensor.hpp"

namespace afcn {

/// A learnable tensor with its paired gradient buffer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor(value.shape()); }
};

using ParameterRefs = std::vector<Parameter*>;

std::size_t total_size(const ParameterRefs& params);

/// Compares `params[*].grad` (filled by `compute_grads`) against central
/// differences of `loss` at `n_probe` coordinates drawn uniformly from all
/// parameters. Returns max |analytic − cd| / max(|analytic|, |cd|, 1e-8).
/// Parameter values are restored afterwards.
double finite_diff_check(const ParameterRefs& params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, double h, std::size_t n_probe,
                         std::uint64_t seed);

}  // namespace afcn
