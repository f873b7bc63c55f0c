// SPDX-License-Identifier: Apache-2.0
#include "afcn/parameter.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "afcn/errors.hpp"

namespace afcn {

std::size_t total_size(const ParameterRefs& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

double finite_diff_check(const ParameterRefs& params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, double h, std::size_t n_probe,
                         std::uint64_t seed) {
  const std::size_t total = total_size(params);
  if (total == 0) return 0.0;
  for (auto* p : params) p->zero_grad();
  compute_grads();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  double worst = 0.0;
  for (std::size_t probe = 0; probe < n_probe; ++probe) {
    std::size_t flat = pick(rng);
    std::size_t which = 0;
    while (flat >= params[which]->value.size()) flat -= params[which++]->value.size();
    Parameter& p = *params[which];

    const double saved = p.value[flat];
    p.value[flat] = saved + h;
    const double up = loss();
    p.value[flat] = saved - h;
    const double down = loss();
    p.value[flat] = saved;

    const double cd = (up - down) / (2.0 * h);
    const double analytic = p.grad[flat];
    const double denom = std::max({std::abs(analytic), std::abs(cd), 1e-8});
    worst = std::max(worst, std::abs(analytic - cd) / denom);
  }
  return worst;
}

}  // namespace afcn
