// SPDX-License-Identifier: Apache-2.0
#include "afcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "afcn/errors.hpp"

namespace afcn::ops {
namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// c += a · b for raw row-major buffers.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c += a · bᵀ, a: m×k, b: n×k.
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// c += aᵀ · b, a: k×m, b: k×n.
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy(Tensor* dst, const Tensor& src, double alpha = 1.0) {
  if (!dst) return;
  for (std::size_t i = 0; i < src.size(); ++i) (*dst)[i] += alpha * src[i];
}

Tape& tape_of(Var v) {
  if (!v.tape()) throw UsageError("op applied to an empty Var");
  return *v.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(Shape{m, n});
  gemm_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return tape_of(a).record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
    const double* g = ctx.out_grad.data().data();
    if (ctx.in_grad[0]) gemm_nt_acc(g, ctx.in[1]->data().data(), ctx.in_grad[0]->data().data(), m, n, k);
    if (ctx.in_grad[1]) gemm_tn_acc(ctx.in[0]->data().data(), g, ctx.in_grad[1]->data().data(), k, m, n);
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_nt");
  require_matrix(bv, "matmul_nt");
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()) + "^T");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out(Shape{m, n});
  gemm_nt_acc(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return tape_of(a).record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
    const double* g = ctx.out_grad.data().data();
    // dA = G·B, dB = Gᵀ·A
    if (ctx.in_grad[0]) gemm_acc(g, ctx.in[1]->data().data(), ctx.in_grad[0]->data().data(), m, n, k);
    if (ctx.in_grad[1]) gemm_tn_acc(g, ctx.in[0]->data().data(), ctx.in_grad[1]->data().data(), n, m, k);
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  return tape_of(a).record(std::move(out), {a}, [m, n](const BackwardContext& ctx) {
    Tensor& ga = *ctx.in_grad[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += ctx.out_grad(j, i);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    axpy(ctx.in_grad[0], ctx.out_grad);
    axpy(ctx.in_grad[1], ctx.out_grad);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    axpy(ctx.in_grad[0], ctx.out_grad);
    axpy(ctx.in_grad[1], ctx.out_grad, -1.0);
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return tape_of(a).record(std::move(out), {a}, [factor](const BackwardContext& ctx) {
    axpy(ctx.in_grad[0], ctx.out_grad, factor);
  });
}

Var scale_by(Var a, Var s) {
  if (s.value().size() != 1) throw DimensionError("scale_by: factor must be scalar, got " + shape_str(s.shape()));
  const double f = s.value().item();
  Tensor out = a.value();
  for (auto& v : out.data()) v *= f;
  return tape_of(a).record(std::move(out), {a, s}, [](const BackwardContext& ctx) {
    const double f = ctx.in[1]->item();
    axpy(ctx.in_grad[0], ctx.out_grad, f);
    if (ctx.in_grad[1]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < ctx.out_grad.size(); ++i) acc += ctx.out_grad[i] * (*ctx.in[0])[i];
      (*ctx.in_grad[1])[0] += acc;
    }
  });
}

Var hadamard(Var a, const Tensor& mask) {
  require_same_shape(a.value(), mask, "hadamard");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return tape_of(a).record(std::move(out), {a}, [mask](const BackwardContext& ctx) {
    Tensor& ga = *ctx.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.out_grad[i] * mask[i];
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || (av.rank() != 1 && av.rank() != 2) || av.cols() != bv.size()) {
    throw DimensionError("add_bias: " + shape_str(av.shape()) + " + bias " + shape_str(bv.shape()));
  }
  const std::size_t m = av.rows(), n = av.cols();
  Tensor out = av;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  return tape_of(a).record(std::move(out), {a, bias}, [m, n](const BackwardContext& ctx) {
    axpy(ctx.in_grad[0], ctx.out_grad);
    if (ctx.in_grad[1]) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*ctx.in_grad[1])[j] += ctx.out_grad[i * n + j];
    }
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  Tensor out = a.value();
  for (auto& v : out.data())
    if (v < 0.0) v *= slope;
  return tape_of(a).record(std::move(out), {a}, [slope](const BackwardContext& ctx) {
    Tensor& ga = *ctx.in_grad[0];
    const Tensor& x = *ctx.in[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.out_grad[i] * (x[i] > 0.0 ? 1.0 : slope);
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return tape_of(a).record(Tensor::scalar(s), {a}, [](const BackwardContext& ctx) {
    const double g = ctx.out_grad[0];
    for (auto& v : ctx.in_grad[0]->data()) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mean_abs(Var a) {
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data()) s += std::abs(v);
  return tape_of(a).record(Tensor::scalar(s / n), {a}, [n](const BackwardContext& ctx) {
    const double g = ctx.out_grad[0] / n;
    const Tensor& x = *ctx.in[0];
    Tensor& ga = *ctx.in_grad[0];
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (x[i] > 0.0)
        ga[i] += g;
      else if (x[i] < 0.0)
        ga[i] -= g;
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
    axpy(ctx.in_grad[0], ctx.out_grad);
  });
}

Var conv1d(Var signal, Var kernel, std::size_t dilation) {
  const Tensor& x = signal.value();
  const Tensor& k = kernel.value();
  if (k.rank() != 1) throw DimensionError("conv1d: kernel must be rank-1, got " + shape_str(k.shape()));
  if (k.size() % 2 == 0) {
    throw ConfigError("conv1d: kernel width " + std::to_string(k.size()) +
                      " is even; same-length padding needs an odd width");
  }
  if (dilation == 0) throw ConfigError("conv1d: dilation must be positive");
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("conv1d: signal must be [T] or [N x T], got " + shape_str(x.shape()));
  }
  const std::size_t rows = x.rows(), len = x.cols(), w = k.size();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (w - 1) / 2);
  const auto T = static_cast<std::ptrdiff_t>(len);
  const auto dil = static_cast<std::ptrdiff_t>(dilation);

  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * len;
    double* yr = out.data().data() + r * len;
    for (std::ptrdiff_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) * dil - pad;
        if (src >= 0 && src < T) acc += k[j] * xr[src];
      }
      yr[t] = acc;
    }
  }
  return tape_of(signal).record(std::move(out), {signal, kernel},
                                [rows, len, w, pad, T, dil](const BackwardContext& ctx) {
    const Tensor& xv = *ctx.in[0];
    const Tensor& kv = *ctx.in[1];
    Tensor* gx = ctx.in_grad[0];
    Tensor* gk = ctx.in_grad[1];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = xv.data().data() + r * len;
      const double* gr = ctx.out_grad.data().data() + r * len;
      for (std::ptrdiff_t t = 0; t < T; ++t) {
        const double g = gr[t];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < w; ++j) {
          const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) * dil - pad;
          if (src < 0 || src >= T) continue;
          if (gx) (*gx)[r * len + static_cast<std::size_t>(src)] += kv[j] * g;
          if (gk) (*gk)[j] += xr[src] * g;
        }
      }
    }
  });
}

Var pearson(Var x, double eps) {
  const Tensor& xv = x.value();
  require_matrix(xv, "pearson");
  const std::size_t n = xv.rows(), len = xv.cols();
  if (len < 2) throw DimensionError("pearson: need at least 2 time points, got " + shape_str(xv.shape()));

  // Unit-norm centered rows; degenerate rows stay zero.
  auto units = std::make_shared<Tensor>(Shape{n, len});
  auto norms = std::make_shared<std::vector<double>>(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t t = 0; t < len; ++t) m += xv(i, t);
    m /= static_cast<double>(len);
    double ss = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double c = xv(i, t) - m;
      (*units)(i, t) = c;
      ss += c * c;
    }
    if (ss / static_cast<double>(len) <= eps) {
      for (std::size_t t = 0; t < len; ++t) (*units)(i, t) = 0.0;
      continue;
    }
    const double nrm = std::sqrt(ss);
    (*norms)[i] = nrm;
    for (std::size_t t = 0; t < len; ++t) (*units)(i, t) /= nrm;
  }
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < len; ++t) s += (*units)(i, t) * (*units)(j, t);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return tape_of(x).record(std::move(out), {x}, [units, norms, n, len](const BackwardContext& ctx) {
    const Tensor& g = ctx.out_grad;
    Tensor& gx = *ctx.in_grad[0];
    std::vector<double> du(len);
    for (std::size_t i = 0; i < n; ++i) {
      if ((*norms)[i] == 0.0) continue;
      std::fill(du.begin(), du.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double gs = g(i, j) + g(j, i);
        if (gs == 0.0) continue;
        for (std::size_t t = 0; t < len; ++t) du[t] += gs * (*units)(j, t);
      }
      double proj = 0.0;
      for (std::size_t t = 0; t < len; ++t) proj += du[t] * (*units)(i, t);
      double mean_dc = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        du[t] = (du[t] - proj * (*units)(i, t)) / (*norms)[i];
        mean_dc += du[t];
      }
      mean_dc /= static_cast<double>(len);
      for (std::size_t t = 0; t < len; ++t) gx(i, t) += du[t] - mean_dc;
    }
  });
}

Var normalize_adjacency(Var a, double eps) {
  const Tensor& av = a.value();
  require_matrix(av, "normalize_adjacency");
  if (av.rows() != av.cols()) throw DimensionError("normalize_adjacency: non-square " + shape_str(av.shape()));
  const std::size_t m = av.rows();
  auto inv_sqrt = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double d = eps;
    for (std::size_t j = 0; j < m; ++j) d += std::abs(av(i, j));
    (*inv_sqrt)[i] = 1.0 / std::sqrt(d);
  }
  Tensor out(Shape{m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = (*inv_sqrt)[i] * av(i, j) * (*inv_sqrt)[j];

  return tape_of(a).record(std::move(out), {a}, [inv_sqrt, m](const BackwardContext& ctx) {
    const Tensor& A = *ctx.in[0];
    const Tensor& g = ctx.out_grad;
    const auto& r = *inv_sqrt;
    // ∂L/∂d_i = (Σ_j g_ij a_ij r_j + Σ_j g_ji a_ji r_j) · (−r_i³/2)
    std::vector<double> d_deg(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double t = g(i, j) * A(i, j);
        d_deg[i] += t * r[j];
        d_deg[j] += t * r[i];
      }
    }
    for (std::size_t i = 0; i < m; ++i) d_deg[i] *= -0.5 * r[i] * r[i] * r[i];
    Tensor& ga = *ctx.in_grad[0];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double aij = A(i, j);
        const double sgn = aij > 0.0 ? 1.0 : (aij < 0.0 ? -1.0 : 0.0);
        ga(i, j) += g(i, j) * r[i] * r[j] + d_deg[i] * sgn;
      }
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Tensor& first = parts[0].value();
  require_matrix(first, "concat_rows");
  const std::size_t cols = first.cols();
  std::vector<double> data;
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::size_t total_rows = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    require_matrix(v, "concat_rows");
    if (v.cols() != cols) {
      throw DimensionError("concat_rows: " + shape_str(v.shape()) + " vs " + shape_str(first.shape()));
    }
    data.insert(data.end(), v.storage().begin(), v.storage().end());
    total_rows += v.rows();
  }
  return tape_of(parts[0]).record(Tensor(Shape{total_rows, cols}, std::move(data)), std::move(inputs),
                                  [](const BackwardContext& ctx) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ctx.in.size(); ++p) {
      const std::size_t n = ctx.in[p]->size();
      if (ctx.in_grad[p]) {
        for (std::size_t i = 0; i < n; ++i) (*ctx.in_grad[p])[i] += ctx.out_grad[offset + i];
      }
      offset += n;
    }
  });
}

Var assemble_blocks(std::size_t blocks, std::size_t n, std::span<const BlockPlacement> placements) {
  if (placements.empty()) throw DimensionError("assemble_blocks: no blocks placed");
  const std::size_t m = blocks * n;
  Tensor out(Shape{m, m});
  std::vector<Var> inputs;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
  for (const auto& p : placements) {
    const Tensor& b = p.block.value();
    if (b.shape() != Shape{n, n}) {
      throw DimensionError("assemble_blocks: block " + shape_str(b.shape()) + " vs expected " +
                           shape_str(Shape{n, n}));
    }
    if (p.row_block >= blocks || p.col_block >= blocks) throw DimensionError("assemble_blocks: block index out of range");
    const std::size_t r0 = p.row_block * n, c0 = p.col_block * n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out(r0 + i, c0 + j) += b(i, j);
    inputs.push_back(p.block);
    offsets.emplace_back(r0, c0);
  }
  return tape_of(placements[0].block).record(std::move(out), std::move(inputs),
                                             [offsets, n](const BackwardContext& ctx) {
    for (std::size_t p = 0; p < offsets.size(); ++p) {
      Tensor* gb = ctx.in_grad[p];
      if (!gb) continue;
      const auto [r0, c0] = offsets[p];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)(i, j) += ctx.out_grad(r0 + i, c0 + j);
    }
  });
}

Var block_row_mean(Var z, std::size_t blocks) {
  const Tensor& zv = z.value();
  require_matrix(zv, "block_row_mean");
  if (blocks == 0 || zv.rows() % blocks != 0) {
    throw DimensionError("block_row_mean: " + std::to_string(zv.rows()) + " rows not divisible into " +
                         std::to_string(blocks) + " blocks");
  }
  const std::size_t n = zv.rows() / blocks, d = zv.cols();
  Tensor out(Shape{blocks, d});
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) out(b, c) += zv(b * n + i, c);
    for (std::size_t c = 0; c < d; ++c) out(b, c) /= static_cast<double>(n);
  }
  return tape_of(z).record(std::move(out), {z}, [blocks, n, d](const BackwardContext& ctx) {
    Tensor& gz = *ctx.in_grad[0];
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) gz(b * n + i, c) += ctx.out_grad(b, c) * inv;
  });
}

Var cross_entropy(Var logits, std::size_t label, double weight) {
  const Tensor& l = logits.value();
  const std::size_t c = l.size();
  if (label >= c) {
    throw UsageError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(c) +
                     " classes");
  }
  const double mx = *std::max_element(l.storage().begin(), l.storage().end());
  double z = 0.0;
  for (double v : l.data()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return tape_of(logits).record(Tensor::scalar(weight * (lse - l[label])), {logits},
                                [label, weight, lse](const BackwardContext& ctx) {
    const double g = ctx.out_grad[0] * weight;
    Tensor& gl = *ctx.in_grad[0];
    for (std::size_t i = 0; i < gl.size(); ++i) {
      gl[i] += g * (std::exp((*ctx.in[0])[i] - lse) - (i == label ? 1.0 : 0.0));
    }
  });
}

Var cosine_diversity(Var h, double eps) {
  const Tensor& hv = h.value();
  require_matrix(hv, "cosine_diversity");
  const std::size_t m = hv.rows(), d = hv.cols();
  if (m < 2) throw DimensionError("cosine_diversity: need at least 2 rows, got " + shape_str(hv.shape()));
  std::vector<double> norms(m);
  std::vector<bool> floored(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += hv(i, c) * hv(i, c);
    const double nrm = std::sqrt(s);
    floored[i] = nrm <= eps;
    norms[i] = floored[i] ? eps : nrm;
  }
  const double pairs = static_cast<double>(m * (m - 1));
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += hv(i, c) * hv(j, c);
      total += 2.0 * dot / (norms[i] * norms[j]);
    }
  }
  return tape_of(h).record(Tensor::scalar(total / pairs), {h},
                           [norms, floored, m, d, pairs](const BackwardContext& ctx) {
    const Tensor& x = *ctx.in[0];
    Tensor& gx = *ctx.in_grad[0];
    const double g = ctx.out_grad[0] * 2.0 / pairs;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        // ∂cos(h_i,h_j)/∂h_i; the j-side is covered when the roles swap.
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += x(i, c) * x(j, c);
        const double denom = norms[i] * norms[j];
        const double cosv = dot / denom;
        for (std::size_t c = 0; c < d; ++c) {
          double dc = x(j, c) / denom;
          if (!floored[i]) dc -= cosv * x(i, c) / (norms[i] * norms[i]);
          gx(i, c) += g * dc;
        }
      }
    }
  });
}

}  // namespace afcn::ops
