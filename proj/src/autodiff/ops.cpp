#include "maeguard/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "maeguard/kernels/kernels.hpp"

namespace maeguard::ad {
namespace {

using kernels::Trans;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                   to_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": " + why + " for shape " + to_string(a));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Forward: dst (permuted layout) = src (shape `in_shape`).
// Inverse: src is in the permuted layout and is added into dst (in_shape).
void permute_copy(const Shape& in_shape, const std::vector<std::size_t>& perm,
                  std::span<const double> src, std::span<double> dst, bool inverse) {
  const std::size_t rank = in_shape.size();
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
  const auto in_strides = strides_of(in_shape);

  // Trailing axes that keep their position form a contiguous block.
  std::size_t fixed = rank;
  while (fixed > 0 && perm[fixed - 1] == fixed - 1) --fixed;
  std::size_t block = 1;
  for (std::size_t i = fixed; i < rank; ++i) block *= in_shape[i];

  std::vector<std::size_t> idx(fixed, 0);
  const std::size_t total = numel(in_shape);
  std::size_t out_pos = 0;
  while (out_pos < total) {
    std::size_t in_pos = 0;
    for (std::size_t i = 0; i < fixed; ++i) in_pos += idx[i] * in_strides[perm[i]];
    if (inverse) {
      for (std::size_t e = 0; e < block; ++e) dst[in_pos + e] += src[out_pos + e];
    } else {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(in_pos), block,
                  dst.begin() + static_cast<std::ptrdiff_t>(out_pos));
    }
    out_pos += block;
    for (std::size_t i = fixed; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
}

}  // namespace

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return g.record("add", a.shape(), std::move(out), {a, b},
                    [](std::span<const double> go, std::span<const std::span<double>> gi) {
                      if (!gi[0].empty()) accumulate(gi[0], go);
                      if (!gi[1].empty()) accumulate(gi[1], go);
                    });
  }
  if (b.numel() == 0 || !is_suffix(a.shape(), b.shape())) shape_error("add", a.shape(), b.shape());
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / inner;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t j = 0; j < inner; ++j)
      out[r * inner + j] = a.values()[r * inner + j] + b.values()[j];
  return g.record("add_bias", a.shape(), std::move(out), {a, b},
                  [outer, inner](std::span<const double> go, std::span<const std::span<double>> gi) {
                    if (!gi[0].empty()) accumulate(gi[0], go);
                    if (!gi[1].empty()) {
                      for (std::size_t r = 0; r < outer; ++r)
                        for (std::size_t j = 0; j < inner; ++j) gi[1][j] += go[r * inner + j];
                    }
                  });
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return g.record("sub", a.shape(), std::move(out), {a, b},
                  [](std::span<const double> go, std::span<const std::span<double>> gi) {
                    if (!gi[0].empty()) accumulate(gi[0], go);
                    if (!gi[1].empty())
                      for (std::size_t i = 0; i < go.size(); ++i) gi[1][i] -= go[i];
                  });
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return g.record("mul", a.shape(), std::move(out), {a, b},
                  [a, b](std::span<const double> go, std::span<const std::span<double>> gi) {
                    if (!gi[0].empty())
                      for (std::size_t i = 0; i < go.size(); ++i) gi[0][i] += go[i] * b.values()[i];
                    if (!gi[1].empty())
                      for (std::size_t i = 0; i < go.size(); ++i) gi[1][i] += go[i] * a.values()[i];
                  });
}

Tensor scale(Graph& g, const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return g.record("scale", a.shape(), std::move(out), {a},
                  [factor](std::span<const double> go, std::span<const std::span<double>> gi) {
                    for (std::size_t i = 0; i < go.size(); ++i) gi[0][i] += go[i] * factor;
                  });
}

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.rank() == 3 && b.rank() == 3) {
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    if (b.dim(0) != batch || b.dim(1) != k) shape_error("matmul", a.shape(), b.shape());
    std::vector<double> out(batch * m * n);
    kernels::batched_gemm(Trans::kNo, Trans::kNo, batch, m, n, k, a.values(), b.values(),
                          out, false);
    return g.record("bmm", {batch, m, n}, std::move(out), {a, b},
                    [a, b, batch, m, n, k](std::span<const double> go,
                                           std::span<const std::span<double>> gi) {
                      if (!gi[0].empty())
                        kernels::batched_gemm(Trans::kNo, Trans::kYes, batch, m, k, n, go,
                                              b.values(), gi[0], true);
                      if (!gi[1].empty())
                        kernels::batched_gemm(Trans::kYes, Trans::kNo, batch, k, n, m,
                                              a.values(), go, gi[1], true);
                    });
  }
  if (a.rank() < 2 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t k = b.dim(0), n = b.dim(1);
  const std::size_t m = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(m * n);
  kernels::gemm(Trans::kNo, Trans::kNo, m, n, k, a.values(), b.values(), out, false);
  return g.record("matmul", std::move(out_shape), std::move(out), {a, b},
                  [a, b, m, n, k](std::span<const double> go,
                                  std::span<const std::span<double>> gi) {
                    if (!gi[0].empty())
                      kernels::gemm(Trans::kNo, Trans::kYes, m, k, n, go, b.values(), gi[0], true);
                    if (!gi[1].empty())
                      kernels::gemm(Trans::kYes, Trans::kNo, k, n, m, a.values(), go, gi[1], true);
                  });
}

Tensor transpose(Graph& g, const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t rank = a.rank();
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(rank);
  std::iota(iota.begin(), iota.end(), 0);
  if (perm.size() != rank || sorted != iota) shape_error("transpose", a.shape(), "invalid permutation");
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = a.dim(perm[i]);
  std::vector<double> out(a.numel());
  permute_copy(a.shape(), perm, a.values(), out, false);
  const Shape in_shape = a.shape();
  return g.record("transpose", std::move(out_shape), std::move(out), {a},
                  [in_shape, perm](std::span<const double> go,
                                   std::span<const std::span<double>> gi) {
                    permute_copy(in_shape, perm, go, gi[0], true);
                  });
}

Tensor transpose(Graph& g, const Tensor& a) {
  if (a.rank() < 2) shape_error("transpose", a.shape(), "rank below 2");
  std::vector<std::size_t> perm(a.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[a.rank() - 1], perm[a.rank() - 2]);
  return transpose(g, a, perm);
}

Tensor reshape(Graph& g, const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return g.record("reshape", std::move(shape), std::move(out), {a},
                  [](std::span<const double> go, std::span<const std::span<double>> gi) {
                    accumulate(gi[0], go);
                  });
}

Tensor slice(Graph& g, const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t length) {
  if (axis >= a.rank() || start + length > a.dim(axis)) {
    shape_error("slice", a.shape(),
                "range [" + std::to_string(start) + "," + std::to_string(start + length) +
                    ") on axis " + std::to_string(axis) + " out of bounds");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t span_in = a.dim(axis) * inner;
  const std::size_t span_out = length * inner;
  std::vector<double> out(outer * span_out);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(o * span_in + start * inner),
                span_out, out.begin() + static_cast<std::ptrdiff_t>(o * span_out));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  return g.record("slice", std::move(out_shape), std::move(out), {a},
                  [outer, span_in, span_out, start, inner](
                      std::span<const double> go, std::span<const std::span<double>> gi) {
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t e = 0; e < span_out; ++e)
                        gi[0][o * span_in + start * inner + e] += go[o * span_out + e];
                  });
}

Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() < 1) shape_error("gather_rows", a.shape(), "rank 0");
  const std::size_t n_rows = a.dim(0);
  const std::size_t width = n_rows == 0 ? 0 : a.numel() / n_rows;
  std::vector<double> out(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n_rows) {
      shape_error("gather_rows", a.shape(), "row index " + std::to_string(rows[r]) + " out of range");
    }
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(rows[r] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Shape out_shape = a.shape();
  out_shape[0] = rows.size();
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return g.record("gather_rows", std::move(out_shape), std::move(out), {a},
                  [index = std::move(index), width](std::span<const double> go,
                                                    std::span<const std::span<double>> gi) {
                    for (std::size_t r = 0; r < index.size(); ++r)
                      for (std::size_t e = 0; e < width; ++e)
                        gi[0][index[r] * width + e] += go[r * width + e];
                  });
}

Tensor concat_rows(Graph& g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Shape trailing(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank() ||
        !std::equal(trailing.begin(), trailing.end(), p.shape().begin() + 1)) {
      shape_error("concat_rows", parts[0].shape(), p.shape());
    }
    offsets.push_back(rows * numel(trailing));
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * numel(trailing));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Shape out_shape = parts[0].shape();
  out_shape[0] = rows;
  return g.record("concat_rows", std::move(out_shape), std::move(out), parts,
                  [offsets](std::span<const double> go, std::span<const std::span<double>> gi) {
                    for (std::size_t j = 0; j < gi.size(); ++j)
                      if (!gi[j].empty()) accumulate(gi[j], go.subspan(offsets[j], gi[j].size()));
                  });
}

Tensor softmax(Graph& g, const Tensor& a) {
  if (a.rank() < 1 || a.shape().back() == 0) shape_error("softmax", a.shape(), "empty last axis");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  auto y = std::make_shared<std::vector<double>>(a.numel());
  kernels::softmax_rows(rows, cols, a.values(), *y);
  return g.record("softmax", a.shape(), *y, {a},
                  [y, rows, cols](std::span<const double> go,
                                  std::span<const std::span<double>> gi) {
                    kernels::softmax_rows_backward(rows, cols, *y, go, gi[0]);
                  });
}

Tensor gelu(Graph& g, const Tensor& a) {
  std::vector<double> out(a.numel());
  kernels::gelu(a.values(), out);
  return g.record("gelu", a.shape(), std::move(out), {a},
                  [a](std::span<const double> go, std::span<const std::span<double>> gi) {
                    kernels::gelu_backward(a.values(), go, gi[0]);
                  });
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.rank() < 1 || x.shape().back() == 0) shape_error("layer_norm", x.shape(), "empty last axis");
  const std::size_t cols = x.shape().back();
  if (gamma.shape() != Shape{cols}) shape_error("layer_norm", x.shape(), gamma.shape());
  if (beta.shape() != Shape{cols}) shape_error("layer_norm", x.shape(), beta.shape());
  const std::size_t rows = x.numel() / cols;
  std::vector<double> out(x.numel());
  auto mean = std::make_shared<std::vector<double>>(rows);
  auto rstd = std::make_shared<std::vector<double>>(rows);
  kernels::layer_norm_rows(rows, cols, x.values(), gamma.values(), beta.values(), eps, out,
                           *mean, *rstd);
  return g.record("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                  [x, gamma, mean, rstd, rows, cols](std::span<const double> go,
                                                     std::span<const std::span<double>> gi) {
                    kernels::layer_norm_rows_backward(rows, cols, x.values(), gamma.values(),
                                                      *mean, *rstd, go, gi[0], gi[1], gi[2]);
                  });
}

Tensor where(Graph& g, std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b) {
  require_same("where", a, b);
  if (mask.size() != a.numel()) {
    shape_error("where", a.shape(), "mask of " + std::to_string(mask.size()) + " entries");
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] ? a.values()[i] : b.values()[i];
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return g.record("where", a.shape(), std::move(out), {a, b},
                  [m = std::move(m)](std::span<const double> go,
                                     std::span<const std::span<double>> gi) {
                    for (std::size_t i = 0; i < go.size(); ++i) {
                      auto& dst = m[i] ? gi[0] : gi[1];
                      if (!dst.empty()) dst[i] += go[i];
                    }
                  });
}

Tensor sum(Graph& g, const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return g.record("sum", {}, {s}, {a},
                  [](std::span<const double> go, std::span<const std::span<double>> gi) {
                    for (auto& v : gi[0]) v += go[0];
                  });
}

Tensor mse(Graph& g, const Tensor& a, const Tensor& b) {
  require_same("mse", a, b);
  if (a.numel() == 0) shape_error("mse", a.shape(), "empty operands");
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return g.record("mse", {}, {s * inv_n}, {a, b},
                  [a, b, inv_n](std::span<const double> go, std::span<const std::span<double>> gi) {
                    const double c = 2.0 * inv_n * go[0];
                    for (std::size_t i = 0; i < a.numel(); ++i) {
                      const double d = a.values()[i] - b.values()[i];
                      if (!gi[0].empty()) gi[0][i] += c * d;
                      if (!gi[1].empty()) gi[1][i] -= c * d;
                    }
                  });
}

Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const int> labels,
                     Reduction reduction) {
  if (logits.rank() != 2 || logits.dim(1) == 0) {
    shape_error("cross_entropy", logits.shape(), "expected (batch, classes) with classes > 0");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    shape_error("cross_entropy", logits.shape(), std::to_string(labels.size()) + " labels");
  }
  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  kernels::softmax_rows(batch, classes, logits.values(), *probs);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," +
                              std::to_string(classes) + ")");
    }
    const double* row = logits.values().data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double lse = 0.0;
    for (std::size_t j = 0; j < classes; ++j) lse += std::exp(row[j] - mx);
    total += std::log(lse) + mx - row[y];
  }
  const double factor = reduction == Reduction::kMean ? 1.0 / static_cast<double>(batch) : 1.0;
  std::vector<int> ys(labels.begin(), labels.end());
  return g.record("cross_entropy", {}, {total * factor}, {logits},
                  [probs, ys = std::move(ys), classes, factor](
                      std::span<const double> go, std::span<const std::span<double>> gi) {
                    const double c = go[0] * factor;
                    for (std::size_t r = 0; r < ys.size(); ++r) {
                      for (std::size_t j = 0; j < classes; ++j) {
                        const double target = static_cast<int>(j) == ys[r] ? 1.0 : 0.0;
                        gi[0][r * classes + j] += c * ((*probs)[r * classes + j] - target);
                      }
                    }
                  });
}

}  // namespace maeguard::ad
