#include <algorithm>
#include <string>

#include "eapcr/error.hpp"
#include "eapcr/tensor.hpp"

namespace eapcr::autodiff {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + " expects a rank-" + std::to_string(rank) + " tensor, got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return g.emit("matmul", {a, b}, Shape{m, n}, std::move(out),
                [a, b, m, k, n](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  const auto A = a.data();
                  const auto B = b.data();
                  if (!gi[0].empty()) {
                    // grad_a = grad_out . b^T
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * B[p * n + j];
                        gi[0][i * k + p] = acc;
                      }
                  }
                  if (!gi[1].empty()) {
                    // grad_b = a^T . grad_out
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gi[1][p * n + j] += aip * go[i * n + j];
                      }
                  }
                });
}

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require_rank(input, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = kernels.dim(0);
  if (kernels.dim(2) != 3 || kernels.dim(3) != 3) {
    throw DimensionError("conv2d: kernels must be 3x3, got " + shape_str(kernels.shape()));
  }
  if (kernels.dim(1) != cin) {
    throw DimensionError("conv2d: channel mismatch, input " + shape_str(input.shape()) + " vs kernels " +
                         shape_str(kernels.shape()));
  }
  if (bias.dim(0) != cout) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " vs " + std::to_string(cout) + " channels");
  }

  const auto X = input.data();
  const auto K = kernels.data();
  const auto Bv = bias.data();
  std::vector<double> out(cout * h * w);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = Bv[o];
        for (std::size_t c = 0; c < cin; ++c) {
          const double* kc = K.data() + ((o * cin + c) * 9);
          const double* xc = X.data() + c * h * w;
          for (int dy = -1; dy <= 1; ++dy) {
            const long yy = static_cast<long>(y) + dy;
            if (yy < 0 || yy >= static_cast<long>(h)) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              const long xx = static_cast<long>(x) + dx;
              if (xx < 0 || xx >= static_cast<long>(w)) continue;
              acc += kc[(dy + 1) * 3 + (dx + 1)] * xc[yy * w + xx];
            }
          }
        }
        out[(o * h + y) * w + x] = acc;
      }
    }
  }

  return g.emit(
      "conv2d", {input, kernels, bias}, Shape{cout, h, w}, std::move(out),
      [input, kernels, cin, cout, h, w](std::span<const double> go, std::vector<std::vector<double>>& gi) {
        const auto X = input.data();
        const auto K = kernels.data();
        auto& gx = gi[0];
        auto& gk = gi[1];
        auto& gb = gi[2];
        for (std::size_t o = 0; o < cout; ++o) {
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const double gout = go[(o * h + y) * w + x];
              if (!gb.empty()) gb[o] += gout;
              if (gout == 0.0) continue;
              for (std::size_t c = 0; c < cin; ++c) {
                for (int dy = -1; dy <= 1; ++dy) {
                  const long yy = static_cast<long>(y) + dy;
                  if (yy < 0 || yy >= static_cast<long>(h)) continue;
                  for (int dx = -1; dx <= 1; ++dx) {
                    const long xx = static_cast<long>(x) + dx;
                    if (xx < 0 || xx >= static_cast<long>(w)) continue;
                    const std::size_t kidx = (o * cin + c) * 9 + (dy + 1) * 3 + (dx + 1);
                    const std::size_t xidx = (c * h + yy) * w + xx;
                    if (!gk.empty()) gk[kidx] += gout * X[xidx];
                    if (!gx.empty()) gx[xidx] += gout * K[kidx];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor maxpool2(Graph& g, const Tensor& input) {
  require_rank(input, 3, "maxpool2");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  const auto X = input.data();
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
        for (std::size_t y = 2 * oy; y < std::min(h, 2 * oy + 2); ++y) {
          for (std::size_t x = 2 * ox; x < std::min(w, 2 * ox + 2); ++x) {
            const std::size_t idx = (ch * h + y) * w + x;
            if (X[idx] > X[best]) best = idx;  // strict: ties keep the first index
          }
        }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        out[o] = X[best];
        argmax[o] = best;
      }
    }
  }
  return g.emit("maxpool2", {input}, Shape{c, oh, ow}, std::move(out),
                [argmax = std::move(argmax)](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  for (std::size_t o = 0; o < argmax.size(); ++o) gi[0][argmax[o]] += go[o];
                });
}

Tensor relu(Graph& g, const Tensor& x) {
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
  return g.emit("relu", {x}, x.shape(), std::move(out),
                [x](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  const auto X = x.data();
                  for (std::size_t i = 0; i < X.size(); ++i) gi[0][i] = X[i] > 0.0 ? go[i] : 0.0;
                });
}

Tensor gather_rows(Graph& g, const Tensor& table, std::span<const std::size_t> indices) {
  require_rank(table, 2, "gather_rows");
  const std::size_t v = table.dim(0), d = table.dim(1);
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const auto T = table.data();
  std::vector<double> out(indices.size() * d);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= v) {
      throw LookupError("gather_rows: index " + std::to_string(indices[r]) + " out of range for table with " +
                        std::to_string(v) + " rows");
    }
    std::copy_n(T.data() + indices[r] * d, d, out.data() + r * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return g.emit("gather_rows", {table}, Shape{indices.size(), d}, std::move(out),
                [idx = std::move(idx), d](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  for (std::size_t r = 0; r < idx.size(); ++r)
                    for (std::size_t j = 0; j < d; ++j) gi[0][idx[r] * d + j] += go[r * d + j];
                });
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return g.emit("add", {a, b}, a.shape(), std::move(out),
                [](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  for (auto& buf : gi)
                    if (!buf.empty()) std::copy(go.begin(), go.end(), buf.begin());
                });
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return g.emit("sub", {a, b}, a.shape(), std::move(out),
                [](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  if (!gi[0].empty()) std::copy(go.begin(), go.end(), gi[0].begin());
                  if (!gi[1].empty())
                    for (std::size_t i = 0; i < go.size(); ++i) gi[1][i] = -go[i];
                });
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto A = a.data();
  const auto B = b.data();
  std::vector<double> out(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return g.emit("mul", {a, b}, a.shape(), std::move(out),
                [a, b](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  const auto A = a.data();
                  const auto B = b.data();
                  if (!gi[0].empty())
                    for (std::size_t i = 0; i < go.size(); ++i) gi[0][i] = go[i] * B[i];
                  if (!gi[1].empty())
                    for (std::size_t i = 0; i < go.size(); ++i) gi[1][i] = go[i] * A[i];
                });
}

Tensor scale(Graph& g, const Tensor& x, double factor) {
  const auto X = x.data();
  std::vector<double> out(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = factor * X[i];
  return g.emit("scale", {x}, x.shape(), std::move(out),
                [factor](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  for (std::size_t i = 0; i < go.size(); ++i) gi[0][i] = factor * go[i];
                });
}

Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool compatible = s.size() == first.size();
    for (std::size_t i = 0; compatible && i < s.size(); ++i) compatible = (i == axis) || s[i] == first[i];
    if (!compatible) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    out_shape[axis] += s[axis];
  }

  // View every tensor as [outer, axis_len * inner] blocks.
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) widths.push_back(p.dim(axis) * inner);
  const std::size_t total_width = out_shape[axis] * inner;

  std::vector<double> out(outer * total_width);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto P = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(P.data() + o * widths[k], widths[k], out.data() + o * total_width + offset);
    offset += widths[k];
  }

  return g.emit("concat", parts, std::move(out_shape), std::move(out),
                [widths, outer, total_width](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    if (!gi[k].empty()) {
                      for (std::size_t o = 0; o < outer; ++o)
                        std::copy_n(go.data() + o * total_width + offset, widths[k], gi[k].data() + o * widths[k]);
                    }
                    offset += widths[k];
                  }
                });
}

Tensor transpose(Graph& g, const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  const auto X = x.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = X[i * c + j];
  return g.emit("transpose", {x}, Shape{c, r}, std::move(out),
                [r, c](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gi[0][i * c + j] = go[j * r + i];
                });
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  const auto X = x.data();
  return g.emit("reshape", {x}, std::move(shape), std::vector<double>(X.begin(), X.end()),
                [](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  std::copy(go.begin(), go.end(), gi[0].begin());
                });
}

Tensor flatten(Graph& g, const Tensor& x) { return reshape(g, x, Shape{x.numel()}); }

Tensor sum(Graph& g, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return g.emit("sum", {x}, Shape{}, std::vector<double>{acc},
                [](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  std::fill(gi[0].begin(), gi[0].end(), go[0]);
                });
}

Tensor mean(Graph& g, const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return g.emit("mean", {x}, Shape{}, std::vector<double>{acc / n},
                [n](std::span<const double> go, std::vector<std::vector<double>>& gi) {
                  std::fill(gi[0].begin(), gi[0].end(), go[0] / n);
                });
}

}  // namespace eapcr::autodiff
