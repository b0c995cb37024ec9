#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "askroute/diff/tape.hpp"

// Differentiable primitives. Values are stored as T; reductions accumulate in
// double. Shapes are rank 0 (scalar), 1 (vector) or 2 (row-major matrix).

namespace askroute::diff {

namespace detail {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  if (a.tape != b.tape || a.tape == nullptr) throw TapeError("ops: operands live on different tapes");
  return *a.tape;
}

/// Dot product in double with four interleaved partial sums.
template <typename T>
double dot_accumulate(const T* x, const T* y, std::size_t n) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    a0 += static_cast<double>(x[j]) * static_cast<double>(y[j]);
    a1 += static_cast<double>(x[j + 1]) * static_cast<double>(y[j + 1]);
    a2 += static_cast<double>(x[j + 2]) * static_cast<double>(y[j + 2]);
    a3 += static_cast<double>(x[j + 3]) * static_cast<double>(y[j + 3]);
  }
  for (; j < n; ++j) a0 += static_cast<double>(x[j]) * static_cast<double>(y[j]);
  return (a0 + a1) + (a2 + a3);
}

template <typename T>
void require_same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) throw shape_mismatch(op, a.shape(), b.shape());
}

template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F forward, D derivative) {
  Tape<T>& t = *a.tape;
  auto x = a.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  const std::uint32_t in = a.id;
  return t.record(a.shape(), std::move(out), t.needs_grad(a),
                  [in, derivative](Tape<T>& tp, std::uint32_t self) {
                    auto g = tp.grad_of(self);
                    auto y = tp.value_of(self);
                    auto x = tp.value_of(in);
                    auto gx = tp.grad_of(in);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(x[i], y[i]);
                  });
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_same_shape("add", a, b);
  auto x = a.value();
  auto y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const std::uint32_t ia = a.id, ib = b.id;
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.record(a.shape(), std::move(out), ga || gb, [ia, ib, ga, gb](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    if (ga) {
      auto gx = tp.grad_of(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (gb) {
      auto gy = tp.grad_of(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i];
    }
  });
}

/// Elementwise sum of equally shaped values; zero-cost fan-in for losses.
template <typename T>
Var<T> add_n(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("add_n: no inputs");
  Tape<T>& t = *parts[0].tape;
  const Shape s = parts[0].shape();
  std::vector<double> acc(numel(s), 0.0);
  bool needs = false;
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.tape != &t) throw TapeError("ops: operands live on different tapes");
    if (p.shape() != s) throw shape_mismatch("add_n", s, p.shape());
    auto v = p.value();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += static_cast<double>(v[i]);
    if (t.needs_grad(p)) {
      needs = true;
      ids.push_back(p.id);
    }
  }
  std::vector<T> out(acc.begin(), acc.end());
  return t.record(s, std::move(out), needs, [ids = std::move(ids)](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    for (std::uint32_t id : ids) {
      auto gx = tp.grad_of(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

template <typename T>
Var<T> add_n(const std::vector<Var<T>>& parts) {
  return add_n(std::span<const Var<T>>(parts));
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  auto x = a.value();
  auto y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  const std::uint32_t ia = a.id, ib = b.id;
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.record(a.shape(), std::move(out), ga || gb, [ia, ib, ga, gb](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    if (ga) {
      auto gx = tp.grad_of(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (gb) {
      auto gy = tp.grad_of(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
    }
  });
}

/// Elementwise product.
template <typename T>
Var<T> multiply(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require_same_shape("multiply", a, b);
  auto x = a.value();
  auto y = b.value();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const std::uint32_t ia = a.id, ib = b.id;
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.record(a.shape(), std::move(out), ga || gb, [ia, ib, ga, gb](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    auto x = tp.value_of(ia);
    auto y = tp.value_of(ib);
    if (ga) {
      auto gx = tp.grad_of(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    }
    if (gb) {
      auto gy = tp.grad_of(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
    }
  });
}

/// Multiplies by a constant.
template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return detail::unary(a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(
      a,
      [](T x) {
        if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
Var<T> log(Var<T> a) {
  for (T x : a.value()) {
    if (!(x > T{0})) throw std::domain_error("log: non-positive input " + std::to_string(x));
  }
  return detail::unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

/// Matrix product with vector promotion: [n,k]x[k,m], [n,k]x[k], [k]x[k,m], [k]x[k].
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::same_tape(a, b);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.empty() || sb.empty() || sa.size() > 2 || sb.size() > 2) throw shape_mismatch("matmul", sa, sb);
  const std::size_t n = sa.size() == 2 ? sa[0] : 1;
  const std::size_t k = sa.back();
  const std::size_t kb = sb[0];
  const std::size_t m = sb.size() == 2 ? sb[1] : 1;
  if (k != kb) throw shape_mismatch("matmul", sa, sb);

  Shape out_shape;
  if (sa.size() == 2) out_shape.push_back(n);
  if (sb.size() == 2) out_shape.push_back(m);

  auto x = a.value();
  auto y = b.value();
  std::vector<T> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * k;
    if (m == 1) {
      out[i] = static_cast<T>(detail::dot_accumulate(row, y.data(), k));
    } else {
      std::vector<double> acc(m, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        const double r = row[j];
        const T* yrow = y.data() + j * m;
        for (std::size_t c = 0; c < m; ++c) acc[c] += r * static_cast<double>(yrow[c]);
      }
      for (std::size_t c = 0; c < m; ++c) out[i * m + c] = static_cast<T>(acc[c]);
    }
  }

  const std::uint32_t ia = a.id, ib = b.id;
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  return t.record(std::move(out_shape), std::move(out), ga || gb,
                  [ia, ib, ga, gb, n, k, m](Tape<T>& tp, std::uint32_t self) {
                    auto g = tp.grad_of(self);
                    auto x = tp.value_of(ia);
                    auto y = tp.value_of(ib);
                    if (ga) {
                      // dA[i,j] = sum_c g[i,c] * B[j,c]
                      auto gx = tp.grad_of(ia);
                      for (std::size_t i = 0; i < n; ++i) {
                        T* gxi = gx.data() + i * k;
                        if (m == 1) {
                          const T gi = g[i];
                          for (std::size_t j = 0; j < k; ++j) gxi[j] += gi * y[j];
                        } else {
                          const T* gi = g.data() + i * m;
                          for (std::size_t j = 0; j < k; ++j)
                            gxi[j] += static_cast<T>(detail::dot_accumulate(gi, y.data() + j * m, m));
                        }
                      }
                    }
                    if (gb) {
                      // dB[j,c] = sum_i A[i,j] * g[i,c]
                      auto gy = tp.grad_of(ib);
                      for (std::size_t i = 0; i < n; ++i) {
                        const T* xi = x.data() + i * k;
                        if (m == 1) {
                          const T gi = g[i];
                          for (std::size_t j = 0; j < k; ++j) gy[j] += xi[j] * gi;
                          continue;
                        }
                        const T* gi = g.data() + i * m;
                        for (std::size_t j = 0; j < k; ++j) {
                          const T xij = xi[j];
                          T* gyrow = gy.data() + j * m;
                          for (std::size_t c = 0; c < m; ++c) gyrow[c] += xij * gi[c];
                        }
                      }
                    }
                  });
}

/// Concatenates along `axis`. Rank-1 inputs join along axis 0; rank-2 inputs
/// join along axis 0 (rows) or 1 (columns).
template <typename T>
Var<T> concat(std::span<const Var<T>> parts, std::size_t axis = 0) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape<T>& t = *parts[0].tape;
  const Shape first = parts[0].shape();
  const std::size_t rank = first.size();
  if (rank == 0 || rank > 2 || axis >= rank) throw ShapeError("concat: unsupported rank/axis for " + shape_string(first));

  std::vector<std::uint32_t> ids;
  std::vector<bool> grads;
  std::vector<std::size_t> extents;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.tape != &t) throw TapeError("concat: operands live on different tapes");
    const Shape& s = p.shape();
    if (s.size() != rank) throw shape_mismatch("concat", first, s);
    if (rank == 2 && s[1 - axis] != first[1 - axis]) throw shape_mismatch("concat", first, s);
    ids.push_back(p.id);
    grads.push_back(t.needs_grad(p));
    any_grad = any_grad || grads.back();
    extents.push_back(s[axis]);
  }
  const std::size_t total = std::accumulate(extents.begin(), extents.end(), std::size_t{0});
  Shape out_shape = first;
  out_shape[axis] = total;
  const std::size_t rows = rank == 2 ? out_shape[0] : 1;
  const std::size_t cols = rank == 2 ? out_shape[1] : total;

  std::vector<T> out(rows * cols);
  // Column offset of each part within the output (rank-1 and axis-1 cases), or
  // row offset (axis-0 matrix case).
  std::vector<std::size_t> offsets(parts.size());
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    offsets[p] = off;
    off += extents[p];
    auto v = parts[p].value();
    if (rank == 1 || axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offsets[p] * (rank == 2 ? cols : 1)));
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < extents[p]; ++c) out[r * cols + offsets[p] + c] = v[r * extents[p] + c];
    }
  }
  return t.record(std::move(out_shape), std::move(out), any_grad,
                  [ids, grads, extents, offsets, rank, axis, rows, cols](Tape<T>& tp, std::uint32_t self) {
                    auto g = tp.grad_of(self);
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                      if (!grads[p]) continue;
                      auto gp = tp.grad_of(ids[p]);
                      if (rank == 1 || axis == 0) {
                        const std::size_t base = offsets[p] * (rank == 2 ? cols : 1);
                        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
                      } else {
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < extents[p]; ++c)
                            gp[r * extents[p] + c] += g[r * cols + offsets[p] + c];
                      }
                    }
                  });
}

template <typename T>
Var<T> concat(std::initializer_list<Var<T>> parts, std::size_t axis = 0) {
  return concat(std::span<const Var<T>>(parts.begin(), parts.size()), axis);
}

/// Contiguous slice [offset, offset+length) of a rank-1 tensor.
template <typename T>
Var<T> slice(Var<T> a, std::size_t offset, std::size_t length) {
  Tape<T>& t = *a.tape;
  if (a.shape().size() != 1 || offset + length > a.shape()[0]) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of " + shape_string(a.shape()));
  }
  auto x = a.value();
  std::vector<T> out(x.begin() + static_cast<std::ptrdiff_t>(offset),
                     x.begin() + static_cast<std::ptrdiff_t>(offset + length));
  const std::uint32_t in = a.id;
  return t.record(Shape{length}, std::move(out), t.needs_grad(a), [in, offset](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    auto gx = tp.grad_of(in);
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

/// Splits a rank-1 tensor into consecutive pieces of the given sizes.
template <typename T>
std::vector<Var<T>> split(Var<T> a, std::span<const std::size_t> sizes) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (a.shape().size() != 1 || total != a.shape()[0]) {
    throw ShapeError("split: sizes sum to " + std::to_string(total) + " for " + shape_string(a.shape()));
  }
  std::vector<Var<T>> out;
  std::size_t off = 0;
  for (std::size_t s : sizes) {
    out.push_back(slice(a, off, s));
    off += s;
  }
  return out;
}

/// Row `i` of a matrix as a vector.
template <typename T>
Var<T> row(Var<T> m, std::size_t i) {
  Tape<T>& t = *m.tape;
  const Shape s = m.shape();
  if (s.size() != 2 || i >= s[0]) throw ShapeError("row: index " + std::to_string(i) + " out of " + shape_string(s));
  const std::size_t cols = s[1];
  auto x = m.value();
  std::vector<T> out(x.begin() + static_cast<std::ptrdiff_t>(i * cols),
                     x.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols));
  const std::uint32_t in = m.id;
  return t.record(Shape{cols}, std::move(out), t.needs_grad(m), [in, i, cols](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    auto gx = tp.grad_of(in);
    for (std::size_t c = 0; c < cols; ++c) gx[i * cols + c] += g[c];
  });
}

/// Stacks equal-length vectors as the rows of a matrix.
template <typename T>
Var<T> stack(std::span<const Var<T>> rows) {
  if (rows.empty()) throw ShapeError("stack: no inputs");
  const Shape s = rows[0].shape();
  if (s.size() != 1) throw ShapeError("stack: expects vectors, got " + shape_string(s));
  std::vector<Var<T>> as_rows;
  as_rows.reserve(rows.size());
  Tape<T>& t = *rows[0].tape;
  for (const auto& r : rows) {
    if (r.shape() != s) throw shape_mismatch("stack", s, r.shape());
    auto v = r.value();
    const std::uint32_t in = r.id;
    as_rows.push_back(t.record(Shape{1, s[0]}, std::vector<T>(v.begin(), v.end()), t.needs_grad(r),
                               [in](Tape<T>& tp, std::uint32_t self) {
                                 auto g = tp.grad_of(self);
                                 auto gx = tp.grad_of(in);
                                 for (std::size_t c = 0; c < g.size(); ++c) gx[c] += g[c];
                               }));
  }
  return concat(std::span<const Var<T>>(as_rows), 0);
}

/// Gathers rows of `table` ([V, D]) into an [ids.size(), D] matrix.
template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids) {
  Tape<T>& t = *table.tape;
  const Shape s = table.shape();
  if (s.size() != 2) throw ShapeError("embedding_lookup: table must be a matrix, got " + shape_string(s));
  const std::size_t vocab = s[0], dim = s[1];
  auto x = table.value();
  std::vector<T> out(ids.size() * dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[r]) + " outside vocabulary of " +
                              std::to_string(vocab));
    }
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(ids[r] * dim), dim, out.begin() + static_cast<std::ptrdiff_t>(r * dim));
  }
  std::vector<int> idv(ids.begin(), ids.end());
  const std::uint32_t in = table.id;
  return t.record(Shape{ids.size(), dim}, std::move(out), t.needs_grad(table),
                  [in, idv, dim](Tape<T>& tp, std::uint32_t self) {
                    auto g = tp.grad_of(self);
                    auto gx = tp.grad_of(in);
                    for (std::size_t r = 0; r < idv.size(); ++r)
                      for (std::size_t c = 0; c < dim; ++c) gx[static_cast<std::size_t>(idv[r]) * dim + c] += g[r * dim + c];
                  });
}

/// Softmax over `axis` (rank 1: axis 0; rank 2: axis 0 or 1).
template <typename T>
Var<T> softmax(Var<T> a, std::size_t axis = 0) {
  Tape<T>& t = *a.tape;
  const Shape s = a.shape();
  if (s.empty() || s.size() > 2 || axis >= s.size()) throw ShapeError("softmax: bad axis for " + shape_string(s));
  const std::size_t rows = s.size() == 2 ? s[0] : 1;
  const std::size_t cols = s.size() == 2 ? s[1] : s[0];
  // Each slice is (count elements, stride apart, starting at base(j)).
  const bool along_cols = s.size() == 1 || axis == 1;
  const std::size_t slices = along_cols ? rows : cols;
  const std::size_t count = along_cols ? cols : rows;
  const std::size_t stride = along_cols ? 1 : cols;
  auto base = [along_cols, cols](std::size_t j) { return along_cols ? j * cols : j; };

  auto x = a.value();
  std::vector<T> out(x.size());
  for (std::size_t j = 0; j < slices; ++j) {
    const std::size_t b = base(j);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) mx = std::max(mx, static_cast<double>(x[b + i * stride]));
    double z = 0.0;
    std::vector<double> e(count);
    for (std::size_t i = 0; i < count; ++i) {
      e[i] = std::exp(static_cast<double>(x[b + i * stride]) - mx);
      z += e[i];
    }
    for (std::size_t i = 0; i < count; ++i) out[b + i * stride] = static_cast<T>(e[i] / z);
  }
  const std::uint32_t in = a.id;
  return t.record(s, std::move(out), t.needs_grad(a),
                  [in, slices, count, stride, base](Tape<T>& tp, std::uint32_t self) {
                    auto g = tp.grad_of(self);
                    auto y = tp.value_of(self);
                    auto gx = tp.grad_of(in);
                    for (std::size_t j = 0; j < slices; ++j) {
                      const std::size_t b = base(j);
                      double dotv = 0.0;
                      for (std::size_t i = 0; i < count; ++i)
                        dotv += static_cast<double>(g[b + i * stride]) * y[b + i * stride];
                      for (std::size_t i = 0; i < count; ++i) {
                        const std::size_t k = b + i * stride;
                        gx[k] += static_cast<T>(y[k] * (static_cast<double>(g[k]) - dotv));
                      }
                    }
                  });
}

/// log(softmax(a)) for a rank-1 tensor, stabilised by max-subtraction.
template <typename T>
Var<T> log_softmax(Var<T> a) {
  Tape<T>& t = *a.tape;
  if (a.shape().size() != 1 || a.shape()[0] == 0) throw ShapeError("log_softmax: expects a non-empty vector, got " + shape_string(a.shape()));
  auto x = a.value();
  double mx = -std::numeric_limits<double>::infinity();
  for (T v : x) mx = std::max(mx, static_cast<double>(v));
  double z = 0.0;
  for (T v : x) z += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(z);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(static_cast<double>(x[i]) - lse);
  const std::uint32_t in = a.id;
  return t.record(a.shape(), std::move(out), t.needs_grad(a), [in](Tape<T>& tp, std::uint32_t self) {
    auto g = tp.grad_of(self);
    auto y = tp.value_of(self);
    auto gx = tp.grad_of(in);
    double gsum = 0.0;
    for (T v : g) gsum += v;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += static_cast<T>(g[i] - std::exp(static_cast<double>(y[i])) * gsum);
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = *a.tape;
  double acc = 0.0;
  for (T v : a.value()) acc += v;
  const std::uint32_t in = a.id;
  return t.record(Shape{}, {static_cast<T>(acc)}, t.needs_grad(a), [in](Tape<T>& tp, std::uint32_t self) {
    const T g = tp.grad_of(self)[0];
    for (T& gx : tp.grad_of(in)) gx += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.size())));
}

/// Element `i` of a rank-1 tensor as a scalar.
template <typename T>
Var<T> pick(Var<T> a, std::size_t i) {
  Tape<T>& t = *a.tape;
  if (a.shape().size() != 1 || i >= a.shape()[0]) {
    throw std::out_of_range("pick: index " + std::to_string(i) + " out of " + shape_string(a.shape()));
  }
  const std::uint32_t in = a.id;
  return t.record(Shape{}, {a.value()[i]}, t.needs_grad(a), [in, i](Tape<T>& tp, std::uint32_t self) {
    tp.grad_of(in)[i] += tp.grad_of(self)[0];
  });
}

template <typename T>
Var<T> dot(Var<T> a, Var<T> b) {
  return matmul(a, b);
}

/// -log softmax(logits)[target].
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::size_t target) {
  if (logits.shape().size() != 1 || target >= logits.shape()[0]) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " out of " +
                            shape_string(logits.shape()));
  }
  return scale(pick(log_softmax(logits), target), T{-1});
}

/// Shannon entropy of softmax(logits) in nats.
template <typename T>
Var<T> entropy(Var<T> logits) {
  auto logp = log_softmax(logits);
  auto p = softmax(logits);
  return scale(sum(multiply(p, logp)), T{-1});
}

/// A constant copy of `a`'s value: gradients do not flow through it.
template <typename T>
Var<T> stop_gradient(Var<T> a) {
  auto v = a.value();
  return a.tape->constant(a.shape(), std::vector<T>(v.begin(), v.end()));
}

}  // namespace askroute::diff
