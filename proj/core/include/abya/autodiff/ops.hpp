#pragma once

// Differentiable primitives recorded on a Tape. Every op validates its operand
// dimensions, computes the forward value eagerly, and registers a closure that
// accumulates parent gradients.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abya/autodiff/tape.hpp"
#include "abya/autodiff/tensor.hpp"

namespace abya::ad {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<const RowMatrix<T>> as_matrix(std::span<const T> s, std::size_t rows,
                                         std::size_t cols) {
  return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <typename T>
Eigen::Map<RowMatrix<T>> as_matrix(std::span<T> s, std::size_t rows, std::size_t cols) {
  return {s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
template <typename T>
Eigen::Map<const Vector<T>> as_vector(std::span<const T> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}
template <typename T>
Eigen::Map<Vector<T>> as_vector(std::span<T> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

inline void require_rank(const char* op, const Shape& dims, std::size_t rank) {
  if (dims.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(dims));
  }
}

inline void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw DimensionError(op, a, b);
}

template <typename T, typename Fwd, typename Deriv>
Var unary(Tape<T>& tape, const char* op, Var x, Fwd fwd, Deriv deriv) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return tape.record(op, std::move(out), {x}, [x, deriv](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    const auto& xv = t.value(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * deriv(xv[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  detail::require_same("add", tape.dims(a), tape.dims(b));
  Tensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record("add", std::move(out), {a, b}, [a, b](Tape<T>& t, std::span<const T> g) {
    for (Var p : {a, b}) {
      auto d = t.accumulate(p);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  detail::require_same("sub", tape.dims(a), tape.dims(b));
  Tensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record("sub", std::move(out), {a, b}, [a, b](Tape<T>& t, std::span<const T> g) {
    auto da = t.accumulate(a);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
    auto db = t.accumulate(b);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] -= g[i];
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  detail::require_same("mul", tape.dims(a), tape.dims(b));
  Tensor<T> out = tape.value(a);
  const auto& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record("mul", std::move(out), {a, b}, [a, b](Tape<T>& t, std::span<const T> g) {
    const auto& av = t.value(a);
    const auto& bv2 = t.value(b);
    auto da = t.accumulate(a);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i] * bv2[i];
    auto db = t.accumulate(b);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[i] * av[i];
  });
}

/// x * c for a constant c.
template <typename T>
Var scale(Tape<T>& tape, Var x, T c) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.data()) v *= c;
  return tape.record("scale", std::move(out), {x}, [x, c](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * c;
  });
}

/// x + c for a constant c.
template <typename T>
Var add_scalar(Tape<T>& tape, Var x, T c) {
  Tensor<T> out = tape.value(x);
  for (auto& v : out.data()) v += c;
  return tape.record("add_scalar", std::move(out), {x}, [x](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
  });
}

/// Multiplies every element of x by the scalar node s.
template <typename T>
Var scale_by(Tape<T>& tape, Var x, Var s) {
  if (tape.value(s).size() != 1) throw DimensionError("scale_by", tape.dims(s), Shape{1});
  const T sv = tape.value(s)[0];
  Tensor<T> out = tape.value(x);
  for (auto& v : out.data()) v *= sv;
  return tape.record("scale_by", std::move(out), {x, s}, [x, s](Tape<T>& t, std::span<const T> g) {
    const auto& xv = t.value(x);
    const T s_now = t.value(s)[0];
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * s_now;
    auto ds = t.accumulate(s);
    if (!ds.empty()) {
      T acc{0};
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
      ds[0] += acc;
    }
  });
}

template <typename T>
Var neg(Tape<T>& tape, Var x) {
  return scale(tape, x, T{-1});
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return detail::unary(
      tape, "relu", x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  Var y{static_cast<std::uint32_t>(tape.size())};
  return tape.record("tanh", std::move(out), {x}, [x, y](Tape<T>& t, std::span<const T> g) {
    const auto& yv = t.value(y);
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (T{1} - yv[i] * yv[i]);
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-in[i]));
  Var y{static_cast<std::uint32_t>(tape.size())};
  return tape.record("sigmoid", std::move(out), {x}, [x, y](Tape<T>& t, std::span<const T> g) {
    const auto& yv = t.value(y);
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * yv[i] * (T{1} - yv[i]);
  });
}

template <typename T>
Var exp(Tape<T>& tape, Var x) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
  Var y{static_cast<std::uint32_t>(tape.size())};
  return tape.record("exp", std::move(out), {x}, [x, y](Tape<T>& t, std::span<const T> g) {
    const auto& yv = t.value(y);
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * yv[i];
  });
}

/// Natural log; inputs are floored at the smallest normal value so that
/// probabilities that underflowed to zero stay finite.
template <typename T>
Var log(Tape<T>& tape, Var x) {
  return detail::unary(
      tape, "log", x, [](T v) { return std::log(std::max(v, std::numeric_limits<T>::min())); },
      [](T v) { return T{1} / std::max(v, std::numeric_limits<T>::min()); });
}

/// Elementwise minimum; ties send the gradient to the first operand.
template <typename T>
Var minimum(Tape<T>& tape, Var a, Var b) {
  detail::require_same("minimum", tape.dims(a), tape.dims(b));
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  Tensor<T> out(av.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(av[i], bv[i]);
  return tape.record("minimum", std::move(out), {a, b}, [a, b](Tape<T>& t, std::span<const T> g) {
    const auto& av2 = t.value(a);
    const auto& bv2 = t.value(b);
    auto da = t.accumulate(a);
    auto db = t.accumulate(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av2[i] <= bv2[i]) {
        if (!da.empty()) da[i] += g[i];
      } else if (!db.empty()) {
        db[i] += g[i];
      }
    }
  });
}

/// Saturates x into [lo, hi]; the gradient is zero outside the interval.
template <typename T>
Var clamp(Tape<T>& tape, Var x, T lo, T hi) {
  return detail::unary(
      tape, "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v) { return (v >= lo && v <= hi) ? T{1} : T{0}; });
}

/// Smooth-L1 loss with unit threshold, elementwise.
template <typename T>
Var huber(Tape<T>& tape, Var x) {
  return detail::unary(
      tape, "huber", x,
      [](T v) { return std::abs(v) <= T{1} ? T{0.5} * v * v : std::abs(v) - T{0.5}; },
      [](T v) { return std::abs(v) <= T{1} ? v : (v > T{0} ? T{1} : T{-1}); });
}

// ---------------------------------------------------------------------------
// Reductions and shape manipulation

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T acc{0};
  for (T v : tape.value(x).data()) acc += v;
  return tape.record("sum", Tensor<T>::scalar(acc), {x}, [x](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    for (auto& d : dx) d += g[0];
  });
}

template <typename T>
Var mean(Tape<T>& tape, Var x) {
  const T n = static_cast<T>(tape.value(x).size());
  return scale(tape, sum(tape, x), T{1} / n);
}

/// Column sums of a matrix {R, C}, giving {C}.
template <typename T>
Var sum_rows(Tape<T>& tape, Var x) {
  const Shape& d = tape.dims(x);
  detail::require_rank("sum_rows", d, 2);
  const std::size_t rows = d[0], cols = d[1];
  const auto& v = tape.value(x);
  Tensor<T> out({cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += v[r * cols + c];
  return tape.record("sum_rows", std::move(out), {x}, [x, rows, cols](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += g[c];
  });
}

/// Sum of a list of equally shaped nodes.
template <typename T>
Var add_n(Tape<T>& tape, const std::vector<Var>& xs) {
  if (xs.empty()) throw DimensionError("add_n: no operands");
  Tensor<T> out = tape.value(xs.front());
  for (std::size_t k = 1; k < xs.size(); ++k) {
    detail::require_same("add_n", out.dims(), tape.dims(xs[k]));
    const auto& v = tape.value(xs[k]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return tape.record_many("add_n", std::move(out), xs, [xs](Tape<T>& t, std::span<const T> g) {
    for (Var p : xs) {
      auto d = t.accumulate(p);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

/// Concatenation along the leading axis; trailing dims must agree.
template <typename T>
Var concat(Tape<T>& tape, const std::vector<Var>& xs) {
  if (xs.empty()) throw DimensionError("concat: no operands");
  Shape dims = tape.dims(xs.front());
  const Shape tail(dims.begin() + 1, dims.end());
  std::size_t lead = 0;
  std::vector<T> data;
  for (Var x : xs) {
    const Shape& d = tape.dims(x);
    if (d.size() != dims.size() || !std::equal(tail.begin(), tail.end(), d.begin() + 1)) {
      throw DimensionError("concat", dims, d);
    }
    lead += d[0];
    const auto& v = tape.value(x).data();
    data.insert(data.end(), v.begin(), v.end());
  }
  dims[0] = lead;
  return tape.record_many("concat", Tensor<T>(dims, std::move(data)), xs,
                          [xs](Tape<T>& t, std::span<const T> g) {
                            std::size_t offset = 0;
                            for (Var p : xs) {
                              const std::size_t n = t.value(p).size();
                              auto d = t.accumulate(p);
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offset + i];
                              offset += n;
                            }
                          });
}

/// Rows [begin, end) along the leading axis.
template <typename T>
Var slice(Tape<T>& tape, Var x, std::size_t begin, std::size_t end) {
  Shape dims = tape.dims(x);
  if (begin >= end || end > dims[0]) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for shape " + to_string(dims));
  }
  const std::size_t row = tape.value(x).size() / dims[0];
  dims[0] = end - begin;
  const auto& src = tape.value(x).data();
  std::vector<T> data(src.begin() + begin * row, src.begin() + end * row);
  const std::size_t offset = begin * row;
  return tape.record("slice", Tensor<T>(dims, std::move(data)), {x},
                     [x, offset](Tape<T>& t, std::span<const T> g) {
                       auto dx = t.accumulate(x);
                       for (std::size_t i = 0; i < g.size(); ++i) dx[offset + i] += g[i];
                     });
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape dims) {
  if (element_count(dims) != tape.value(x).size()) {
    throw DimensionError("reshape", tape.dims(x), dims);
  }
  Tensor<T> out(std::move(dims), tape.value(x).storage());
  return tape.record("reshape", std::move(out), {x}, [x](Tape<T>& t, std::span<const T> g) {
    auto dx = t.accumulate(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
  });
}

template <typename T>
Var transpose(Tape<T>& tape, Var x) {
  const Shape& d = tape.dims(x);
  detail::require_rank("transpose", d, 2);
  const std::size_t rows = d[0], cols = d[1];
  const auto& v = tape.value(x);
  Tensor<T> out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = v[r * cols + c];
  return tape.record("transpose", std::move(out), {x},
                     [x, rows, cols](Tape<T>& t, std::span<const T> g) {
                       auto dx = t.accumulate(x);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] += g[c * rows + r];
                     });
}

/// Selects element i of x as a scalar node.
template <typename T>
Var pick(Tape<T>& tape, Var x, std::size_t i) {
  if (i >= tape.value(x).size()) {
    throw DimensionError("pick: index " + std::to_string(i) + " out of range for shape " +
                         to_string(tape.dims(x)));
  }
  return tape.record("pick", Tensor<T>::scalar(tape.value(x)[i]), {x},
                     [x, i](Tape<T>& t, std::span<const T> g) { t.accumulate(x)[i] += g[0]; });
}

// ---------------------------------------------------------------------------
// Layers

/// y = W x + b with x {in}, W {out, in}, b {out}.
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b) {
  const Shape& xd = tape.dims(x);
  const Shape& wd = tape.dims(w);
  const Shape& bd = tape.dims(b);
  detail::require_rank("linear weight", wd, 2);
  if (xd.size() != 1 || xd[0] != wd[1]) throw DimensionError("linear input", xd, wd);
  if (bd.size() != 1 || bd[0] != wd[0]) throw DimensionError("linear bias", bd, wd);
  const std::size_t rows = wd[0], cols = wd[1];
  Tensor<T> out = tape.value(b);
  detail::as_vector<T>(out.data()).noalias() +=
      detail::as_matrix<T>(tape.value(w).data(), rows, cols) *
      detail::as_vector<T>(tape.value(x).data());
  return tape.record("linear", std::move(out), {x, w, b},
                     [x, w, b, rows, cols](Tape<T>& t, std::span<const T> g) {
                       const auto gv = detail::as_vector<T>(g);
                       if (auto dx = t.accumulate(x); !dx.empty()) {
                         detail::as_vector<T>(dx).noalias() +=
                             detail::as_matrix<T>(t.value(w).data(), rows, cols).transpose() * gv;
                       }
                       if (auto dw = t.accumulate(w); !dw.empty()) {
                         detail::as_matrix<T>(dw, rows, cols).noalias() +=
                             gv * detail::as_vector<T>(t.value(x).data()).transpose();
                       }
                       if (auto db = t.accumulate(b); !db.empty()) detail::as_vector<T>(db) += gv;
                     });
}

/// 2-D convolution. x {C, H, W}, kernels {O, C, KH, KW}, bias {O}; zero padding.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var kernels, Var bias, std::size_t stride = 1,
           std::size_t padding = 0) {
  const Shape& xd = tape.dims(x);
  const Shape& kd = tape.dims(kernels);
  detail::require_rank("conv2d input", xd, 3);
  detail::require_rank("conv2d kernels", kd, 4);
  if (kd[1] != xd[0]) throw DimensionError("conv2d channels", xd, kd);
  if (tape.dims(bias) != Shape{kd[0]}) throw DimensionError("conv2d bias", tape.dims(bias), kd);
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  const std::size_t channels = xd[0], height = xd[1], width = xd[2];
  const std::size_t out_ch = kd[0], kh = kd[2], kw = kd[3];
  if (height + 2 * padding < kh || width + 2 * padding < kw) {
    throw DimensionError("conv2d kernel larger than padded input", xd, kd);
  }
  const std::size_t oh = (height + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (width + 2 * padding - kw) / stride + 1;
  const std::size_t patch = channels * kh * kw;
  const std::size_t positions = oh * ow;

  // Column matrix {patch, positions}; entry -1 in `source` marks padding.
  std::vector<std::ptrdiff_t> source(patch * positions, -1);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        const std::size_t row = (c * kh + i) * kw + j;
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            const auto iy = static_cast<std::ptrdiff_t>(y * stride + i) -
                            static_cast<std::ptrdiff_t>(padding);
            const auto ix = static_cast<std::ptrdiff_t>(xx * stride + j) -
                            static_cast<std::ptrdiff_t>(padding);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(height) ||
                ix >= static_cast<std::ptrdiff_t>(width)) {
              continue;
            }
            source[row * positions + y * ow + xx] =
                static_cast<std::ptrdiff_t>((c * height + iy) * width + ix);
          }
      }
  const auto& xv = tape.value(x);
  std::vector<T> cols(patch * positions, T{0});
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (source[k] >= 0) cols[k] = xv[static_cast<std::size_t>(source[k])];
  }

  Tensor<T> out({out_ch, oh, ow});
  auto om = detail::as_matrix<T>(out.data(), out_ch, positions);
  om.noalias() = detail::as_matrix<T>(tape.value(kernels).data(), out_ch, patch) *
                 detail::as_matrix<T>(std::span<const T>(cols), patch, positions);
  const auto& bv = tape.value(bias);
  for (std::size_t o = 0; o < out_ch; ++o) om.row(static_cast<Eigen::Index>(o)).array() += bv[o];

  return tape.record(
      "conv2d", std::move(out), {x, kernels, bias},
      [x, kernels, bias, source = std::move(source), cols = std::move(cols), out_ch, patch,
       positions](Tape<T>& t, std::span<const T> g) {
        const auto gm = detail::as_matrix<T>(g, out_ch, positions);
        if (auto dk = t.accumulate(kernels); !dk.empty()) {
          detail::as_matrix<T>(dk, out_ch, patch).noalias() +=
              gm * detail::as_matrix<T>(std::span<const T>(cols), patch, positions).transpose();
        }
        if (auto db = t.accumulate(bias); !db.empty()) {
          detail::as_vector<T>(db) += gm.rowwise().sum();
        }
        if (auto dx = t.accumulate(x); !dx.empty()) {
          detail::RowMatrix<T> dcols =
              detail::as_matrix<T>(t.value(kernels).data(), out_ch, patch).transpose() * gm;
          for (std::size_t k = 0; k < source.size(); ++k) {
            if (source[k] >= 0) dx[static_cast<std::size_t>(source[k])] += dcols.data()[k];
          }
        }
      });
}

/// Per-channel affine map gamma[c] * x[c, ...] + beta[c] for x {C, H, W}.
template <typename T>
Var channel_affine(Tape<T>& tape, Var x, Var gamma, Var beta) {
  const Shape& xd = tape.dims(x);
  detail::require_rank("channel_affine input", xd, 3);
  if (tape.dims(gamma) != Shape{xd[0]}) throw DimensionError("channel_affine gamma", tape.dims(gamma), xd);
  if (tape.dims(beta) != Shape{xd[0]}) throw DimensionError("channel_affine beta", tape.dims(beta), xd);
  const std::size_t channels = xd[0], plane = xd[1] * xd[2];
  const auto& xv = tape.value(x);
  const auto& gv = tape.value(gamma);
  const auto& bv = tape.value(beta);
  Tensor<T> out(xd);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t k = 0; k < plane; ++k) out[c * plane + k] = gv[c] * xv[c * plane + k] + bv[c];
  return tape.record("channel_affine", std::move(out), {x, gamma, beta},
                     [x, gamma, beta, channels, plane](Tape<T>& t, std::span<const T> g) {
                       const auto& xv2 = t.value(x);
                       const auto& gv2 = t.value(gamma);
                       auto dx = t.accumulate(x);
                       auto dg = t.accumulate(gamma);
                       auto db = t.accumulate(beta);
                       for (std::size_t c = 0; c < channels; ++c) {
                         T sg{0}, sb{0};
                         for (std::size_t k = 0; k < plane; ++k) {
                           const std::size_t i = c * plane + k;
                           if (!dx.empty()) dx[i] += g[i] * gv2[c];
                           sg += g[i] * xv2[i];
                           sb += g[i];
                         }
                         if (!dg.empty()) dg[c] += sg;
                         if (!db.empty()) db[c] += sb;
                       }
                     });
}

/// Rows of table {N, E} selected by ids, giving {ids.size(), E}.
template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::vector<std::size_t> ids) {
  const Shape& td = tape.dims(table);
  detail::require_rank("gather_rows table", td, 2);
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  const std::size_t width = td[1];
  const auto& tv = tape.value(table);
  Tensor<T> out({ids.size(), width});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= td[0]) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[r]) + " out of range for " +
                           to_string(td));
    }
    std::copy_n(tv.data().begin() + ids[r] * width, width, out.data().begin() + r * width);
  }
  return tape.record("gather_rows", std::move(out), {table},
                     [table, ids = std::move(ids), width](Tape<T>& t, std::span<const T> g) {
                       auto dt = t.accumulate(table);
                       for (std::size_t r = 0; r < ids.size(); ++r)
                         for (std::size_t k = 0; k < width; ++k) dt[ids[r] * width + k] += g[r * width + k];
                     });
}

/// Row `id` of table {N, E} as a vector {E}.
template <typename T>
Var embedding(Tape<T>& tape, Var table, std::size_t id) {
  Var rows = gather_rows(tape, table, {id});
  return reshape(tape, rows, Shape{tape.dims(table)[1]});
}

template <typename T>
Var log_softmax(Tape<T>& tape, Var logits) {
  const auto& z = tape.value(logits);
  detail::require_rank("log_softmax", z.dims(), 1);
  const T mx = *std::max_element(z.data().begin(), z.data().end());
  T total{0};
  for (T v : z.data()) total += std::exp(v - mx);
  const T lse = mx + std::log(total);
  Tensor<T> out(z.dims());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  Var y{static_cast<std::uint32_t>(tape.size())};
  return tape.record("log_softmax", std::move(out), {logits},
                     [logits, y](Tape<T>& t, std::span<const T> g) {
                       const auto& yv = t.value(y);
                       T gs{0};
                       for (T v : g) gs += v;
                       auto dz = t.accumulate(logits);
                       for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += g[i] - std::exp(yv[i]) * gs;
                     });
}

template <typename T>
Var softmax(Tape<T>& tape, Var logits) {
  const auto& z = tape.value(logits);
  detail::require_rank("softmax", z.dims(), 1);
  const T mx = *std::max_element(z.data().begin(), z.data().end());
  Tensor<T> out(z.dims());
  T total{0};
  for (std::size_t i = 0; i < z.size(); ++i) total += (out[i] = std::exp(z[i] - mx));
  for (auto& v : out.data()) v /= total;
  Var y{static_cast<std::uint32_t>(tape.size())};
  return tape.record("softmax", std::move(out), {logits}, [logits, y](Tape<T>& t, std::span<const T> g) {
    const auto& p = t.value(y);
    T dot{0};
    for (std::size_t i = 0; i < p.size(); ++i) dot += g[i] * p[i];
    auto dz = t.accumulate(logits);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += p[i] * (g[i] - dot);
  });
}

/// -log softmax(logits)[target].
template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::size_t target) {
  return neg(tape, pick(tape, log_softmax(tape, logits), target));
}

/// Shannon entropy (nats) of softmax(logits).
template <typename T>
Var entropy(Tape<T>& tape, Var logits) {
  const auto& z = tape.value(logits);
  detail::require_rank("entropy", z.dims(), 1);
  const T mx = *std::max_element(z.data().begin(), z.data().end());
  T total{0};
  for (T v : z.data()) total += std::exp(v - mx);
  const T lse = mx + std::log(total);
  T h{0};
  for (T v : z.data()) h -= std::exp(v - lse) * (v - lse);
  return tape.record("entropy", Tensor<T>::scalar(h), {logits},
                     [logits, lse, h](Tape<T>& t, std::span<const T> g) {
                       const auto& zv = t.value(logits);
                       auto dz = t.accumulate(logits);
                       for (std::size_t i = 0; i < dz.size(); ++i) {
                         const T logp = zv[i] - lse;
                         dz[i] -= g[0] * std::exp(logp) * (logp + h);
                       }
                     });
}

/// Shannon entropy (nats) of a probability vector; zero entries contribute 0.
template <typename T>
Var entropy_of_probs(Tape<T>& tape, Var probs) {
  const auto& p = tape.value(probs);
  detail::require_rank("entropy_of_probs", p.dims(), 1);
  T h{0};
  for (T v : p.data()) {
    if (v > T{0}) h -= v * std::log(v);
  }
  return tape.record("entropy_of_probs", Tensor<T>::scalar(h), {probs},
                     [probs](Tape<T>& t, std::span<const T> g) {
                       const auto& pv = t.value(probs);
                       auto dp = t.accumulate(probs);
                       for (std::size_t i = 0; i < dp.size(); ++i) {
                         dp[i] -= g[0] * (std::log(std::max(pv[i], std::numeric_limits<T>::min())) + T{1});
                       }
                     });
}

/// Elementwise LSTM gate nonlinearity. gates {4H} ordered (input, forget, cell,
/// output); cell {H}. Returns [h', c'] as one {2H} vector.
template <typename T>
Var lstm_pointwise(Tape<T>& tape, Var gates, Var cell) {
  const auto& zv = tape.value(gates);
  const auto& cv = tape.value(cell);
  detail::require_rank("lstm gates", zv.dims(), 1);
  detail::require_rank("lstm cell", cv.dims(), 1);
  const std::size_t hidden = cv.size();
  if (zv.size() != 4 * hidden) throw DimensionError("lstm_pointwise", zv.dims(), cv.dims());
  auto sig = [](T v) { return T{1} / (T{1} + std::exp(-v)); };
  // Cache activations {i, f, g, o, tanh(c')}.
  std::vector<T> act(5 * hidden);
  Tensor<T> out({2 * hidden});
  for (std::size_t k = 0; k < hidden; ++k) {
    const T i = sig(zv[k]);
    const T f = sig(zv[hidden + k]);
    const T gg = std::tanh(zv[2 * hidden + k]);
    const T o = sig(zv[3 * hidden + k]);
    const T c_new = f * cv[k] + i * gg;
    const T tc = std::tanh(c_new);
    act[k] = i;
    act[hidden + k] = f;
    act[2 * hidden + k] = gg;
    act[3 * hidden + k] = o;
    act[4 * hidden + k] = tc;
    out[k] = o * tc;
    out[hidden + k] = c_new;
  }
  return tape.record("lstm_pointwise", std::move(out), {gates, cell},
                     [gates, cell, hidden, act = std::move(act)](Tape<T>& t, std::span<const T> g) {
                       const auto& cv2 = t.value(cell);
                       auto dz = t.accumulate(gates);
                       auto dc = t.accumulate(cell);
                       for (std::size_t k = 0; k < hidden; ++k) {
                         const T i = act[k], f = act[hidden + k], gg = act[2 * hidden + k];
                         const T o = act[3 * hidden + k], tc = act[4 * hidden + k];
                         const T dh = g[k];
                         const T dcn = g[hidden + k] + dh * o * (T{1} - tc * tc);
                         if (!dz.empty()) {
                           dz[k] += dcn * gg * i * (T{1} - i);
                           dz[hidden + k] += dcn * cv2[k] * f * (T{1} - f);
                           dz[2 * hidden + k] += dcn * i * (T{1} - gg * gg);
                           dz[3 * hidden + k] += dh * tc * o * (T{1} - o);
                         }
                         if (!dc.empty()) dc[k] += dcn * f;
                       }
                     });
}

template <typename T>
struct LstmOutput {
  Var hidden;
  Var cell;
};

/// One LSTM step: gates = W [x; h] + b, W {4H, in + H}.
template <typename T>
LstmOutput<T> lstm_cell(Tape<T>& tape, Var x, Var h, Var c, Var w, Var b) {
  const std::size_t hidden = tape.value(h).size();
  if (tape.value(c).size() != hidden) throw DimensionError("lstm_cell state", tape.dims(h), tape.dims(c));
  Var z = concat(tape, {x, h});
  Var gates = linear(tape, z, w, b);
  Var both = lstm_pointwise(tape, gates, c);
  return {slice(tape, both, 0, hidden), slice(tape, both, hidden, 2 * hidden)};
}

}  // namespace abya::ad
