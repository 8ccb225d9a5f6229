#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "airwrite/error.hpp"
#include "airwrite/tensor/value.hpp"

namespace airwrite {

namespace detail {

// Gradient buffer of parent i, or nullptr when it does not take gradients.
inline double* parent_grad(const Node& node, std::size_t i) {
  Node& parent = *node.parents[i];
  return parent.requires_grad ? parent.grad.data() : nullptr;
}

inline const double* parent_data(const Node& node, std::size_t i) {
  return node.parents[i]->data.data();
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::invalid_shape, what);
}

inline void require_rank(const Value& v, std::size_t rank, const char* op) {
  require(v.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_string(v.shape()));
}

inline void require_same_shape(const Value& a, const Value& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

// Rows/columns view of a rank-1 or rank-2 value; rank-1 is one row.
inline std::pair<std::size_t, std::size_t> as_matrix(const Value& v) {
  if (v.rank() == 1) return {1, v.dim(0)};
  if (v.rank() == 2) return {v.dim(0), v.dim(1)};
  throw Error(ErrorKind::invalid_shape, "expected rank 1 or 2, got " + shape_string(v.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Value add(const Value& a, const Value& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Value::from_op(a.shape(), std::move(out), {a, b}, [](const detail::Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (double* g = detail::parent_grad(n, p)) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
      }
    }
  });
}

inline Value sub(const Value& a, const Value& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Value::from_op(a.shape(), std::move(out), {a, b}, [](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
    if (double* g = detail::parent_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

inline Value mul(const Value& a, const Value& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Value::from_op(a.shape(), std::move(out), {a, b}, [](const detail::Node& n) {
    const double* x = detail::parent_data(n, 0);
    const double* y = detail::parent_data(n, 1);
    if (double* g = detail::parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * y[i];
    }
    if (double* g = detail::parent_grad(n, 1)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * x[i];
    }
  });
}

inline Value scale(const Value& a, double k) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= k;
  return Value::from_op(a.shape(), std::move(out), {a}, [k](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += k * n.grad[i];
    }
  });
}

inline Value neg(const Value& a) { return scale(a, -1.0); }

/// Matrix [m x n] plus a row vector [n] broadcast over the rows.
inline Value add_row(const Value& a, const Value& row) {
  auto [m, n] = detail::as_matrix(a);
  detail::require(row.rank() == 1 && row.dim(0) == n,
                  "add_row: row " + shape_string(row.shape()) + " vs " + shape_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  auto r = row.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += r[j];
  return Value::from_op(a.shape(), std::move(out), {a, row}, [m, n](const detail::Node& nd) {
    if (double* g = detail::parent_grad(nd, 0)) {
      for (std::size_t i = 0; i < nd.grad.size(); ++i) g[i] += nd.grad[i];
    }
    if (double* g = detail::parent_grad(nd, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += nd.grad[i * n + j];
    }
  });
}

/// Vectors u [m], v [n] -> [m x n] with out(i, j) = u(i) + v(j).
inline Value outer_add(const Value& u, const Value& v) {
  detail::require_rank(u, 1, "outer_add");
  detail::require_rank(v, 1, "outer_add");
  const std::size_t m = u.dim(0);
  const std::size_t n = v.dim(0);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = u.data()[i] + v.data()[j];
  return Value::from_op({m, n}, std::move(out), {u, v}, [m, n](const detail::Node& nd) {
    double* gu = detail::parent_grad(nd, 0);
    double* gv = detail::parent_grad(nd, 1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double g = nd.grad[i * n + j];
        if (gu) gu[i] += g;
        if (gv) gv[j] += g;
      }
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

inline Value sum(const Value& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Value::from_op({1}, {total}, {a}, [](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) {
      const std::size_t len = n.parents[0]->data.size();
      for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[0];
    }
  });
}

inline Value mean(const Value& a) {
  if (a.size() == 0) throw Error(ErrorKind::empty_input, "mean of an empty value");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

/// [l x c] -> [c], averaging over the rows.
inline Value mean_rows(const Value& a) {
  detail::require_rank(a, 2, "mean_rows");
  const std::size_t l = a.dim(0);
  const std::size_t c = a.dim(1);
  if (l == 0) throw Error(ErrorKind::empty_input, "mean_rows over zero rows");
  std::vector<double> out(c, 0.0);
  auto x = a.data();
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
  const double inv = 1.0 / static_cast<double>(l);
  for (double& v : out) v *= inv;
  return Value::from_op({c}, std::move(out), {a}, [l, c, inv](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) {
      for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += inv * n.grad[j];
    }
  });
}

/// Element `index` of a rank-1 value, as a scalar.
inline Value pick(const Value& a, std::size_t index) {
  detail::require_rank(a, 1, "pick");
  detail::require(index < a.dim(0), "pick: index out of range");
  return Value::from_op({1}, {a.data()[index]}, {a}, [index](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) g[index] += n.grad[0];
  });
}

inline Value reshape(const Value& a, Shape shape) {
  detail::require(shape_size(shape) == a.size(), "reshape: size mismatch " +
                                                     shape_string(a.shape()) + " -> " +
                                                     shape_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return Value::from_op(std::move(shape), std::move(out), {a}, [](const detail::Node& n) {
    if (double* g = detail::parent_grad(n, 0)) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  });
}

/// Columns [begin, end) of a matrix.
inline Value slice_cols(const Value& a, std::size_t begin, std::size_t end) {
  detail::require_rank(a, 2, "slice_cols");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  detail::require(begin < end && end <= n, "slice_cols: bad column range");
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i * n + begin), w,
                out.begin() + static_cast<std::ptrdiff_t>(i * w));
  return Value::from_op({m, w}, std::move(out), {a}, [m, n, w, begin](const detail::Node& nd) {
    if (double* g = detail::parent_grad(nd, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += nd.grad[i * w + j];
    }
  });
}

/// Concatenates matrices with equal row counts along the column axis.
inline Value concat_cols(const std::vector<Value>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank(p, 2, "concat_cols");
    detail::require(p.dim(0) == m, "concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto x = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + offset + j] = x[i * widths[k] + j];
    offset += widths[k];
  }
  return Value::from_op({m, total}, std::move(out), parts,
                        [m, total, widths](const detail::Node& nd) {
                          std::size_t offset = 0;
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            if (double* g = detail::parent_grad(nd, k)) {
                              for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < widths[k]; ++j)
                                  g[i * widths[k] + j] += nd.grad[i * total + offset + j];
                            }
                            offset += widths[k];
                          }
                        });
}

/// Rows [begin, end) of a matrix.
inline Value slice_rows(const Value& a, std::size_t begin, std::size_t end) {
  detail::require_rank(a, 2, "slice_rows");
  const std::size_t n = a.dim(1);
  detail::require(begin < end && end <= a.dim(0), "slice_rows: bad row range");
  const auto first = a.data().begin() + static_cast<std::ptrdiff_t>(begin * n);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>((end - begin) * n));
  return Value::from_op({end - begin, n}, std::move(out), {a}, [begin, n](const detail::Node& nd) {
    if (double* g = detail::parent_grad(nd, 0)) {
      for (std::size_t i = 0; i < nd.grad.size(); ++i) g[begin * n + i] += nd.grad[i];
    }
  });
}

/// Stacks matrices with equal column counts along the row axis.
inline Value concat_rows(const std::vector<Value>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t n = parts[0].dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    detail::require_rank(p, 2, "concat_rows");
    detail::require(p.dim(1) == n, "concat_rows: column count mismatch");
    rows += p.dim(0);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Value::from_op({rows, n}, std::move(out), parts, [](const detail::Node& nd) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < nd.parents.size(); ++k) {
      const std::size_t count = nd.parents[k]->data.size();
      if (double* g = detail::parent_grad(nd, k)) {
        for (std::size_t i = 0; i < count; ++i) g[i] += nd.grad[offset + i];
      }
      offset += count;
    }
  });
}

/// Concatenates rank-1 values.
inline Value concat(const std::vector<Value>& parts) {
  std::vector<Value> rows;
  rows.reserve(parts.size());
  for (const auto& p : parts) {
    detail::require_rank(p, 1, "concat");
    rows.push_back(reshape(p, {1, p.dim(0)}));
  }
  Value joined = concat_cols(rows);
  return reshape(joined, {joined.dim(1)});
}

inline Value transpose(const Value& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0);
  const std::size_t n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  return Value::from_op({n, m}, std::move(out), {a}, [m, n](const detail::Node& nd) {
    if (double* g = detail::parent_grad(nd, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += nd.grad[j * m + i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

// C[M x N] += A[M x K] * B[K x N], all row-major and dense.
inline void gemm_accumulate(std::size_t M, std::size_t N, std::size_t K, const double* A,
                            const double* B, double* C) {
  if (M == 0 || N == 0 || K == 0) return;
  const auto m = static_cast<Eigen::Index>(M);
  const auto n = static_cast<Eigen::Index>(N);
  const auto k = static_cast<Eigen::Index>(K);
  MatrixMap(C, m, n).noalias() += ConstMatrixMap(A, m, k) * ConstMatrixMap(B, k, n);
}

inline std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

}  // namespace detail

/// [m x k] * [k x n] -> [m x n]
inline Value matmul(const Value& a, const Value& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  detail::require(b.dim(0) == k, "matmul: inner dimension mismatch " + shape_string(a.shape()) +
                                     " * " + shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  detail::gemm_accumulate(m, n, k, a.data().data(), b.data().data(), out.data());
  return Value::from_op({m, n}, std::move(out), {a, b}, [m, k, n](const detail::Node& nd) {
    using detail::ConstMatrixMap;
    using detail::MatrixMap;
    const auto M = static_cast<Eigen::Index>(m);
    const auto K = static_cast<Eigen::Index>(k);
    const auto N = static_cast<Eigen::Index>(n);
    ConstMatrixMap g(nd.grad.data(), M, N);
    if (double* ga = detail::parent_grad(nd, 0)) {
      MatrixMap(ga, M, K).noalias() += g * ConstMatrixMap(detail::parent_data(nd, 1), K, N).transpose();
    }
    if (double* gb = detail::parent_grad(nd, 1)) {
      MatrixMap(gb, K, N).noalias() += ConstMatrixMap(detail::parent_data(nd, 0), M, K).transpose() * g;
    }
  });
}

/// Fully connected layer: x [N x in] or [in], weight [out x in], optional bias [out].
inline Value linear(const Value& x, const Value& weight, const Value& bias = Value()) {
  detail::require_rank(weight, 2, "linear");
  const bool vector_input = x.rank() == 1;
  auto [rows, in] = detail::as_matrix(x);
  const std::size_t out_dim = weight.dim(0);
  detail::require(weight.dim(1) == in, "linear: input width " + std::to_string(in) +
                                           " vs weight " + shape_string(weight.shape()));
  if (bias.defined()) {
    detail::require(bias.rank() == 1 && bias.dim(0) == out_dim, "linear: bias shape mismatch");
  }
  using detail::ConstMatrixMap;
  using detail::MatrixMap;
  const auto R = static_cast<Eigen::Index>(rows);
  const auto I = static_cast<Eigen::Index>(in);
  const auto O = static_cast<Eigen::Index>(out_dim);
  std::vector<double> out(rows * out_dim, 0.0);
  MatrixMap y(out.data(), R, O);
  y.noalias() = ConstMatrixMap(x.data().data(), R, I) * ConstMatrixMap(weight.data().data(), O, I).transpose();
  if (bias.defined()) {
    auto b = bias.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < out_dim; ++o) out[r * out_dim + o] += b[o];
  }
  Shape shape = vector_input ? Shape{out_dim} : Shape{rows, out_dim};
  std::vector<Value> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return Value::from_op(std::move(shape), std::move(out), std::move(parents),
                        [R, I, O, has_bias](const detail::Node& nd) {
                          ConstMatrixMap g(nd.grad.data(), R, O);
                          if (double* gx = detail::parent_grad(nd, 0)) {
                            MatrixMap(gx, R, I).noalias() += g * ConstMatrixMap(detail::parent_data(nd, 1), O, I);
                          }
                          if (double* gw = detail::parent_grad(nd, 1)) {
                            MatrixMap(gw, O, I).noalias() +=
                                g.transpose() * ConstMatrixMap(detail::parent_data(nd, 0), R, I);
                          }
                          if (has_bias) {
                            if (double* gb = detail::parent_grad(nd, 2)) {
                              for (Eigen::Index r = 0; r < R; ++r)
                                for (Eigen::Index o = 0; o < O; ++o) gb[o] += g(r, o);
                            }
                          }
                        });
}

inline std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                        std::size_t padding) {
  return (length + 2 * padding - kernel) / stride + 1;
}

/// 1-D convolution over time. input [T x Cin], kernel [Cout x Cin x K] -> [T' x Cout]
/// with T' = floor((T + 2*padding - K) / stride) + 1. Zero padding, no bias.
inline Value conv1d(const Value& input, const Value& kernel, std::size_t stride,
                    std::size_t padding) {
  detail::require_rank(input, 2, "conv1d");
  detail::require_rank(kernel, 3, "conv1d");
  const std::size_t T = input.dim(0);
  const std::size_t cin = input.dim(1);
  const std::size_t cout = kernel.dim(0);
  const std::size_t K = kernel.dim(2);
  detail::require(kernel.dim(1) == cin, "conv1d: input channels " + std::to_string(cin) +
                                            " vs kernel " + shape_string(kernel.shape()));
  detail::require(stride == 1 || stride == 2, "conv1d: stride must be 1 or 2");
  detail::require(K >= 1 && K <= T + 2 * padding, "conv1d: kernel longer than padded input");
  const std::size_t out_len = conv1d_output_length(T, K, stride, padding);
  const std::size_t width = K * cin;

  // Unfolded input: row t holds the K input rows feeding output t (zeros
  // where the window hangs over the padding).
  std::vector<double> cols(out_len * width, 0.0);
  auto x = input.data();
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t k = 0; k < K; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                 static_cast<std::ptrdiff_t>(padding);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
      std::copy_n(x.data() + static_cast<std::size_t>(src) * cin, cin, cols.data() + t * width + k * cin);
    }

  // Kernel as a [(K*Cin) x Cout] matrix matching the unfolded rows.
  std::vector<double> wmat(width * cout);
  auto w = kernel.data();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t k = 0; k < K; ++k) wmat[(k * cin + i) * cout + o] = w[(o * cin + i) * K + k];

  std::vector<double> out(out_len * cout, 0.0);
  detail::gemm_accumulate(out_len, cout, width, cols.data(), wmat.data(), out.data());

  return Value::from_op(
      {out_len, cout}, std::move(out), {input, kernel},
      [T, cin, cout, K, stride, padding, out_len, width, cols = std::move(cols),
       wmat = std::move(wmat)](const detail::Node& nd) {
        const double* g = nd.grad.data();
        if (double* gx = detail::parent_grad(nd, 0)) {
          const std::vector<double> wmat_t = detail::transposed(wmat.data(), width, cout);
          std::vector<double> gcols(out_len * width, 0.0);
          detail::gemm_accumulate(out_len, width, cout, g, wmat_t.data(), gcols.data());
          for (std::size_t t = 0; t < out_len; ++t)
            for (std::size_t k = 0; k < K; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                         static_cast<std::ptrdiff_t>(padding);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
              double* dst = gx + static_cast<std::size_t>(src) * cin;
              const double* from = gcols.data() + t * width + k * cin;
              for (std::size_t i = 0; i < cin; ++i) dst[i] += from[i];
            }
        }
        if (double* gk = detail::parent_grad(nd, 1)) {
          const std::vector<double> cols_t = detail::transposed(cols.data(), out_len, width);
          std::vector<double> gw(width * cout, 0.0);
          detail::gemm_accumulate(width, cout, out_len, cols_t.data(), g, gw.data());
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < cin; ++i)
              for (std::size_t k = 0; k < K; ++k) gk[(o * cin + i) * K + k] += gw[(k * cin + i) * cout + o];
        }
      });
}

// ---------------------------------------------------------------------------
// Normalization, activations, regularization

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Batch normalization over the time axis of a [T x C] value. Train mode uses
/// the statistics of this input and folds them into `stats`; eval mode uses
/// the running statistics.
inline Value batch_norm1d(const Value& input, const Value& gamma, const Value& beta,
                          BatchNormStats& stats, Mode mode, double eps = 1e-5) {
  detail::require_rank(input, 2, "batch_norm1d");
  const std::size_t T = input.dim(0);
  const std::size_t C = input.dim(1);
  if (T == 0) throw Error(ErrorKind::empty_input, "batch_norm1d over zero time steps");
  if (!(eps > 0.0)) throw Error(ErrorKind::invalid_config, "batch_norm1d: eps must be positive");
  detail::require(gamma.rank() == 1 && gamma.dim(0) == C && beta.rank() == 1 && beta.dim(0) == C,
                  "batch_norm1d: affine parameters must be [C]");
  detail::require(stats.running_mean.size() == C && stats.running_var.size() == C,
                  "batch_norm1d: running statistics width mismatch");

  auto x = input.data();
  std::vector<double> mu(C, 0.0);
  std::vector<double> var(C, 0.0);
  if (mode == Mode::train) {
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) mu[c] += x[t * C + c];
    for (double& m : mu) m /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        const double d = x[t * C + c] - mu[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < C; ++c) {
      const double biased = var[c] / static_cast<double>(T);
      const double unbiased = T > 1 ? var[c] / static_cast<double>(T - 1) : biased;
      var[c] = biased;
      stats.running_mean[c] = (1.0 - stats.momentum) * stats.running_mean[c] + stats.momentum * mu[c];
      stats.running_var[c] = (1.0 - stats.momentum) * stats.running_var[c] + stats.momentum * unbiased;
    }
  } else {
    mu = stats.running_mean;
    var = stats.running_var;
  }

  std::vector<double> inv_std(C);
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  std::vector<double> xhat(T * C);
  std::vector<double> out(T * C);
  auto g = gamma.data();
  auto b = beta.data();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = t * C + c;
      xhat[i] = (x[i] - mu[c]) * inv_std[c];
      out[i] = g[c] * xhat[i] + b[c];
    }

  const bool batch_stats = mode == Mode::train;
  return Value::from_op(
      {T, C}, std::move(out), {input, gamma, beta},
      [T, C, batch_stats, inv_std = std::move(inv_std), xhat = std::move(xhat)](const detail::Node& nd) {
        const double* gam = detail::parent_data(nd, 1);
        const double* go = nd.grad.data();
        if (double* gg = detail::parent_grad(nd, 1)) {
          for (std::size_t i = 0; i < T * C; ++i) gg[i % C] += go[i] * xhat[i];
        }
        if (double* gb = detail::parent_grad(nd, 2)) {
          for (std::size_t i = 0; i < T * C; ++i) gb[i % C] += go[i];
        }
        double* gx = detail::parent_grad(nd, 0);
        if (!gx) return;
        if (!batch_stats) {
          for (std::size_t i = 0; i < T * C; ++i) gx[i] += go[i] * gam[i % C] * inv_std[i % C];
          return;
        }
        std::vector<double> sum_d(C, 0.0);
        std::vector<double> sum_dx(C, 0.0);
        for (std::size_t i = 0; i < T * C; ++i) {
          const double d = go[i] * gam[i % C];
          sum_d[i % C] += d;
          sum_dx[i % C] += d * xhat[i];
        }
        const double inv_T = 1.0 / static_cast<double>(T);
        for (std::size_t i = 0; i < T * C; ++i) {
          const std::size_t c = i % C;
          const double d = go[i] * gam[c];
          gx[i] += inv_std[c] * (d - inv_T * sum_d[c] - xhat[i] * inv_T * sum_dx[c]);
        }
      });
}

/// PReLU with a single learnable slope ([1]) or one slope per channel along
/// the last axis ([C]). The gradient at exactly zero follows the positive branch.
inline Value prelu(const Value& input, const Value& slope) {
  detail::require(slope.rank() == 1, "prelu: slope must be rank 1");
  const std::size_t channels = input.shape().back();
  const std::size_t ns = slope.dim(0);
  detail::require(ns == 1 || ns == channels, "prelu: slope width mismatch");
  auto x = input.data();
  auto a = slope.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = a[ns == 1 ? 0 : i % channels];
    out[i] = x[i] >= 0.0 ? x[i] : s * x[i];
  }
  return Value::from_op(input.shape(), std::move(out), {input, slope},
                        [ns, channels](const detail::Node& nd) {
                          const double* x = detail::parent_data(nd, 0);
                          const double* a = detail::parent_data(nd, 1);
                          double* gx = detail::parent_grad(nd, 0);
                          double* ga = detail::parent_grad(nd, 1);
                          for (std::size_t i = 0; i < nd.grad.size(); ++i) {
                            const std::size_t si = ns == 1 ? 0 : i % channels;
                            if (x[i] >= 0.0) {
                              if (gx) gx[i] += nd.grad[i];
                            } else {
                              if (gx) gx[i] += a[si] * nd.grad[i];
                              if (ga) ga[si] += x[i] * nd.grad[i];
                            }
                          }
                        });
}

inline Value leaky_relu(const Value& input, double negative_slope) {
  auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : negative_slope * x[i];
  return Value::from_op(input.shape(), std::move(out), {input},
                        [negative_slope](const detail::Node& nd) {
                          if (double* g = detail::parent_grad(nd, 0)) {
                            const double* x = detail::parent_data(nd, 0);
                            for (std::size_t i = 0; i < nd.grad.size(); ++i)
                              g[i] += (x[i] >= 0.0 ? 1.0 : negative_slope) * nd.grad[i];
                          }
                        });
}

/// Inverted dropout: survivors are scaled by 1/(1-p); identity in eval mode.
inline Value dropout(const Value& input, double p, Mode mode, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw Error(ErrorKind::invalid_probability, "dropout probability must be in [0, 1)");
  }
  if (mode == Mode::eval || p == 0.0) return input;
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  std::vector<double> mask(input.size());
  for (double& m : mask) m = keep(rng) ? factor : 0.0;
  return mul(input, Value::constant(input.shape(), std::move(mask)));
}

inline Value dropout(const Value& input, double p, Mode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return dropout(input, p, mode, rng);
}

// ---------------------------------------------------------------------------
// Softmax family, along the last axis

namespace detail {

inline std::size_t last_axis(const Value& v) {
  detail::require(v.rank() >= 1, "softmax: scalar input");
  return v.shape().back();
}

}  // namespace detail

inline Value softmax(const Value& input) {
  const std::size_t n = detail::last_axis(input);
  const std::size_t rows = input.size() / n;
  auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < n; ++j) yr[j] /= z;
  }
  return Value::from_op(input.shape(), std::move(out), {input}, [rows, n](const detail::Node& nd) {
    double* g = detail::parent_grad(nd, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = nd.data.data() + r * n;
      const double* go = nd.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += go[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (go[j] - dot);
    }
  });
}

inline Value log_softmax(const Value& input) {
  const std::size_t n = detail::last_axis(input);
  const std::size_t rows = input.size() / n;
  auto x = input.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * n;
    double* yr = out.data() + r * n;
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) yr[j] = xr[j] - lse;
  }
  return Value::from_op(input.shape(), std::move(out), {input}, [rows, n](const detail::Node& nd) {
    double* g = detail::parent_grad(nd, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = nd.data.data() + r * n;
      const double* go = nd.grad.data() + r * n;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += go[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += go[j] - std::exp(y[j]) * total;
    }
  });
}

/// Negative log-likelihood of class `target` under softmax(logits).
inline Value cross_entropy(const Value& logits, std::size_t target) {
  detail::require_rank(logits, 1, "cross_entropy");
  return neg(pick(log_softmax(logits), target));
}

}  // namespace airwrite
