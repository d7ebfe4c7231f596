#include "emu/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "emu/errors.hpp"

namespace emu {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

constexpr std::size_t kTileCols = 16;
constexpr std::size_t kDepthBlock = 256;

#if defined(__AVX512F__)

inline double madd(double acc, double a, double b) { return std::fma(a, b, acc); }

// C[rows, j:j+16] += A[rows, 0:depth] * B[0:depth, j:j+16] with the
// accumulators held in registers across the depth loop.
// Columns past `cols` are masked off, so the same kernel covers the tail.
template <std::size_t Rows>
inline void tile_kernel(const double* __restrict a, std::size_t lda, const double* __restrict b,
                        std::size_t ldb, double* __restrict c, std::size_t ldc, std::size_t depth,
                        std::size_t cols = kTileCols) {
  const __mmask8 mlo = cols >= 8 ? 0xFF : static_cast<__mmask8>((1u << cols) - 1u);
  const __mmask8 mhi = cols >= 16 ? 0xFF : cols <= 8 ? 0 : static_cast<__mmask8>((1u << (cols - 8)) - 1u);
  __m512d lo[Rows];
  __m512d hi[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    lo[r] = _mm512_maskz_loadu_pd(mlo, c + r * ldc);
    hi[r] = _mm512_maskz_loadu_pd(mhi, c + r * ldc + 8);
  }
  for (std::size_t p = 0; p < depth; ++p) {
    const __m512d b0 = _mm512_loadu_pd(b + p * ldb);
    const __m512d b1 = _mm512_loadu_pd(b + p * ldb + 8);
    for (std::size_t r = 0; r < Rows; ++r) {
      const __m512d av = _mm512_set1_pd(a[r * lda + p]);
      lo[r] = _mm512_fmadd_pd(av, b0, lo[r]);
      hi[r] = _mm512_fmadd_pd(av, b1, hi[r]);
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    _mm512_mask_storeu_pd(c + r * ldc, mlo, lo[r]);
    _mm512_mask_storeu_pd(c + r * ldc + 8, mhi, hi[r]);
  }
}

#else

inline double madd(double acc, double a, double b) { return acc + a * b; }

typedef double vec8 __attribute__((vector_size(64)));
typedef double vec8u __attribute__((vector_size(64), aligned(8), may_alias));

inline vec8 load8(const double* p) { return *reinterpret_cast<const vec8u*>(p); }

inline void store8(double* p, vec8 v) { *reinterpret_cast<vec8u*>(p) = v; }

template <std::size_t Rows>
inline void tile_kernel(const double* __restrict a, std::size_t lda, const double* __restrict b,
                        std::size_t ldb, double* __restrict c, std::size_t ldc, std::size_t depth) {
  vec8 lo[Rows];
  vec8 hi[Rows];
  for (std::size_t r = 0; r < Rows; ++r) {
    lo[r] = load8(c + r * ldc);
    hi[r] = load8(c + r * ldc + 8);
  }
  for (std::size_t p = 0; p < depth; ++p) {
    const vec8 b0 = load8(b + p * ldb);
    const vec8 b1 = load8(b + p * ldb + 8);
    for (std::size_t r = 0; r < Rows; ++r) {
      const double av = a[r * lda + p];
      lo[r] += av * b0;
      hi[r] += av * b1;
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    store8(c + r * ldc, lo[r]);
    store8(c + r * ldc + 8, hi[r]);
  }
}

#endif


// Strided view of a matrix operand, so transposes need no copy.
struct Operand {
  const double* data;
  std::size_t row_stride;
  std::size_t col_stride;
  double at(std::size_t r, std::size_t c) const { return data[r * row_stride + c * col_stride]; }
};

// C (n x m, row-major) += A (n x k) * B (k x m). For every output element the
// depth index is visited in ascending order regardless of blocking, and every
// step is the same madd, fused where the target has AVX-512.
void gemm_accumulate(Operand a, Operand b, double* c, std::size_t n, std::size_t k,
                     std::size_t m) {
  constexpr std::size_t kRowBlock = 8;
#if defined(__AVX512F__)
  const std::size_t tiled = m;
#else
  const std::size_t tiled = m / kTileCols * kTileCols;
#endif
  const std::size_t n_tiles = (tiled + kTileCols - 1) / kTileCols;
  // B block packed as n_tiles panels of kDepthBlock x kTileCols, A block as
  // kRowBlock x kDepthBlock, both contiguous.
  thread_local std::vector<double> bpack;
  thread_local std::vector<double> apack;
  bpack.resize(n_tiles * kDepthBlock * kTileCols);
  apack.resize(kRowBlock * kDepthBlock);
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t kn = std::min(kDepthBlock, k - k0);
    for (std::size_t t = 0; t < n_tiles; ++t) {
      const std::size_t j = t * kTileCols;
      const std::size_t w = std::min(kTileCols, m - j);
      double* panel = bpack.data() + t * kDepthBlock * kTileCols;
      for (std::size_t p = 0; p < kn; ++p) {
        double* dst = panel + p * kTileCols;
        if (b.col_stride == 1) {
          const double* src = b.data + (k0 + p) * b.row_stride + j;
          std::copy(src, src + w, dst);
        } else {
          for (std::size_t jj = 0; jj < w; ++jj) dst[jj] = b.at(k0 + p, j + jj);
        }
        std::fill(dst + w, dst + kTileCols, 0.0);
      }
    }
    for (std::size_t i0 = 0; i0 < n; i0 += kRowBlock) {
      const std::size_t rows = std::min(kRowBlock, n - i0);
      if (a.col_stride == 1) {
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = a.data + (i0 + r) * a.row_stride + k0;
          std::copy(src, src + kn, apack.data() + r * kn);
        }
      } else {
        for (std::size_t p = 0; p < kn; ++p) {
          for (std::size_t r = 0; r < rows; ++r) apack[r * kn + p] = a.at(i0 + r, k0 + p);
        }
      }
      for (std::size_t t = 0; t < n_tiles; ++t) {
        const std::size_t j = t * kTileCols;
        const double* bp = bpack.data() + t * kDepthBlock * kTileCols;
        double* cp = c + i0 * m + j;
#if defined(__AVX512F__)
        const std::size_t w = std::min(kTileCols, m - j);
        std::size_t r = 0;
        if (rows == 8) {
          tile_kernel<8>(apack.data(), kn, bp, kTileCols, cp, m, kn, w);
          r = 8;
        }
        for (; r + 4 <= rows; r += 4) tile_kernel<4>(apack.data() + r * kn, kn, bp, kTileCols, cp + r * m, m, kn, w);
        for (; r < rows; ++r) tile_kernel<1>(apack.data() + r * kn, kn, bp, kTileCols, cp + r * m, m, kn, w);
#else
        std::size_t r = 0;
        for (; r + 4 <= rows; r += 4) tile_kernel<4>(apack.data() + r * kn, kn, bp, kTileCols, cp + r * m, m, kn);
        for (; r < rows; ++r) tile_kernel<1>(apack.data() + r * kn, kn, bp, kTileCols, cp + r * m, m, kn);
#endif
      }
      if (tiled != m) {
        for (std::size_t r = 0; r < rows; ++r) {
          double* crow = c + (i0 + r) * m;
          for (std::size_t p = 0; p < kn; ++p) {
            const double av = apack[r * kn + p];
            for (std::size_t jj = tiled; jj < m; ++jj) crow[jj] = madd(crow[jj], av, b.at(k0 + p, jj));
          }
        }
      }
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidArgument("Matrix: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + ")");
  }
  Matrix c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  gemm_accumulate({a.data().data(), a.cols(), 1}, {b.data().data(), b.cols(), 1}, c.data().data(),
                  a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw InvalidArgument("matmul_tn: row counts differ (" + std::to_string(a.rows()) + " vs " +
                          std::to_string(b.rows()) + ")");
  }
  Matrix c(a.cols(), b.cols());
  if (c.empty() || a.rows() == 0) return c;
  gemm_accumulate({a.data().data(), 1, a.cols()}, {b.data().data(), b.cols(), 1}, c.data().data(),
                  a.cols(), a.rows(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InvalidArgument("matmul_nt: column counts differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.cols()) + ")");
  }
  Matrix c(a.rows(), b.rows());
  if (c.empty() || a.cols() == 0) return c;
  gemm_accumulate({a.data().data(), a.cols(), 1}, {b.data().data(), 1, b.cols()}, c.data().data(),
                  a.rows(), a.cols(), b.rows());
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kBlock) {
      const std::size_t i1 = std::min(a.rows(), i0 + kBlock);
      const std::size_t j1 = std::min(a.cols(), j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
    }
  }
  return t;
}

Matrix add_row_vector(const Matrix& a, const Matrix& bias) {
  Matrix out = a;
  add_row_vector_inplace(out, bias);
  return out;
}

void add_row_vector_inplace(Matrix& a, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw InvalidArgument("add_row_vector: bias must be 1x" + std::to_string(a.cols()));
  }
  const auto b = bias.data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
}

Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  auto out = s.data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
  return s;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  add_inplace(out, b);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Matrix scale(const Matrix& a, double factor) {
  Matrix out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  auto o = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
  require_same_shape(y, x, "axpy");
  auto o = y.data();
  const auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += alpha * xd[i];
}

Matrix concat_columns(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("concat_columns: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

Matrix slice_columns(const Matrix& a, std::size_t first, std::size_t count) {
  if (first + count > a.cols()) throw InvalidArgument("slice_columns: range out of bounds");
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto src = a.row(i).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.rows()) throw InvalidArgument("gather_rows: index out of range");
    const auto src = a.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

double sum_of_squares(const Matrix& a) noexcept {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

}  // namespace emu
