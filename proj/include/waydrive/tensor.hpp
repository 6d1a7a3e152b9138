#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace waydrive {

class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void shape_fail(const char* op, int ar, int ac, int br, int bc) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s: incompatible shapes %dx%d and %dx%d", op, ar, ac, br, bc);
  throw ShapeError(buf);
}

/// Dense row-major matrix of doubles. The one value type every numeric
/// routine in the project works on; autodiff lives in tape.hpp.
class Tensor2 {
 public:
  bool requires_grad = false;

  Tensor2() = default;
  Tensor2(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw ShapeError("Tensor2: negative dimension");
  }

  static Tensor2 identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor2 t(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c) throw ShapeError("from_rows: ragged rows");
      int j = 0;
      for (double v : row) t.at(i, j++) = v;
      ++i;
    }
    return t;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  double scalar() const {
    if (rows_ != 1 || cols_ != 1) throw ShapeError("scalar(): tensor is not 1x1");
    return data_[0];
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// ---- matmul kernels ------------------------------------------------------
// out += a * b            (m x k)(k x n)
inline void mm_nn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = out.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// out += a * b^T          (m x k)(n x k)
inline void mm_nt_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = out.row(i);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] += s;
    }
  }
}

// out += a^T * b          (k x m)(k x n)
inline void mm_tn_acc(const Tensor2& a, const Tensor2& b, Tensor2& out) {
  const int m = a.cols(), k = a.rows(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const double* arow = a.row(p);
    const double* brow = b.row(p);
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = out.row(i);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out(a.rows(), b.cols());
  mm_nn_acc(a, b, out);
  return out;
}

inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out(a.rows(), b.rows());
  mm_nt_acc(a, b, out);
  return out;
}

inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) shape_fail("matmul_tn", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out(a.cols(), b.cols());
  mm_tn_acc(a, b, out);
  return out;
}

inline Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

// ---- elementwise ---------------------------------------------------------
inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) shape_fail("add", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] += b.raw()[i];
  return out;
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) shape_fail("sub", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] -= b.raw()[i];
  return out;
}

inline Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) shape_fail("hadamard", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2 out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] *= b.raw()[i];
  return out;
}

/// Elementwise k*x + c.
inline Tensor2 affine(const Tensor2& a, double k, double c) {
  Tensor2 out = a;
  for (double& v : out.raw()) v = k * v + c;
  return out;
}

/// Adds a 1 x cols bias row to every row of a.
inline Tensor2 add_bias(const Tensor2& a, const Tensor2& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    shape_fail("add_bias", a.rows(), a.cols(), bias.rows(), bias.cols());
  Tensor2 out = a;
  for (int i = 0; i < a.rows(); ++i) {
    double* r = out.row(i);
    const double* b = bias.row(0);
    for (int j = 0; j < a.cols(); ++j) r[j] += b[j];
  }
  return out;
}

// ---- row-structured ops --------------------------------------------------
inline Tensor2 softmax_rows(const Tensor2& x) {
  Tensor2 out(x.rows(), x.cols());
  const int n = x.cols();
  // separate passes so the exp loop vectorizes
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.row(i);
    double* o = out.row(i);
    double m = in[0];
    for (int j = 1; j < n; ++j) m = std::max(m, in[j]);
    for (int j = 0; j < n; ++j) o[j] = std::exp(in[j] - m);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += o[j];
    const double inv = 1.0 / z;
    for (int j = 0; j < n; ++j) o[j] *= inv;
  }
  return out;
}

constexpr double kLayerNormEps = 1e-5;

/// Per-row layer normalization with learned gain/bias (1 x cols each).
/// mean_out/rstd_out (length rows) are optional caches for the backward pass.
inline Tensor2 layer_norm_rows(const Tensor2& x, const Tensor2& gain, const Tensor2& bias,
                               std::vector<double>* mean_out = nullptr,
                               std::vector<double>* rstd_out = nullptr) {
  if (gain.rows() != 1 || gain.cols() != x.cols())
    shape_fail("layer_norm gain", x.rows(), x.cols(), gain.rows(), gain.cols());
  if (bias.rows() != 1 || bias.cols() != x.cols())
    shape_fail("layer_norm bias", x.rows(), x.cols(), bias.rows(), bias.cols());
  Tensor2 out(x.rows(), x.cols());
  if (mean_out) mean_out->resize(x.rows());
  if (rstd_out) rstd_out->resize(x.rows());
  const int n = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const double* in = x.row(i);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += in[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = in[j] - mean;
      var += d * d;
    }
    var /= n;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    double* o = out.row(i);
    const double* g = gain.row(0);
    const double* b = bias.row(0);
    for (int j = 0; j < n; ++j) o[j] = (in[j] - mean) * rstd * g[j] + b[j];
    if (mean_out) (*mean_out)[i] = mean;
    if (rstd_out) (*rstd_out)[i] = rstd;
  }
  return out;
}

// ---- nonlinearities ------------------------------------------------------
inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
inline double gelu_deriv(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}
inline double sigmoid_scalar(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

template <class F>
inline Tensor2 map_elems(const Tensor2& a, F f) {
  Tensor2 out = a;
  for (double& v : out.raw()) v = f(v);
  return out;
}

// ---- reductions / assembly -----------------------------------------------
inline Tensor2 sum_all(const Tensor2& a) {
  Tensor2 out(1, 1);
  double s = 0.0;
  for (double v : a.raw()) s += v;
  out.at(0, 0) = s;
  return out;
}

inline Tensor2 mean_rows(const Tensor2& a) {
  Tensor2 out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(0, j) += a.at(i, j);
  const double inv = a.rows() > 0 ? 1.0 / a.rows() : 0.0;
  for (double& v : out.raw()) v *= inv;
  return out;
}

inline Tensor2 concat_rows(const std::vector<Tensor2>& parts) {
  if (parts.empty()) return {};
  const int c = parts[0].cols();
  int r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) shape_fail("concat_rows", p.rows(), p.cols(), r, c);
    r += p.rows();
  }
  Tensor2 out(r, c);
  int at = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < c; ++j) out.at(at + i, j) = p.at(i, j);
    at += p.rows();
  }
  return out;
}

inline Tensor2 slice_rows(const Tensor2& a, int r0, int r1) {
  if (r0 < 0 || r1 > a.rows() || r0 > r1) throw ShapeError("slice_rows: range out of bounds");
  Tensor2 out(r1 - r0, a.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(i - r0, j) = a.at(i, j);
  return out;
}

inline Tensor2 slice_cols(const Tensor2& a, int c0, int c1) {
  if (c0 < 0 || c1 > a.cols() || c0 > c1) throw ShapeError("slice_cols: range out of bounds");
  Tensor2 out(a.rows(), c1 - c0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.at(i, j);
  return out;
}

inline Tensor2 concat_cols(const std::vector<Tensor2>& parts) {
  if (parts.empty()) return {};
  const int r = parts[0].rows();
  int c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) shape_fail("concat_cols", p.rows(), p.cols(), r, c);
    c += p.cols();
  }
  Tensor2 out(r, c);
  int at = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < p.cols(); ++j) out.at(i, at + j) = p.at(i, j);
    at += p.cols();
  }
  return out;
}

// ---- deterministic RNG ----------------------------------------------------
// splitmix64; used everywhere instead of <random> distributions so that
// results are reproducible byte-for-byte across standard libraries.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // warm up so that small seeds decorrelate
    for (int i = 0; i < 4; ++i) splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Independent stream for a sub-task; stable under call-order changes.
  Rng fork(uint64_t stream) const {
    uint64_t s = state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(s);
  }

 private:
  uint64_t state_;
};

inline Tensor2 random_normal(Rng& rng, int rows, int cols, double stddev) {
  Tensor2 t(rows, cols);
  for (double& v : t.raw()) v = stddev * rng.normal();
  return t;
}

inline Tensor2 random_uniform(Rng& rng, int rows, int cols, double lo, double hi) {
  Tensor2 t(rows, cols);
  for (double& v : t.raw()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace waydrive
