#pragma once

#include <cmath>
#include <vector>

#include "waydrive/tensor.hpp"

namespace waydrive {

/// Single-precision matrix for the optional fast inference path. Training and
/// every verification oracle stay in double precision; this type never
/// appears on a tape.
class Tensor2f {
 public:
  Tensor2f() = default;
  Tensor2f(int rows, int cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  static Tensor2f from(const Tensor2& t) {
    Tensor2f out(t.rows(), t.cols());
    for (size_t i = 0; i < t.size(); ++i) out.data_[i] = static_cast<float>(t.raw()[i]);
    return out;
  }

  Tensor2 to_double() const {
    Tensor2 out(rows_, cols_);
    for (size_t i = 0; i < data_.size(); ++i) out.raw()[i] = static_cast<double>(data_[i]);
    return out;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  float& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  float at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  float* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const float* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<float> data_;
};

namespace fkern {

inline Tensor2f matmul(const Tensor2f& a, const Tensor2f& b) {
  if (a.cols() != b.rows()) shape_fail("matmul(f)", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2f out(a.rows(), b.cols());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    const float* arow = a.row(i);
    float* crow = out.row(i);
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

inline Tensor2f matmul_nt(const Tensor2f& a, const Tensor2f& b) {
  if (a.cols() != b.cols()) shape_fail("matmul_nt(f)", a.rows(), a.cols(), b.rows(), b.cols());
  Tensor2f out(a.rows(), b.rows());
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const float* arow = a.row(i);
    float* crow = out.row(i);
    for (int j = 0; j < n; ++j) {
      const float* brow = b.row(j);
      float s = 0.0f;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
  return out;
}

inline Tensor2f add(const Tensor2f& a, const Tensor2f& b) {
  Tensor2f out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] += b.raw()[i];
  return out;
}

inline Tensor2f sub(const Tensor2f& a, const Tensor2f& b) {
  Tensor2f out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] -= b.raw()[i];
  return out;
}

inline Tensor2f mul(const Tensor2f& a, const Tensor2f& b) {
  Tensor2f out = a;
  for (size_t i = 0; i < out.size(); ++i) out.raw()[i] *= b.raw()[i];
  return out;
}

inline Tensor2f affine(const Tensor2f& a, float k, float c) {
  Tensor2f out = a;
  for (float& v : out.raw()) v = k * v + c;
  return out;
}

inline Tensor2f add_bias(const Tensor2f& a, const Tensor2f& bias) {
  Tensor2f out = a;
  for (int i = 0; i < a.rows(); ++i) {
    float* r = out.row(i);
    const float* b = bias.row(0);
    for (int j = 0; j < a.cols(); ++j) r[j] += b[j];
  }
  return out;
}

inline Tensor2f softmax_rows(const Tensor2f& x) {
  Tensor2f out(x.rows(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const float* in = x.row(i);
    float* o = out.row(i);
    float m = in[0];
    for (int j = 1; j < n; ++j) m = std::max(m, in[j]);
    for (int j = 0; j < n; ++j) o[j] = std::exp(in[j] - m);
    float z = 0.0f;
    for (int j = 0; j < n; ++j) z += o[j];
    const float inv = 1.0f / z;
    for (int j = 0; j < n; ++j) o[j] *= inv;
  }
  return out;
}

inline Tensor2f layer_norm_rows(const Tensor2f& x, const Tensor2f& gain, const Tensor2f& bias) {
  Tensor2f out(x.rows(), x.cols());
  const int n = x.cols();
  for (int i = 0; i < x.rows(); ++i) {
    const float* in = x.row(i);
    float mean = 0.0f;
    for (int j = 0; j < n; ++j) mean += in[j];
    mean /= n;
    float var = 0.0f;
    for (int j = 0; j < n; ++j) {
      const float d = in[j] - mean;
      var += d * d;
    }
    var /= n;
    const float rstd = 1.0f / std::sqrt(var + static_cast<float>(kLayerNormEps));
    float* o = out.row(i);
    for (int j = 0; j < n; ++j)
      o[j] = (in[j] - mean) * rstd * gain.at(0, j) + bias.at(0, j);
  }
  return out;
}

template <class F>
inline Tensor2f map_elems(const Tensor2f& a, F f) {
  Tensor2f out = a;
  for (float& v : out.raw()) v = f(v);
  return out;
}

inline Tensor2f concat_rows(const std::vector<Tensor2f>& parts) {
  if (parts.empty()) return {};
  const int c = parts[0].cols();
  int r = 0;
  for (const auto& p : parts) r += p.rows();
  Tensor2f out(r, c);
  int at = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p.rows(); ++i)
      for (int j = 0; j < c; ++j) out.at(at + i, j) = p.at(i, j);
    at += p.rows();
  }
  return out;
}

inline Tensor2f slice_rows(const Tensor2f& a, int r0, int r1) {
  Tensor2f out(r1 - r0, a.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(i - r0, j) = a.at(i, j);
  return out;
}

inline Tensor2f concat_cols(const std::vector<Tensor2f>& parts) {
  if (parts.empty()) return {};
  const int r = parts[0].rows();
  int c = 0;
  for (const auto& p : parts) c += p.cols();
  Tensor2f out(r, c);
  int at = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < p.cols(); ++j) out.at(i, at + j) = p.at(i, j);
    at += p.cols();
  }
  return out;
}

inline Tensor2f slice_cols(const Tensor2f& a, int c0, int c1) {
  Tensor2f out(a.rows(), c1 - c0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.at(i, j);
  return out;
}

inline Tensor2f mean_rows(const Tensor2f& a) {
  Tensor2f out(1, a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.at(0, j) += a.at(i, j);
  const float inv = a.rows() > 0 ? 1.0f / a.rows() : 0.0f;
  for (float& v : out.raw()) v *= inv;
  return out;
}

inline Tensor2f sum_all(const Tensor2f& a) {
  Tensor2f out(1, 1);
  float s = 0.0f;
  for (float v : a.raw()) s += v;
  out.at(0, 0) = s;
  return out;
}

}  // namespace fkern

}  // namespace waydrive
