#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "waydrive/tape.hpp"
#include "waydrive/tensorf.hpp"

namespace waydrive {

// Model code is written once against a context type and runs either recorded
// on a tape (training, gradient checks) or directly on values (inference).
// Both paths share the same kernels, so they cannot drift apart.

struct TapeCtx {
  Tape* tape;
  using V = Tape::Id;
  using Scal = Scalar;

  V param(Parameter& p) { return tape->param(p); }
  V constant(Tensor2 t) { return tape->constant(std::move(t)); }
  const Tensor2& val(V v) const { return tape->val(v); }
  Scal to_scal(V one_by_one) { return Scalar(*tape, one_by_one); }
  V from_scal(Scal s) const { return s.id; }
  Scal scal_const(double v) { return Scalar(*tape, v); }
  Tensor2 to_double(V v) const { return tape->val(v); }

  V matmul(V a, V b) { return tape->matmul(a, b); }
  V matmul_nt(V a, V b) { return tape->matmul_nt(a, b); }
  V add(V a, V b) { return tape->add(a, b); }
  V sub(V a, V b) { return tape->sub(a, b); }
  V mul(V a, V b) { return tape->mul(a, b); }
  V affine(V a, double k, double c) { return tape->affine(a, k, c); }
  V add_bias(V a, V b) { return tape->add_bias(a, b); }
  V softmax_rows(V a) { return tape->softmax_rows(a); }
  V layer_norm(V x, V g, V b) { return tape->layer_norm(x, g, b); }
  V gelu(V a) { return tape->gelu(a); }
  V tanh(V a) { return tape->tanh_(a); }
  V sigmoid(V a) { return tape->sigmoid_(a); }
  V concat_rows(const std::vector<V>& p) { return tape->concat_rows(p); }
  V slice_rows(V a, int r0, int r1) { return tape->slice_rows(a, r0, r1); }
  V concat_cols(const std::vector<V>& p) { return tape->concat_cols(p); }
  V slice_cols(V a, int c0, int c1) { return tape->slice_cols(a, c0, c1); }
  V gather_rows(V a, std::vector<int> idx) { return tape->gather_rows(a, std::move(idx)); }
  V regroup_rows(V a, int group) { return tape->regroup_rows(a, group); }
  V mean_rows(V a) { return tape->mean_rows(a); }
  V sum_all(V a) { return tape->sum_all(a); }
};

struct EvalCtx {
  using V = Tensor2;
  using Scal = double;

  V param(Parameter& p) { return p.value; }
  V constant(Tensor2 t) { return t; }
  const Tensor2& val(const V& v) const { return v; }
  Scal to_scal(const V& one_by_one) const { return one_by_one.at(0, 0); }
  V from_scal(Scal s) const {
    Tensor2 t(1, 1);
    t.at(0, 0) = s;
    return t;
  }
  Scal scal_const(double v) const { return v; }
  Tensor2 to_double(const V& v) const { return v; }

  V matmul(const V& a, const V& b) { return waydrive::matmul(a, b); }
  V matmul_nt(const V& a, const V& b) { return waydrive::matmul_nt(a, b); }
  V add(const V& a, const V& b) { return waydrive::add(a, b); }
  V sub(const V& a, const V& b) { return waydrive::sub(a, b); }
  V mul(const V& a, const V& b) { return hadamard(a, b); }
  V affine(const V& a, double k, double c) { return waydrive::affine(a, k, c); }
  V add_bias(const V& a, const V& b) { return waydrive::add_bias(a, b); }
  V softmax_rows(const V& a) { return waydrive::softmax_rows(a); }
  V layer_norm(const V& x, const V& g, const V& b) { return layer_norm_rows(x, g, b); }
  V gelu(const V& a) { return map_elems(a, gelu_scalar); }
  V tanh(const V& a) { return map_elems(a, [](double x) { return std::tanh(x); }); }
  V sigmoid(const V& a) { return map_elems(a, sigmoid_scalar); }
  V concat_rows(const std::vector<V>& p) { return waydrive::concat_rows(p); }
  V slice_rows(const V& a, int r0, int r1) { return waydrive::slice_rows(a, r0, r1); }
  V concat_cols(const std::vector<V>& p) { return waydrive::concat_cols(p); }
  V slice_cols(const V& a, int c0, int c1) { return waydrive::slice_cols(a, c0, c1); }
  V gather_rows(const V& a, const std::vector<int>& idx) {
    Tensor2 out(static_cast<int>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < a.cols(); ++j) out.at(static_cast<int>(i), j) = a.at(idx[i], j);
    return out;
  }
  V regroup_rows(const V& a, int group) {
    Tensor2 out(a.rows() / group, a.cols() * group);
    out.raw() = a.raw();
    return out;
  }
  V mean_rows(const V& a) { return waydrive::mean_rows(a); }
  V sum_all(const V& a) { return waydrive::sum_all(a); }
};

/// Single-precision inference context ("single precision optional for
/// inference"). Parameter casts are cached, so repeated forward passes pay
/// the conversion once. Never used for training or verification.
struct FloatCtx {
  using V = Tensor2f;

  std::unordered_map<const Parameter*, Tensor2f> cache;

  V param(Parameter& p) {
    auto it = cache.find(&p);
    if (it == cache.end()) it = cache.emplace(&p, Tensor2f::from(p.value)).first;
    return it->second;
  }
  V constant(Tensor2 t) { return Tensor2f::from(t); }
  const Tensor2f& val(const V& v) const { return v; }
  Tensor2 to_double(const V& v) const { return v.to_double(); }

  V matmul(const V& a, const V& b) { return fkern::matmul(a, b); }
  V matmul_nt(const V& a, const V& b) { return fkern::matmul_nt(a, b); }
  V add(const V& a, const V& b) { return fkern::add(a, b); }
  V sub(const V& a, const V& b) { return fkern::sub(a, b); }
  V mul(const V& a, const V& b) { return fkern::mul(a, b); }
  V affine(const V& a, double k, double c) {
    return fkern::affine(a, static_cast<float>(k), static_cast<float>(c));
  }
  V add_bias(const V& a, const V& b) { return fkern::add_bias(a, b); }
  V softmax_rows(const V& a) { return fkern::softmax_rows(a); }
  V layer_norm(const V& x, const V& g, const V& b) { return fkern::layer_norm_rows(x, g, b); }
  V gelu(const V& a) {
    return fkern::map_elems(a, [](float x) { return static_cast<float>(gelu_scalar(x)); });
  }
  V tanh(const V& a) {
    return fkern::map_elems(a, [](float x) { return std::tanh(x); });
  }
  V sigmoid(const V& a) {
    return fkern::map_elems(a, [](float x) { return static_cast<float>(sigmoid_scalar(x)); });
  }
  V concat_rows(const std::vector<V>& p) { return fkern::concat_rows(p); }
  V slice_rows(const V& a, int r0, int r1) { return fkern::slice_rows(a, r0, r1); }
  V concat_cols(const std::vector<V>& p) { return fkern::concat_cols(p); }
  V slice_cols(const V& a, int c0, int c1) { return fkern::slice_cols(a, c0, c1); }
  V gather_rows(const V& a, const std::vector<int>& idx) {
    Tensor2f out(static_cast<int>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < a.cols(); ++j) out.at(static_cast<int>(i), j) = a.at(idx[i], j);
    return out;
  }
  V regroup_rows(const V& a, int group) {
    Tensor2f out(a.rows() / group, a.cols() * group);
    out.raw() = a.raw();
    return out;
  }
  V mean_rows(const V& a) { return fkern::mean_rows(a); }
  V sum_all(const V& a) { return fkern::sum_all(a); }
};

// ---- parameter blocks --------------------------------------------------------
struct LinearParams {
  Parameter w, b;

  void init(Rng& rng, int in, int out, const std::string& name, bool trainable = true) {
    w = Parameter(name + ".w", random_normal(rng, in, out, 1.0 / std::sqrt(in)), trainable);
    b = Parameter(name + ".b", Tensor2(1, out), trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <class C>
typename C::V linear(C& ctx, LinearParams& p, typename C::V x) {
  return ctx.add_bias(ctx.matmul(x, ctx.param(p.w)), ctx.param(p.b));
}

struct LayerNormParams {
  Parameter gain, bias;

  void init(int d, const std::string& name, bool trainable = true) {
    gain = Parameter(name + ".gain", Tensor2(1, d, 1.0), trainable);
    bias = Parameter(name + ".bias", Tensor2(1, d), trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
};

template <class C>
typename C::V layer_norm(C& ctx, LayerNormParams& p, typename C::V x) {
  return ctx.layer_norm(x, ctx.param(p.gain), ctx.param(p.bias));
}

/// Multi-head scaled dot-product attention block with output projection.
struct MhaParams {
  LinearParams q, k, v, o;
  int heads = 4;
  int d = 0;

  void init(Rng& rng, int d_model, int n_heads, const std::string& name, bool trainable = true) {
    d = d_model;
    heads = n_heads;
    q.init(rng, d_model, d_model, name + ".q", trainable);
    k.init(rng, d_model, d_model, name + ".k", trainable);
    v.init(rng, d_model, d_model, name + ".v", trainable);
    o.init(rng, d_model, d_model, name + ".o", trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
  }
};

/// Runs attention with `q_in` as queries over `kv_in` keys/values. When
/// probs_out is given, it receives the head-averaged attention probabilities
/// (query rows x key rows) of this block.
template <class C>
typename C::V mha(C& ctx, MhaParams& p, typename C::V q_in, typename C::V kv_in,
                  Tensor2* probs_out = nullptr) {
  using V = typename C::V;
  V qp = linear(ctx, p.q, q_in);
  V kp = linear(ctx, p.k, kv_in);
  V vp = linear(ctx, p.v, kv_in);
  const int dh = p.d / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<V> head_outs;
  head_outs.reserve(p.heads);
  Tensor2 probs_avg;
  for (int h = 0; h < p.heads; ++h) {
    V qh = ctx.slice_cols(qp, h * dh, (h + 1) * dh);
    V kh = ctx.slice_cols(kp, h * dh, (h + 1) * dh);
    V vh = ctx.slice_cols(vp, h * dh, (h + 1) * dh);
    V logits = ctx.affine(ctx.matmul_nt(qh, kh), scale, 0.0);
    V probs = ctx.softmax_rows(logits);
    head_outs.push_back(ctx.matmul(probs, vh));
    if (probs_out) {
      Tensor2 pv = ctx.to_double(probs);
      if (h == 0) probs_avg = std::move(pv);
      else probs_avg = add(probs_avg, pv);
    }
  }
  if (probs_out) *probs_out = affine(probs_avg, 1.0 / p.heads, 0.0);
  return linear(ctx, p.o, ctx.concat_cols(head_outs));
}

struct MlpParams {
  LinearParams fc1, fc2;

  void init(Rng& rng, int d, int hidden, const std::string& name, bool trainable = true) {
    fc1.init(rng, d, hidden, name + ".fc1", trainable);
    fc2.init(rng, hidden, d, name + ".fc2", trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

template <class C>
typename C::V mlp_block(C& ctx, MlpParams& p, typename C::V x) {
  return linear(ctx, p.fc2, ctx.gelu(linear(ctx, p.fc1, x)));
}

/// Pre-norm transformer layer: x += Attn(LN(x)); x += MLP(LN(x)).
/// Zeroed projection weights leave the input untouched (pure residual path).
struct TransformerLayerParams {
  LayerNormParams ln1, ln2;
  MhaParams attn;
  MlpParams mlp;

  void init(Rng& rng, int d, int heads, int mlp_ratio, const std::string& name,
            bool trainable = true) {
    ln1.init(d, name + ".ln1", trainable);
    ln2.init(d, name + ".ln2", trainable);
    attn.init(rng, d, heads, name + ".attn", trainable);
    mlp.init(rng, d, d * mlp_ratio, name + ".mlp", trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    ln1.collect(out);
    ln2.collect(out);
    attn.collect(out);
    mlp.collect(out);
  }
};

template <class C>
typename C::V transformer_layer(C& ctx, TransformerLayerParams& p, typename C::V x) {
  typename C::V n = layer_norm(ctx, p.ln1, x);
  x = ctx.add(x, mha(ctx, p.attn, n, n));
  return ctx.add(x, mlp_block(ctx, p.mlp, layer_norm(ctx, p.ln2, x)));
}

/// Pre-norm cross-attention layer: queries refined against a fixed key/value
/// set. Separate norm for the key/value stream.
struct CrossLayerParams {
  LayerNormParams ln_q, ln_kv, ln2;
  MhaParams attn;
  MlpParams mlp;

  void init(Rng& rng, int d, int heads, int mlp_ratio, const std::string& name,
            bool trainable = true) {
    ln_q.init(d, name + ".ln_q", trainable);
    ln_kv.init(d, name + ".ln_kv", trainable);
    ln2.init(d, name + ".ln2", trainable);
    attn.init(rng, d, heads, name + ".attn", trainable);
    mlp.init(rng, d, d * mlp_ratio, name + ".mlp", trainable);
  }
  void collect(std::vector<Parameter*>& out) {
    ln_q.collect(out);
    ln_kv.collect(out);
    ln2.collect(out);
    attn.collect(out);
    mlp.collect(out);
  }
};

template <class C>
typename C::V cross_layer(C& ctx, CrossLayerParams& p, typename C::V q, typename C::V kv,
                          Tensor2* probs_out = nullptr) {
  q = ctx.add(q, mha(ctx, p.attn, layer_norm(ctx, p.ln_q, q), layer_norm(ctx, p.ln_kv, kv),
                     probs_out));
  return ctx.add(q, mlp_block(ctx, p.mlp, layer_norm(ctx, p.ln2, q)));
}

}  // namespace waydrive
