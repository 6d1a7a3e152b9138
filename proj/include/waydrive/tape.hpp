#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "waydrive/tensor.hpp"

namespace waydrive {

/// A named, persistent block of weights. Gradients accumulate here when a
/// tape that references the block is walked backward.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor2 v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

/// Reverse-mode tape. Every op computes its value eagerly and records a
/// closure that, replayed in exact reverse order of recording, accumulates
/// adjoints into its inputs. One tape per forward/backward pass; tapes are
/// never shared across threads.
class Tape {
 public:
  using Id = int32_t;

  /// When false, backward() leaves Parameter::grad untouched; adjoints are
  /// read per-tape via param_adjoint(). Lets concurrent tapes share one
  /// parameter set without racing on the shared grad buffers.
  bool params_accumulate = true;

  // ---- leaves ----
  Id constant(Tensor2 v) { return push(std::move(v), false, nullptr); }

  /// Tracks gradients iff v.requires_grad.
  Id input(const Tensor2& v) { return push(v, v.requires_grad, nullptr); }

  /// Leaf bound to a persistent parameter; repeated binds return the same node.
  Id param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    Id id = push(p.value, p.trainable, nullptr);
    if (p.trainable) {
      Parameter* pp = &p;
      nodes_[id].back = [id, pp](Tape& t) {
        if (!t.params_accumulate) return;
        Tensor2& g = pp->grad;
        const Tensor2& ng = t.nodes_[id].grad;
        for (size_t i = 0; i < g.size(); ++i) g.raw()[i] += ng.raw()[i];
      };
    }
    param_nodes_.emplace(&p, id);
    return id;
  }

  /// Adjoint accumulated on this tape for a bound trainable parameter;
  /// nullptr if the parameter never participated.
  const Tensor2* param_adjoint(const Parameter& p) const {
    auto it = param_nodes_.find(const_cast<Parameter*>(&p));
    if (it == param_nodes_.end() || !nodes_[it->second].needs) return nullptr;
    return &nodes_[it->second].grad;
  }

  const Tensor2& val(Id id) const { return nodes_[id].value; }
  const Tensor2& grad(Id id) const { return nodes_[id].grad; }
  size_t size() const { return nodes_.size(); }

  // ---- binary ops ----
  Id matmul(Id a, Id b) {
    Id id = push(waydrive::matmul(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        if (t.needs(a)) mm_nt_acc(t.nodes_[id].grad, t.val(b), t.nodes_[a].grad);
        if (t.needs(b)) mm_tn_acc(t.val(a), t.nodes_[id].grad, t.nodes_[b].grad);
      };
    return id;
  }

  /// a * b^T without materializing the transpose.
  Id matmul_nt(Id a, Id b) {
    Id id = push(waydrive::matmul_nt(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        if (t.needs(a)) mm_nn_acc(t.nodes_[id].grad, t.val(b), t.nodes_[a].grad);
        if (t.needs(b)) mm_tn_acc(t.nodes_[id].grad, t.val(a), t.nodes_[b].grad);
      };
    return id;
  }

  Id add(Id a, Id b) {
    Id id = push(waydrive::add(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        t.acc_raw(a, t.nodes_[id].grad, 1.0);
        t.acc_raw(b, t.nodes_[id].grad, 1.0);
      };
    return id;
  }

  Id sub(Id a, Id b) {
    Id id = push(waydrive::sub(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        t.acc_raw(a, t.nodes_[id].grad, 1.0);
        t.acc_raw(b, t.nodes_[id].grad, -1.0);
      };
    return id;
  }

  Id mul(Id a, Id b) {
    Id id = push(hadamard(val(a), val(b)), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        if (t.needs(a)) {
          Tensor2& ga = t.nodes_[a].grad;
          const auto& bv = t.val(b).raw();
          for (size_t i = 0; i < ga.size(); ++i) ga.raw()[i] += g.raw()[i] * bv[i];
        }
        if (t.needs(b)) {
          Tensor2& gb = t.nodes_[b].grad;
          const auto& av = t.val(a).raw();
          for (size_t i = 0; i < gb.size(); ++i) gb.raw()[i] += g.raw()[i] * av[i];
        }
      };
    return id;
  }

  Id div(Id a, Id b) {
    const Tensor2& bv = val(b);
    Tensor2 out = val(a);
    for (size_t i = 0; i < out.size(); ++i) out.raw()[i] /= bv.raw()[i];
    Id id = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, b](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        const auto& av = t.val(a).raw();
        const auto& br = t.val(b).raw();
        if (t.needs(a)) {
          Tensor2& ga = t.nodes_[a].grad;
          for (size_t i = 0; i < ga.size(); ++i) ga.raw()[i] += g.raw()[i] / br[i];
        }
        if (t.needs(b)) {
          Tensor2& gb = t.nodes_[b].grad;
          for (size_t i = 0; i < gb.size(); ++i) gb.raw()[i] -= g.raw()[i] * av[i] / (br[i] * br[i]);
        }
      };
    return id;
  }

  /// Elementwise k*x + c.
  Id affine(Id a, double k, double c) {
    Id id = push(waydrive::affine(val(a), k, c), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, k](Tape& t) { t.acc_raw(a, t.nodes_[id].grad, k); };
    return id;
  }

  Id add_bias(Id a, Id bias) {
    Id id = push(waydrive::add_bias(val(a), val(bias)), needs(a) || needs(bias), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, bias](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        t.acc_raw(a, g, 1.0);
        if (t.needs(bias)) {
          Tensor2& gb = t.nodes_[bias].grad;
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) gb.at(0, j) += g.at(i, j);
        }
      };
    return id;
  }

  // ---- row-structured ----
  Id softmax_rows(Id a) {
    Id id = push(waydrive::softmax_rows(val(a)), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a](Tape& t) {
        const Tensor2& y = t.val(id);
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        for (int i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
          for (int j = 0; j < y.cols(); ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
        }
      };
    return id;
  }

  Id layer_norm(Id x, Id gain, Id bias) {
    auto mean = std::make_shared<std::vector<double>>();
    auto rstd = std::make_shared<std::vector<double>>();
    Tensor2 out = layer_norm_rows(val(x), val(gain), val(bias), mean.get(), rstd.get());
    Id id = push(std::move(out), needs(x) || needs(gain) || needs(bias), nullptr);
    if (needs(id))
      nodes_[id].back = [id, x, gain, bias, mean, rstd](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        const Tensor2& xin = t.val(x);
        const Tensor2& gn = t.val(gain);
        const int n = xin.cols();
        for (int i = 0; i < xin.rows(); ++i) {
          const double mu = (*mean)[i], rs = (*rstd)[i];
          double sum_gy = 0.0, sum_gyx = 0.0;
          for (int j = 0; j < n; ++j) {
            const double xhat = (xin.at(i, j) - mu) * rs;
            const double gy = g.at(i, j) * gn.at(0, j);
            sum_gy += gy;
            sum_gyx += gy * xhat;
            if (t.needs(gain)) t.nodes_[gain].grad.at(0, j) += g.at(i, j) * xhat;
            if (t.needs(bias)) t.nodes_[bias].grad.at(0, j) += g.at(i, j);
          }
          if (t.needs(x)) {
            for (int j = 0; j < n; ++j) {
              const double xhat = (xin.at(i, j) - mu) * rs;
              const double gy = g.at(i, j) * gn.at(0, j);
              t.nodes_[x].grad.at(i, j) += rs * (gy - sum_gy / n - xhat * sum_gyx / n);
            }
          }
        }
      };
    return id;
  }

  // ---- elementwise nonlinearities ----
  Id gelu(Id a) { return unary(a, gelu_scalar, [](double x, double) { return gelu_deriv(x); }); }
  Id tanh_(Id a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
  }
  Id sigmoid_(Id a) {
    return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
  }
  Id relu(Id a) {
    return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
  }
  Id abs_(Id a) {
    return unary(a, [](double x) { return std::fabs(x); }, [](double x, double) { return x >= 0 ? 1.0 : -1.0; });
  }
  Id sin_(Id a) {
    return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
  }
  Id cos_(Id a) {
    return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
  }
  Id tan_(Id a) {
    return unary(a, [](double x) { return std::tan(x); },
                 [](double x, double) { const double c = std::cos(x); return 1.0 / (c * c); });
  }
  Id exp_(Id a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
  }
  Id sqrt_(Id a) {
    return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
  }
  /// sin(x)/x with the removable singularity handled.
  Id sinc(Id a) {
    return unary(a, sinc_scalar, [](double x, double) { return sinc_deriv(x); });
  }

  // ---- assembly / reductions ----
  Id transpose(Id a) {
    Id id = push(waydrive::transpose(val(a)), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
      };
    return id;
  }

  Id concat_rows(const std::vector<Id>& parts) {
    std::vector<Tensor2> vals;
    bool ng = false;
    for (Id p : parts) {
      vals.push_back(val(p));
      ng = ng || needs(p);
    }
    Id id = push(waydrive::concat_rows(vals), ng, nullptr);
    if (needs(id)) {
      std::vector<Id> ps = parts;
      nodes_[id].back = [id, ps](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        int at = 0;
        for (Id p : ps) {
          const int r = t.val(p).rows();
          if (t.needs(p)) {
            Tensor2& gp = t.nodes_[p].grad;
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < g.cols(); ++j) gp.at(i, j) += g.at(at + i, j);
          }
          at += r;
        }
      };
    }
    return id;
  }

  Id slice_rows(Id a, int r0, int r1) {
    Id id = push(waydrive::slice_rows(val(a), r0, r1), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, r0](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at(r0 + i, j) += g.at(i, j);
      };
    return id;
  }

  Id concat_cols(const std::vector<Id>& parts) {
    std::vector<Tensor2> vals;
    bool ng = false;
    for (Id p : parts) {
      vals.push_back(val(p));
      ng = ng || needs(p);
    }
    Id id = push(waydrive::concat_cols(vals), ng, nullptr);
    if (needs(id)) {
      std::vector<Id> ps = parts;
      nodes_[id].back = [id, ps](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        int at = 0;
        for (Id p : ps) {
          const int c = t.val(p).cols();
          if (t.needs(p)) {
            Tensor2& gp = t.nodes_[p].grad;
            for (int i = 0; i < g.rows(); ++i)
              for (int j = 0; j < c; ++j) gp.at(i, j) += g.at(i, at + j);
          }
          at += c;
        }
      };
    }
    return id;
  }

  Id slice_cols(Id a, int c0, int c1) {
    Id id = push(waydrive::slice_cols(val(a), c0, c1), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, c0](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at(i, c0 + j) += g.at(i, j);
      };
    return id;
  }

  /// out row i = a row idx[i]; duplicate indices accumulate in backward.
  Id gather_rows(Id a, std::vector<int> idx) {
    const Tensor2& av = val(a);
    Tensor2 out(static_cast<int>(idx.size()), av.cols());
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < av.cols(); ++j) out.at(static_cast<int>(i), j) = av.at(idx[i], j);
    Id id = push(std::move(out), needs(a), nullptr);
    if (needs(id)) {
      auto ix = std::make_shared<std::vector<int>>(std::move(idx));
      nodes_[id].back = [id, a, ix](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        for (size_t i = 0; i < ix->size(); ++i)
          for (int j = 0; j < g.cols(); ++j) ga.at((*ix)[i], j) += g.at(static_cast<int>(i), j);
      };
    }
    return id;
  }

  /// Merges each run of `group` consecutive rows into one wider row.
  /// Row-major data is unchanged; this is a metadata reshape.
  Id regroup_rows(Id a, int group) {
    const Tensor2& av = val(a);
    if (group <= 0 || av.rows() % group != 0) throw ShapeError("regroup_rows: group must divide rows");
    Tensor2 out(av.rows() / group, av.cols() * group);
    out.raw() = av.raw();
    Id id = push(std::move(out), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a](Tape& t) {
        Tensor2& ga = t.nodes_[a].grad;
        const Tensor2& g = t.nodes_[id].grad;
        for (size_t i = 0; i < ga.size(); ++i) ga.raw()[i] += g.raw()[i];
      };
    return id;
  }

  Id mean_rows(Id a) {
    Id id = push(waydrive::mean_rows(val(a)), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        Tensor2& ga = t.nodes_[a].grad;
        const double inv = 1.0 / ga.rows();
        for (int i = 0; i < ga.rows(); ++i)
          for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += g.at(0, j) * inv;
      };
    return id;
  }

  Id sum_all(Id a) {
    Id id = push(waydrive::sum_all(val(a)), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a](Tape& t) {
        const double g = t.nodes_[id].grad.at(0, 0);
        Tensor2& ga = t.nodes_[a].grad;
        for (double& v : ga.raw()) v += g;
      };
    return id;
  }

  /// Minimum over all elements; gradient routes to the first argmin.
  Id min_all(Id a) {
    const Tensor2& av = val(a);
    size_t arg = 0;
    for (size_t i = 1; i < av.size(); ++i)
      if (av.raw()[i] < av.raw()[arg]) arg = i;
    Tensor2 out(1, 1);
    out.at(0, 0) = av.raw()[arg];
    Id id = push(std::move(out), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, arg](Tape& t) {
        t.nodes_[a].grad.raw()[arg] += t.nodes_[id].grad.at(0, 0);
      };
    return id;
  }

  // ---- backward ----
  /// Walks the tape in exact reverse order of recording, seeding d(root)=1.
  /// root must be 1x1. Parameter grads accumulate into Parameter::grad.
  void backward(Id root) {
    if (val(root).rows() != 1 || val(root).cols() != 1)
      throw ShapeError("backward: root must be a 1x1 scalar");
    if (!needs(root)) return;  // nothing trainable participated
    nodes_[root].grad.at(0, 0) = 1.0;
    for (Id i = root; i >= 0; --i) {
      if (nodes_[i].needs && nodes_[i].back) nodes_[i].back(*this);
    }
  }

  static double sinc_scalar(double x) {
    if (std::fabs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
  }
  static double sinc_deriv(double x) {
    if (std::fabs(x) < 1e-8) return -x / 3.0;
    return (x * std::cos(x) - std::sin(x)) / (x * x);
  }

 private:
  struct Node {
    Tensor2 value;
    Tensor2 grad;
    bool needs = false;
    std::function<void(Tape&)> back;
  };

  bool needs(Id id) const { return nodes_[id].needs; }

  void acc_raw(Id target, const Tensor2& g, double k) {
    if (!needs(target)) return;
    Tensor2& gt = nodes_[target].grad;
    for (size_t i = 0; i < gt.size(); ++i) gt.raw()[i] += k * g.raw()[i];
  }

  Id unary(Id a, double (*f)(double), double (*df)(double x, double y)) {
    Id id = push(map_elems(val(a), f), needs(a), nullptr);
    if (needs(id))
      nodes_[id].back = [id, a, df](Tape& t) {
        const Tensor2& g = t.nodes_[id].grad;
        const Tensor2& x = t.val(a);
        const Tensor2& y = t.val(id);
        Tensor2& ga = t.nodes_[a].grad;
        for (size_t i = 0; i < ga.size(); ++i)
          ga.raw()[i] += g.raw()[i] * df(x.raw()[i], y.raw()[i]);
      };
    return id;
  }

  Id push(Tensor2 v, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(v);
    n.needs = needs_grad;
    if (needs_grad) n.grad = Tensor2(n.value.rows(), n.value.cols());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, Id> param_nodes_;
};

/// Scaled dot-product attention: softmax(q k^T * scale) v.
/// Returned alongside the attention probabilities for weight export.
struct AttentionOut {
  Tape::Id out;
  Tape::Id probs;
};

inline AttentionOut attention(Tape& t, Tape::Id q, Tape::Id k, Tape::Id v, double scale) {
  if (t.val(q).cols() != t.val(k).cols())
    shape_fail("attention q/k", t.val(q).rows(), t.val(q).cols(), t.val(k).rows(), t.val(k).cols());
  if (t.val(k).rows() != t.val(v).rows())
    shape_fail("attention k/v", t.val(k).rows(), t.val(k).cols(), t.val(v).rows(), t.val(v).cols());
  Tape::Id logits = t.affine(t.matmul_nt(q, k), scale, 0.0);
  Tape::Id probs = t.softmax_rows(logits);
  return {t.matmul(probs, v), probs};
}

/// Value-level attention; the same composition without a tape.
inline Tensor2 attention(const Tensor2& q, const Tensor2& k, const Tensor2& v, double scale,
                         Tensor2* probs_out = nullptr) {
  if (q.cols() != k.cols()) shape_fail("attention q/k", q.rows(), q.cols(), k.rows(), k.cols());
  if (k.rows() != v.rows()) shape_fail("attention k/v", k.rows(), k.cols(), v.rows(), v.cols());
  Tensor2 probs = softmax_rows(affine(matmul_nt(q, k), scale, 0.0));
  Tensor2 out = matmul(probs, v);
  if (probs_out) *probs_out = std::move(probs);
  return out;
}

// ---- tape scalars ----------------------------------------------------------
// 1x1 tape nodes with operator overloads, so that numeric code (the vehicle
// rollout used by the soft collision term) can be written once and run either
// on doubles or through the tape.
struct Scalar {
  Tape* t = nullptr;
  Tape::Id id = -1;

  Scalar() = default;
  Scalar(Tape& tape, Tape::Id i) : t(&tape), id(i) {}
  Scalar(Tape& tape, double v) : t(&tape) {
    Tensor2 c(1, 1);
    c.at(0, 0) = v;
    id = tape.constant(std::move(c));
  }
  double value() const { return t->val(id).at(0, 0); }
};

inline Scalar operator+(Scalar a, Scalar b) { return {*a.t, a.t->add(a.id, b.id)}; }
inline Scalar operator-(Scalar a, Scalar b) { return {*a.t, a.t->sub(a.id, b.id)}; }
inline Scalar operator*(Scalar a, Scalar b) { return {*a.t, a.t->mul(a.id, b.id)}; }
inline Scalar operator/(Scalar a, Scalar b) { return {*a.t, a.t->div(a.id, b.id)}; }
inline Scalar operator+(Scalar a, double b) { return {*a.t, a.t->affine(a.id, 1.0, b)}; }
inline Scalar operator+(double a, Scalar b) { return b + a; }
inline Scalar operator-(Scalar a, double b) { return {*a.t, a.t->affine(a.id, 1.0, -b)}; }
inline Scalar operator-(double a, Scalar b) { return {*b.t, b.t->affine(b.id, -1.0, a)}; }
inline Scalar operator*(Scalar a, double b) { return {*a.t, a.t->affine(a.id, b, 0.0)}; }
inline Scalar operator*(double a, Scalar b) { return b * a; }
inline Scalar operator/(Scalar a, double b) { return {*a.t, a.t->affine(a.id, 1.0 / b, 0.0)}; }
inline Scalar operator-(Scalar a) { return {*a.t, a.t->affine(a.id, -1.0, 0.0)}; }

inline Scalar sin(Scalar a) { return {*a.t, a.t->sin_(a.id)}; }
inline Scalar cos(Scalar a) { return {*a.t, a.t->cos_(a.id)}; }
inline Scalar tan(Scalar a) { return {*a.t, a.t->tan_(a.id)}; }
inline Scalar exp(Scalar a) { return {*a.t, a.t->exp_(a.id)}; }
inline Scalar sqrt(Scalar a) { return {*a.t, a.t->sqrt_(a.id)}; }
inline Scalar fabs(Scalar a) { return {*a.t, a.t->abs_(a.id)}; }
inline Scalar sinc(Scalar a) { return {*a.t, a.t->sinc(a.id)}; }
inline Scalar relu(Scalar a) { return {*a.t, a.t->relu(a.id)}; }
inline double sinc(double x) { return Tape::sinc_scalar(x); }
inline double relu(double x) { return x > 0 ? x : 0.0; }

inline Scalar min_of(const std::vector<Scalar>& xs) {
  std::vector<Tape::Id> ids;
  ids.reserve(xs.size());
  for (const Scalar& s : xs) ids.push_back(s.id);
  Tape* t = xs.front().t;
  return {*t, t->min_all(t->concat_cols(ids))};
}
inline double min_of(const std::vector<double>& xs) {
  double m = xs.front();
  for (double v : xs) m = std::min(m, v);
  return m;
}

// ---- finite-difference gradient verification ------------------------------
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

/// Scalar function under test. With a tape: record the computation AND call
/// tape->backward(root) before returning the value, so parameter grads are
/// populated. With nullptr: plain value evaluation.
using ScalarFn = std::function<double(Tape*)>;

struct GradCheckOptions {
  double eps = 1e-5;
  int samples_per_param = 4;  // <=0 checks every element
  uint64_t seed = 17;
};

/// Max over checked parameter elements of |adjoint - central difference| /
/// max(|adjoint|, |fd|, 1). Frozen parameters are verified to hold exactly
/// zero adjoints and are excluded from the finite-difference sweep.
inline double grad_check(const ScalarFn& f, const std::vector<Parameter*>& params,
                         const GradCheckOptions& opt = {}) {
  zero_grads(params);
  {
    Tape tape;
    const double base = f(&tape);
    if (!std::isfinite(base)) throw EvalError("grad_check: non-finite function value");
  }
  // snapshot adjoints before perturbations
  std::vector<Tensor2> adjoints;
  adjoints.reserve(params.size());
  for (Parameter* p : params) adjoints.push_back(p->grad);

  Rng rng(opt.seed);
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    if (!p->trainable) {
      for (double g : p->grad.raw())
        if (g != 0.0) throw EvalError("grad_check: frozen parameter '" + p->name + "' has nonzero adjoint");
      continue;
    }
    const int n = static_cast<int>(p->value.size());
    std::vector<int> picks;
    if (opt.samples_per_param <= 0 || opt.samples_per_param >= n) {
      picks.resize(n);
      for (int i = 0; i < n; ++i) picks[i] = i;
    } else {
      for (int s = 0; s < opt.samples_per_param; ++s) picks.push_back(rng.uniform_int(0, n - 1));
      std::sort(picks.begin(), picks.end());
      picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    }
    for (int idx : picks) {
      double& slot = p->value.raw()[idx];
      const double old = slot;
      slot = old + opt.eps;
      const double fp = f(nullptr);
      slot = old - opt.eps;
      const double fm = f(nullptr);
      slot = old;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw EvalError("grad_check: non-finite function value during perturbation");
      const double fd = (fp - fm) / (2.0 * opt.eps);
      const double a = adjoints[pi].raw()[idx];
      const double err = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1.0});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace waydrive
