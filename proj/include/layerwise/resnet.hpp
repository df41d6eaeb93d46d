// Growable residual network. States propagate as
//   Y1 = X U + u,   Y(l+1) = Y(l) + h(Y(l) W(l+1) + b(l+1)),
//   output = h_pred(Y(L) W_pred + b_pred),
// with one shared prediction head. Layers grown during layerwise training
// start at exactly zero so the forward output is preserved bit for bit.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "layerwise/activation.hpp"
#include "layerwise/matrix.hpp"

namespace lw {

struct HiddenLayer {
  Matrix W;  // o x o
  Matrix b;  // 1 x o
  Act activation = Act::elu;
  bool frozen = false;
  bool skip = true;  // identity shortcut; false only in forward-thinking mode
};

enum class Head { identity, softmax };

class GrowableResNet {
 public:
  Matrix U;  // S x o
  Matrix u;  // 1 x o
  std::vector<HiddenLayer> layers;
  Matrix W_pred;  // o x O
  Matrix b_pred;  // 1 x O
  Head head = Head::identity;
  bool input_frozen = false;

  GrowableResNet() = default;
  GrowableResNet(std::size_t in_dim, std::size_t width, std::size_t out_dim,
                 Head head_kind = Head::identity)
      : U(in_dim, width), u(1, width), W_pred(width, out_dim), b_pred(1, out_dim),
        head(head_kind) {}

  std::size_t in_dim() const { return U.rows(); }
  std::size_t width() const { return U.cols(); }
  std::size_t out_dim() const { return W_pred.cols(); }
  std::size_t hidden_count() const { return layers.size(); }
  // Paper-style layer count: input map + hidden layers (head excluded).
  std::size_t layer_count() const { return 1 + layers.size(); }

  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  std::size_t total_params() const {
    std::size_t n = U.size() + u.size() + W_pred.size() + b_pred.size();
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
  }

 private:
  std::uint64_t version_ = 0;
};

struct ForwardTape {
  // states[0] is the residual state entering hidden layer `first_hidden`;
  // states[j+1] the state after hidden layer first_hidden+j.
  std::size_t first_hidden = 0;
  Matrix input;             // original X when first_hidden == 0
  std::vector<Matrix> pre;  // pre-activations per covered hidden layer
  std::vector<Matrix> states;
  Matrix z_pred;
  Matrix output;
  std::uint64_t net_version = 0;
};

inline Matrix apply_head(Head head, const Matrix& z) {
  if (head == Head::identity) return z;
  Matrix y(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double* zi = z.row(i);
    double* yi = y.row(i);
    double mx = zi[0];
    for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, zi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      yi[j] = std::exp(zi[j] - mx);
      sum += yi[j];
    }
    for (std::size_t j = 0; j < z.cols(); ++j) yi[j] /= sum;
  }
  return y;
}

namespace detail {

inline void forward_stack(const GrowableResNet& net, ForwardTape& tape) {
  const std::size_t h0 = tape.first_hidden;
  for (std::size_t h = h0; h < net.layers.size(); ++h) {
    const HiddenLayer& l = net.layers[h];
    Matrix z = matmul(tape.states.back(), l.W);
    add_rowvec_inplace(z, l.b);
    Matrix next(z.rows(), z.cols());
    const double* pz = z.data();
    const double* py = tape.states.back().data();
    double* pn = next.data();
    if (l.skip) {
      for (std::size_t i = 0; i < z.size(); ++i)
        pn[i] = py[i] + act_value(l.activation, pz[i]);
    } else {
      for (std::size_t i = 0; i < z.size(); ++i) pn[i] = act_value(l.activation, pz[i]);
    }
    tape.pre.push_back(std::move(z));
    tape.states.push_back(std::move(next));
  }
  tape.z_pred = matmul(tape.states.back(), net.W_pred);
  add_rowvec_inplace(tape.z_pred, net.b_pred);
  tape.output = apply_head(net.head, tape.z_pred);
  tape.net_version = net.version();
}

}  // namespace detail

inline ForwardTape forward(const GrowableResNet& net, const Matrix& X) {
  detail::check(X.cols() == net.in_dim(), "forward: input width mismatch");
  ForwardTape tape;
  tape.first_hidden = 0;
  tape.input = X;
  Matrix y1 = matmul(X, net.U);
  add_rowvec_inplace(y1, net.u);
  tape.states.push_back(std::move(y1));
  detail::forward_stack(net, tape);
  return tape;
}

// Resume from a cached residual state entering hidden layer `first_hidden`.
// Used to skip the frozen prefix during a training stage.
inline ForwardTape forward_from(const GrowableResNet& net, const Matrix& y_in,
                                std::size_t first_hidden) {
  detail::check(y_in.cols() == net.width(), "forward_from: state width mismatch");
  detail::check(first_hidden <= net.layers.size(), "forward_from: bad layer index");
  ForwardTape tape;
  tape.first_hidden = first_hidden;
  tape.states.push_back(y_in);
  detail::forward_stack(net, tape);
  return tape;
}

inline Matrix predict(const GrowableResNet& net, const Matrix& X) {
  return forward(net, X).output;
}

struct Gradients {
  Matrix dU, du;
  std::vector<Matrix> dW, db;  // indexed by hidden layer; empty for frozen/uncovered
  Matrix dW_pred, db_pred;

  double squared_norm() const {
    double s = 0.0;
    auto acc = [&s](const Matrix& m) {
      for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    };
    acc(dU); acc(du); acc(dW_pred); acc(db_pred);
    for (const auto& m : dW) acc(m);
    for (const auto& m : db) acc(m);
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }
};

// Chain rule through the head for a gradient given w.r.t. the head output.
inline Matrix head_backward(Head head, const Matrix& output, const Matrix& g_out) {
  if (head == Head::identity) return g_out;
  Matrix dz(g_out.rows(), g_out.cols());
  for (std::size_t i = 0; i < g_out.rows(); ++i) {
    const double* y = output.row(i);
    const double* g = g_out.row(i);
    double* d = dz.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < g_out.cols(); ++j) s += g[j] * y[j];
    for (std::size_t j = 0; j < g_out.cols(); ++j) d[j] = y[j] * (g[j] - s);
  }
  return dz;
}

// Reverse pass. `g_out` is the loss gradient at the head output;
// `g_last_hidden` (optional) is injected at the last hidden state, which is
// where the manifold term attaches. Frozen parameters receive no gradient and
// the sweep stops once nothing below is trainable.
inline Gradients backward(const GrowableResNet& net, const ForwardTape& tape,
                          const Matrix& g_out, const Matrix* g_last_hidden = nullptr,
                          bool head_grads = true) {
  detail::check(tape.net_version == net.version(), "backward: stale tape");
  detail::check(g_out.rows() == tape.output.rows() && g_out.cols() == tape.output.cols(),
                "backward: gradient shape mismatch");

  Gradients grads;
  grads.dW.resize(net.layers.size());
  grads.db.resize(net.layers.size());

  Matrix dz_pred = head_backward(net.head, tape.output, g_out);
  if (head_grads) {
    grads.dW_pred = matmul_tA(tape.states.back(), dz_pred);
    grads.db_pred = colsum(dz_pred);
  }

  // The lowest trainable point decides how deep the sweep must go.
  long long lowest;
  if (net.input_frozen) {
    lowest = static_cast<long long>(net.layers.size());
    for (std::size_t h = 0; h < net.layers.size(); ++h)
      if (!net.layers[h].frozen) {
        lowest = static_cast<long long>(h);
        break;
      }
    detail::check(lowest >= static_cast<long long>(tape.first_hidden),
                  "backward: tape does not cover the trainable layers");
  } else {
    lowest = 0;
    detail::check(tape.first_hidden == 0,
                  "backward: tape does not cover the trainable input map");
  }
  const bool input_grads = !net.input_frozen;

  Matrix g_y = matmul_tB(dz_pred, net.W_pred);
  if (g_last_hidden != nullptr) {
    detail::check(g_last_hidden->rows() == g_y.rows() && g_last_hidden->cols() == g_y.cols(),
                  "backward: manifold gradient shape mismatch");
    add_inplace(g_y, *g_last_hidden);
  }

  for (long long h = static_cast<long long>(net.layers.size()) - 1; h >= lowest; --h) {
    const HiddenLayer& l = net.layers[h];
    const std::size_t j = h - tape.first_hidden;
    Matrix dz(g_y.rows(), g_y.cols());
    {
      const double* gp = g_y.data();
      const double* zp = tape.pre[j].data();
      double* dp = dz.data();
      for (std::size_t i = 0; i < dz.size(); ++i)
        dp[i] = gp[i] * act_deriv(l.activation, zp[i]);
    }
    if (!l.frozen) {
      grads.dW[h] = matmul_tA(tape.states[j], dz);
      grads.db[h] = colsum(dz);
    }
    if (h > lowest || input_grads) {
      Matrix below = matmul_tB(dz, l.W);
      if (l.skip) add_inplace(below, g_y);
      g_y = std::move(below);
    }
  }

  if (input_grads) {
    grads.dU = matmul_tA(tape.input, g_y);
    grads.du = colsum(g_y);
  }
  return grads;
}

// Algorithm-1 growth: freeze everything trained so far, append a layer at
// exactly zero with the identity shortcut on. Zero (not small-random) is what
// makes the forward output provably unchanged for LTP activations.
inline void grow_layer(GrowableResNet& net, Act activation = Act::elu) {
  if (!ltp_check(activation))
    throw std::invalid_argument(std::string("grow_layer: activation '") +
                                act_name(activation) + "' lacks the LTP property");
  net.input_frozen = true;
  for (auto& l : net.layers) l.frozen = true;
  HiddenLayer fresh;
  fresh.W = Matrix(net.width(), net.width());
  fresh.b = Matrix(1, net.width());
  fresh.activation = activation;
  fresh.frozen = false;
  fresh.skip = true;
  net.layers.push_back(std::move(fresh));
  net.touch();
}

// Plain append with caller-provided parameters (forward-thinking mode,
// baselines). No LTP gate: output preservation is not claimed here.
inline void append_layer(GrowableResNet& net, Act activation, Matrix W, Matrix b,
                         bool skip) {
  detail::check(W.rows() == net.width() && W.cols() == net.width() &&
                    b.rows() == 1 && b.cols() == net.width(),
                "append_layer: shape mismatch");
  HiddenLayer l;
  l.W = std::move(W);
  l.b = std::move(b);
  l.activation = activation;
  l.skip = skip;
  net.layers.push_back(std::move(l));
  net.touch();
}

// Step-10 thresholding of the just-trained layer (default: the last one).
inline void threshold(GrowableResNet& net, double rho, long long layer_index = -1) {
  detail::check(rho >= 0.0, "threshold: rho must be nonnegative");
  if (net.layers.empty()) return;
  const std::size_t h =
      layer_index < 0 ? net.layers.size() - 1 : static_cast<std::size_t>(layer_index);
  detail::check(h < net.layers.size(), "threshold: bad layer index");
  auto clip = [rho](Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
      if (std::fabs(m.data()[i]) < rho) m.data()[i] = 0.0;
  };
  clip(net.layers[h].W);
  clip(net.layers[h].b);
  net.touch();
}

inline double active_fraction(const GrowableResNet& net, std::size_t layer_index) {
  detail::check(layer_index < net.layers.size(), "active_fraction: bad layer index");
  const HiddenLayer& l = net.layers[layer_index];
  std::size_t nz = 0;
  for (std::size_t i = 0; i < l.W.size(); ++i) nz += l.W.data()[i] != 0.0;
  for (std::size_t i = 0; i < l.b.size(); ++i) nz += l.b.data()[i] != 0.0;
  return static_cast<double>(nz) / static_cast<double>(l.W.size() + l.b.size());
}

// Drops trailing hidden layers, keeping the head.
inline void prune_tail(GrowableResNet& net, std::size_t keep) {
  detail::check(keep >= 1, "prune_tail: keep must be at least 1");
  detail::check(keep <= net.layers.size(), "prune_tail: keep exceeds layer count");
  net.layers.resize(keep);
  net.touch();
}

}  // namespace lw
