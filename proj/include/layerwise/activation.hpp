// Scalar activations and the layerwise-training-promoting (LTP) gate:
// an activation with h(0)=0 and h'(0)!=0 lets a zero-initialized residual
// layer preserve outputs while still receiving gradients.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace lw {

enum class Act { elu, tanh, sigmoid, relu, identity, softmax };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::elu: return "elu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::relu: return "relu";
    case Act::identity: return "identity";
    case Act::softmax: return "softmax";
  }
  return "?";
}

inline Act act_from_name(const std::string& s) {
  if (s == "elu") return Act::elu;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  if (s == "relu") return Act::relu;
  if (s == "identity") return Act::identity;
  if (s == "softmax") return Act::softmax;
  throw std::invalid_argument("unknown activation: " + s);
}

// ELU with shape parameter 1.
inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_prime(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

inline double act_value(Act a, double x) {
  switch (a) {
    case Act::elu: return elu(x);
    case Act::tanh: return std::tanh(x);
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::identity: return x;
    case Act::softmax:
      throw std::invalid_argument("softmax has no scalar value map");
  }
  return 0.0;
}

inline double act_deriv(Act a, double x) {
  switch (a) {
    case Act::elu: return elu_prime(x);
    case Act::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Act::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Act::relu: return x > 0.0 ? 1.0 : 0.0;
    case Act::identity: return 1.0;
    case Act::softmax:
      throw std::invalid_argument("softmax has no scalar derivative map");
  }
  return 0.0;
}

// true iff value(0)=0 and |derivative(0)| > 0. softmax maps the zero vector
// to 1/n, so it can never satisfy the first condition.
inline bool ltp_check(Act a) {
  if (a == Act::softmax) return false;
  return act_value(a, 0.0) == 0.0 && std::fabs(act_deriv(a, 0.0)) > 0.0;
}

}  // namespace lw
