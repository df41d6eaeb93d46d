// Adam with bias correction. The learning rate at epoch e is lr * d_l^e,
// applied as a geometric staircase via set_epoch().
#pragma once

#include <cmath>
#include <cstdint>

#include "layerwise/matrix.hpp"

namespace lw {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 1.0;  // per-epoch multiplier d_l
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamConfig cfg = {})
      : m_(rows, cols), v_(rows, cols), cfg_(cfg) {}

  void set_epoch(std::uint64_t epoch) { epoch_ = epoch; }
  std::uint64_t step_count() const { return t_; }
  double current_lr() const { return cfg_.lr * std::pow(cfg_.decay, static_cast<double>(epoch_)); }

  void step(Matrix& params, const Matrix& grads) {
    detail::check(params.rows() == m_.rows() && params.cols() == m_.cols() &&
                      grads.rows() == m_.rows() && grads.cols() == m_.cols(),
                  "adam_step: shape mismatch");
    ++t_;
    const double lr = current_lr();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    double* p = params.data();
    double* m = m_.data();
    double* v = v_.data();
    const double* g = grads.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= lr * mh / (std::sqrt(vh) + cfg_.epsilon);
    }
  }

 private:
  Matrix m_, v_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::uint64_t epoch_ = 0;
};

inline void adam_step(AdamState& state, Matrix& params, const Matrix& grads) {
  state.step(params, grads);
}

}  // namespace lw
