#pragma once

#include <cmath>
#include <stdexcept>

#include "sdfe/rng.hpp"
#include "sdfe/vec.hpp"

namespace sdfe {

// Uniform Xavier/Glorot init on [-a, a], a = sqrt(6 / (fan_in + fan_out)).
inline Vec xavier_init(RngStream& rng, int fan_in, int fan_out, int d) {
  if (d <= 0) throw std::invalid_argument("xavier_init: d must be positive");
  if (fan_in + fan_out < 1) throw std::invalid_argument("xavier_init: fan_in + fan_out must be >= 1");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Vec v(static_cast<std::size_t>(d));
  for (double& x : v) x = rng.uniform(-a, a);
  return v;
}

struct AdamState {
  Vec m;
  Vec v;
  long t = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

inline AdamState make_adam(std::size_t d, double lr, double weight_decay) {
  AdamState s;
  s.m = zeros(d);
  s.v = zeros(d);
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

// Adam with bias correction; weight decay is L2-coupled (added to the
// gradient before the moment updates).
inline void adam_step(Vec& param, const Vec& grad, AdamState& s) {
  if (param.size() != grad.size() || param.size() != s.m.size())
    throw std::invalid_argument("adam_step: dimension mismatch");
  if (!all_finite(grad)) throw std::runtime_error("adam_step: non-finite gradient");
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + s.weight_decay * param[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    param[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

// i.i.d. Laplace(0, lambda) entries; lambda = 0 yields the zero vector
// without consuming any randomness.
inline Vec laplace_sample(RngStream& rng, double lambda, int d) {
  if (lambda < 0.0) throw std::invalid_argument("laplace_sample: negative scale");
  if (d <= 0) throw std::invalid_argument("laplace_sample: d must be positive");
  Vec v = zeros(static_cast<std::size_t>(d));
  if (lambda == 0.0) return v;
  for (double& x : v) x = rng.laplace(lambda);
  return v;
}

}  // namespace sdfe
