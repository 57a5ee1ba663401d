#pragma once
#include <cmath>

#include "gfamp/errors.hpp"
#include "gfamp/field.hpp"

namespace gfamp {

// Adam with bias correction; state and parameters live in double regardless of the
// model's working precision.
struct Adam {
  double lr = 7e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  VecXd m, v;

  explicit Adam(int n = 0, double lr_ = 7e-4) : lr(lr_) { reset(n); }

  void reset(int n) {
    t = 0;
    m = VecXd::Zero(n);
    v = VecXd::Zero(n);
  }

  void step(VecXd& p, const VecXd& g) {
    if (p.size() != m.size() || g.size() != m.size()) throw ConfigError("adam: size mismatch");
    ++t;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g.cwiseProduct(g).eval();
    const double c1 = 1 - std::pow(beta1, t);
    const double c2 = 1 - std::pow(beta2, t);
    p -= (lr / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
  }
};

}  // namespace gfamp
