#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "gfamp/field.hpp"
#include "gfamp/rng.hpp"
#include "gfamp/shrinkage.hpp"
#include "gfamp/signal_model.hpp"

namespace gfamp {

// Scalar recursion predicting the per-iteration effective noise level of the solver:
//   delta_i^2 = noise_var + E || eta(x0 + delta_{i-1} d; delta_{i-1}) - x0 ||^2 / len
// with d standard normal. Expectations are Monte-Carlo estimates; mse_pred[i] is the
// implied squared-error prediction E||x_i - x0||^2 for iteration i+1.
struct SeResult {
  double delta0_sq = 0;
  std::vector<double> delta_sq;
  std::vector<double> stderr_delta_sq;
  std::vector<double> mse_pred;
};

// Fills one group block (group_size x width) with a prior draw.
template <class S>
using GroupSampler = std::function<void(Rng&, Eigen::Ref<Mat<S>>)>;

// Hierarchical prior used by the benchmarks: active with prob p_a, uniform delay,
// Gaussian channel rows of variance gain.
template <class S>
GroupSampler<S> make_group_prior(const SystemConfig& cfg) {
  return [cfg](Rng& rng, Eigen::Ref<Mat<S>> g) {
    g.setZero();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> dly(0, cfg.max_delay);
    const bool active = unif(rng) < cfg.active_prob;
    const int d = dly(rng);
    const double amp = std::sqrt(cfg.gain);
    for (int m = 0; m < g.cols(); ++m) {
      const S val = detail::channel_draw<S>(rng, amp);
      if (active) g(d, m) = val;
    }
  };
}

template <class S>
SeResult state_evolution(int len, int dim, int group_size, int width,
                         const ShrinkageParams& p, double noise_var, int iters, int mc,
                         const GroupSampler<S>& prior, std::uint64_t seed) {
  if (len < 1 || dim < 1 || width < 1 || group_size < 1 || dim % group_size != 0)
    throw ConfigError("state_evolution: bad dimensions");
  if (mc < 2) throw ConfigError("state_evolution: need at least 2 draws");
  const int groups = dim / group_size;
  SeResult res;

  auto draw_x0 = [&](Rng& rng, Mat<S>& x0) {
    for (int g = 0; g < groups; ++g)
      prior(rng, x0.middleRows(Eigen::Index(g) * group_size, group_size));
  };

  // initial level from the prior's second moment
  {
    double acc = 0;
    Mat<S> x0(dim, width);
    for (int j = 0; j < mc; ++j) {
      Rng rng = make_stream(seed, "se_init", j);
      draw_x0(rng, x0);
      acc += x0.squaredNorm();
    }
    res.delta0_sq = noise_var + acc / mc / len / width;
  }

  double delta = std::sqrt(res.delta0_sq);
  Mat<S> x0(dim, width), r(dim, width);
  for (int i = 0; i < iters; ++i) {
    double sum = 0, sumsq = 0;
    for (int j = 0; j < mc; ++j) {
      Rng rng = make_stream(seed, "se_iter", std::uint64_t(i) * mc + j);
      draw_x0(rng, x0);
      for (int m = 0; m < width; ++m)
        for (int t = 0; t < dim; ++t)
          r(t, m) = x0(t, m) + S(real_of<S>(delta)) * detail::channel_draw<S>(rng, 1.0);
      ShrinkEval<S> e = shrink_apply<S>(r, delta, p, group_size);
      const double err = (e.x - x0).squaredNorm();
      sum += err;
      sumsq += err * err;
    }
    const double mean_err = sum / mc;
    const double var_err = std::max(0.0, sumsq / mc - mean_err * mean_err) * mc / (mc - 1);
    res.mse_pred.push_back(mean_err);
    res.delta_sq.push_back(noise_var + mean_err / len / width);
    res.stderr_delta_sq.push_back(std::sqrt(var_err / mc) / len / width);
    delta = std::sqrt(res.delta_sq.back());
  }
  return res;
}

}  // namespace gfamp
