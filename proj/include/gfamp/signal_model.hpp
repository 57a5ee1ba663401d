#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "gfamp/config.hpp"
#include "gfamp/errors.hpp"
#include "gfamp/field.hpp"
#include "gfamp/rng.hpp"

namespace gfamp {

// Pilots are real i.i.d. N(0, 1/L) sequences, normalized to unit l2 norm per user.
// The same pilot set (hence the same expanded matrix) is shared by every split of a scenario.
inline MatXd generate_pilots(const SystemConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_stream(seed, "pilots", 0);
  MatXd p(cfg.pilot_len, cfg.num_users);
  const double scale = 1.0 / std::sqrt(double(cfg.pilot_len));
  for (int n = 0; n < cfg.num_users; ++n)
    for (int l = 0; l < cfg.pilot_len; ++l) p(l, n) = scale * randn(rng);
  for (int n = 0; n < cfg.num_users; ++n) p.col(n).normalize();
  return p;
}

// Zero-padded shift of one pilot: delay leading zeros, then the sequence, then
// guard_len - delay trailing zeros. Length L + guard_len.
inline VecXd expand_pilot(const VecXd& pilot, int delay, int guard_len) {
  if (delay < 0 || delay > guard_len)
    throw ConfigError("expand_pilot: delay " + std::to_string(delay) + " outside [0, " +
                      std::to_string(guard_len) + "]");
  VecXd out = VecXd::Zero(pilot.size() + guard_len);
  out.segment(delay, pilot.size()) = pilot;
  return out;
}

// Expanded dictionary: user n occupies the contiguous column block
// [n*(guard_len+1), (n+1)*(guard_len+1)), one column per candidate delay.
inline MatXd build_expanded_matrix(const MatXd& pilots, int guard_len) {
  const int L = int(pilots.rows()), N = int(pilots.cols()), G = guard_len + 1;
  MatXd s = MatXd::Zero(L + guard_len, N * G);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < G; ++t) s.col(n * G + t).segment(t, L) = pilots.col(n);
  return s;
}

template <class S>
struct GroundTruth {
  std::vector<std::uint8_t> active; // per user
  std::vector<int> delay;           // per user, -1 when inactive
  Mat<S> channels;                  // N x M effective gains sqrt(phi) g, zero rows when inactive
};

template <class S>
struct Sample {
  Mat<S> x0; // expanded_dim x M, hierarchically sparse coefficients
  Mat<S> y;  // expanded_len x M received pilot block
  GroundTruth<S> truth;
};

template <class S>
struct Dataset {
  SystemConfig cfg;
  MatXd pilots; // L x N
  MatXd smat;   // expanded_len x expanded_dim
  Mat<S> smat_s; // smat cast to the working scalar
  std::vector<Sample<S>> samples;
};

namespace detail {

template <class S>
inline S channel_draw(Rng& rng, double amp) {
  if constexpr (scalar_traits<S>::is_complex) {
    const double c = amp / std::numbers::sqrt2;
    return S(real_of<S>(c * randn(rng)), real_of<S>(c * randn(rng)));
  } else {
    return S(real_of<S>(amp * randn(rng)));
  }
}

}  // namespace detail

// Activity, delay and channel draws for one sample. Delay/channel variates are consumed for
// every user regardless of activity so the stream layout is fixed.
template <class S>
GroundTruth<S> sample_truth(const SystemConfig& cfg, Rng& rng) {
  if constexpr (scalar_traits<S>::is_complex) {
    if (cfg.field != Field::cplx) throw ConfigError("sample_truth: scalar/field mismatch");
  } else {
    if (cfg.field != Field::real) throw ConfigError("sample_truth: scalar/field mismatch");
  }
  const int N = cfg.num_users, M = cfg.num_antennas;
  GroundTruth<S> t;
  t.active.resize(N);
  t.delay.assign(N, -1);
  t.channels = Mat<S>::Zero(N, M);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> dly(0, cfg.max_delay);
  const double amp = std::sqrt(cfg.gain);
  for (int n = 0; n < N; ++n) t.active[n] = unif(rng) < cfg.active_prob ? 1 : 0;
  for (int n = 0; n < N; ++n) {
    const int d = dly(rng);
    if (t.active[n]) t.delay[n] = d;
  }
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < M; ++m) {
      const S g = detail::channel_draw<S>(rng, amp);
      if (t.active[n]) t.channels(n, m) = g;
    }
  }
  return t;
}

// Hierarchically sparse coefficient matrix: row n*G + delay_n carries the channel row of an
// active user, every other row of the group is zero.
template <class S>
Mat<S> effective_channel(const SystemConfig& cfg, const GroundTruth<S>& t) {
  const int G = cfg.group_size();
  Mat<S> x = Mat<S>::Zero(cfg.expanded_dim(), cfg.num_antennas);
  for (int n = 0; n < cfg.num_users; ++n) {
    if (!t.active[n]) continue;
    if (t.delay[n] < 0 || t.delay[n] >= G)
      throw ConfigError("effective_channel: delay out of range");
    x.row(n * G + t.delay[n]) = t.channels.row(n);
  }
  return x;
}

// y = S x0 + z with i.i.d. noise of total variance noise_var per entry
// (split across real and imaginary parts in the complex field).
template <class S>
Mat<S> synthesize(const Mat<S>& x0, const Mat<S>& smat_s, double noise_var, Rng& rng) {
  if (noise_var < 0) throw ConfigError("synthesize: negative noise variance");
  Mat<S> y = smat_s * x0;
  if (noise_var > 0) {
    if constexpr (scalar_traits<S>::is_complex) {
      const double c = std::sqrt(noise_var / 2.0);
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i)
          y(i, j) += S(real_of<S>(c * randn(rng)), real_of<S>(c * randn(rng)));
    } else {
      const double c = std::sqrt(noise_var);
      for (Eigen::Index j = 0; j < y.cols(); ++j)
        for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += S(real_of<S>(c * randn(rng)));
    }
  }
  return y;
}

// Per-sample streams are keyed by (base_seed, split_tag, index); the pilot set is keyed by
// the base seed alone so all splits share one dictionary.
template <class S>
Dataset<S> generate_dataset(const SystemConfig& cfg, int count, std::string_view split_tag) {
  cfg.validate();
  if (count < 0) throw ConfigError("generate_dataset: negative count");
  Dataset<S> ds;
  ds.cfg = cfg;
  ds.pilots = generate_pilots(cfg, cfg.base_seed);
  ds.smat = build_expanded_matrix(ds.pilots, cfg.guard_len);
  ds.smat_s = ds.smat.template cast<S>();
  ds.samples.resize(count);
  const double nv = cfg.noise_var();
  const std::string tag(split_tag);
  for (int i = 0; i < count; ++i) {
    Rng rng = make_stream(cfg.base_seed, tag, std::uint64_t(i));
    Sample<S>& s = ds.samples[i];
    s.truth = sample_truth<S>(cfg, rng);
    s.x0 = effective_channel(cfg, s.truth);
    s.y = synthesize(s.x0, ds.smat_s, nv, rng);
  }
  return ds;
}

}  // namespace gfamp
