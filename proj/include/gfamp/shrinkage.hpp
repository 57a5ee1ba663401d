#pragma once
#include <array>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "gfamp/config.hpp"
#include "gfamp/errors.hpp"
#include "gfamp/field.hpp"

namespace gfamp {

// The four denoisers. Scalar kinds act entrywise on a column vector, vector kinds act on
// rows of a matrix. The *_mmse kinds are posterior means under the hierarchical
// Bernoulli-Gaussian prior: within each group of group_size consecutive rows at most one
// row is nonzero (the delay hypothesis), and theta2 carries the inactivity odds.
enum class ShrinkKind { scalar_st, group_mmse, vector_st, vector_mmse };

inline const char* shrink_kind_name(ShrinkKind k) {
  switch (k) {
    case ShrinkKind::scalar_st: return "scalar_st";
    case ShrinkKind::group_mmse: return "group_mmse";
    case ShrinkKind::vector_st: return "vector_st";
    case ShrinkKind::vector_mmse: return "vector_mmse";
  }
  return "?";
}

inline ShrinkKind shrink_kind_from_name(std::string_view s) {
  if (s == "scalar_st") return ShrinkKind::scalar_st;
  if (s == "group_mmse") return ShrinkKind::group_mmse;
  if (s == "vector_st") return ShrinkKind::vector_st;
  if (s == "vector_mmse") return ShrinkKind::vector_mmse;
  throw ConfigError("unknown shrinkage kind: " + std::string(s));
}

// Learnable parameter set. Soft-threshold kinds use theta alone; MMSE kinds use
// theta1 (prior channel variance), theta2 (inactivity odds), theta3 (output scale),
// theta4 (linear leak). Flat slot order for the optimizer: ST {theta},
// MMSE {theta1, theta2, theta3, theta4}.
struct ShrinkageParams {
  ShrinkKind kind = ShrinkKind::group_mmse;
  double theta = 1.14;
  double theta1 = 1.0;
  double theta2 = 9.0;
  double theta3 = 1.0;
  double theta4 = 0.0;

  bool is_mmse() const { return kind == ShrinkKind::group_mmse || kind == ShrinkKind::vector_mmse; }
  bool is_vector() const { return kind == ShrinkKind::vector_st || kind == ShrinkKind::vector_mmse; }
  int param_count() const { return is_mmse() ? 4 : 1; }

  double get(int slot) const {
    if (is_mmse()) {
      const double v[4] = {theta1, theta2, theta3, theta4};
      return v[slot];
    }
    return theta;
  }
  void set(int slot, double v) {
    if (is_mmse()) {
      double* p[4] = {&theta1, &theta2, &theta3, &theta4};
      *p[slot] = v;
    } else {
      theta = v;
    }
  }

  static ShrinkageParams soft_threshold(ShrinkKind k, double theta = 1.14) {
    ShrinkageParams p;
    p.kind = k;
    p.theta = theta;
    return p;
  }

  // Statistics-matched values: theta1 = phi, theta2 = (1 - p_a) / p_{a,T} where the
  // per-delay activity probability is p_a / (guard_len + 1).
  static ShrinkageParams mmse_oracle(ShrinkKind k, const SystemConfig& cfg) {
    ShrinkageParams p;
    p.kind = k;
    p.theta1 = cfg.gain;
    p.theta2 = (1.0 - cfg.active_prob) / cfg.delay_active_prob();
    p.theta3 = 1.0;
    p.theta4 = 0.0;
    return p;
  }

  void validate() const {
    if (is_mmse()) {
      if (!(theta1 > 0)) throw ConfigError("shrinkage: theta1 must be positive");
      if (!(theta2 >= 0)) throw ConfigError("shrinkage: theta2 must be nonnegative");
    } else {
      if (!(theta >= 0)) throw ConfigError("shrinkage: theta must be nonnegative");
    }
  }
};

template <class S>
struct ShrinkEval {
  Mat<S> x;       // denoised coefficients, same shape as the input
  Mat<S> onsager; // w x w divergence matrix; right-multiplies the residual matrix
};

namespace detail {

inline void require_sigma(double sigma) {
  if (!(sigma > 0)) throw ConfigError("shrinkage: sigma must be positive");
}

// Writable-block argument helper (standard Eigen idiom).
template <class D>
inline D& as_lvalue(const Eigen::MatrixBase<D>& x) {
  return const_cast<Eigen::MatrixBase<D>&>(x).derived();
}

// Per-group posterior statistics shared by value, divergence and backward formulas.
// All exponent handling is in the log domain: psi_t = exp(xi_t - logS) is the posterior
// probability of delay hypothesis t, bfrac = exp(logb2 - logS) the inactivity posterior.
struct MmseStats {
  double a = 0, c = 0, logS = 0, logb2 = 0, bfrac = 0;
  Eigen::ArrayXd xi, psi; // per row in the group
};

template <class D>
MmseStats mmse_stats(const Eigen::MatrixBase<D>& rg, double sigma, const ShrinkageParams& p) {
  using S = typename D::Scalar;
  constexpr int kappa = scalar_traits<S>::kappa;
  const int G = int(rg.rows()), w = int(rg.cols());
  MmseStats st;
  const double s2 = sigma * sigma;
  st.a = p.theta1 / (p.theta1 + s2);
  st.c = s2 * (1.0 + s2 / p.theta1);
  st.xi.resize(G);
  for (int t = 0; t < G; ++t) {
    double sq = 0;
    for (int m = 0; m < w; ++m) sq += abs2(rg(t, m));
    st.xi[t] = kappa * sq / (2.0 * st.c);
  }
  st.logb2 = p.theta2 > 0
                 ? 0.5 * kappa * w * std::log1p(p.theta1 / s2) + std::log(p.theta2)
                 : -std::numeric_limits<double>::infinity();
  double mx = st.logb2;
  for (int t = 0; t < G; ++t) mx = std::max(mx, st.xi[t]);
  double acc = std::isinf(st.logb2) ? 0.0 : std::exp(st.logb2 - mx);
  for (int t = 0; t < G; ++t) acc += std::exp(st.xi[t] - mx);
  st.logS = mx + std::log(acc);
  st.psi = (st.xi - st.logS).exp();
  st.bfrac = std::isinf(st.logb2) ? 0.0 : std::exp(st.logb2 - st.logS);
  return st;
}

// Soft threshold on the rows of R; threshold is theta * sqrt(w) * sigma on the row l2
// norm. Exact-boundary rows take the zero branch (subgradient zero). The divergence
// matrix accumulated into B is the transpose of the Jacobian sum, oriented so that it
// right-multiplies a residual matrix with rows matching R's columns.
template <class S, class DR, class DX>
void st_rows(const Eigen::MatrixBase<DR>& R, double sigma, double theta,
             const Eigen::MatrixBase<DX>& X_, Mat<S>* B) {
  constexpr int kappa = scalar_traits<S>::kappa;
  auto& X = as_lvalue(X_);
  const int n = int(R.rows()), w = int(R.cols());
  const double T = theta * std::sqrt(double(w)) * sigma;
  X.setZero();
  for (int t = 0; t < n; ++t) {
    double nrm = 0;
    for (int m = 0; m < w; ++m) nrm += abs2(R(t, m));
    nrm = std::sqrt(nrm);
    if (!(nrm > T)) continue;
    const double scale = 1.0 - T / nrm;
    X.row(t) = R.row(t) * S(real_of<S>(scale));
    if (B) {
      const double oc = T / (kappa * nrm * nrm * nrm);
      B->noalias() += (R.row(t).adjoint() * R.row(t)) * S(real_of<S>(oc));
      B->diagonal().array() += S(real_of<S>(scale));
    }
  }
}

// MMSE posterior mean on one group block; rows are scaled by the posterior activity
// weight. Divergence accumulated with the same orientation as st_rows.
template <class S, class DR, class DX>
void mmse_rows(const Eigen::MatrixBase<DR>& R, double sigma, const ShrinkageParams& p,
               const Eigen::MatrixBase<DX>& X_, Mat<S>* B) {
  auto& X = as_lvalue(X_);
  const int G = int(R.rows());
  const MmseStats st = mmse_stats(R, sigma, p);
  for (int t = 0; t < G; ++t) {
    const double s = p.theta3 * st.a * st.psi[t] - p.theta4;
    X.row(t) = R.row(t) * S(real_of<S>(s));
    if (B) {
      const double oc = p.theta3 * st.a * st.psi[t] * (1.0 - st.psi[t]) / st.c;
      B->noalias() += (R.row(t).adjoint() * R.row(t)) * S(real_of<S>(oc));
      B->diagonal().array() += S(real_of<S>(s));
    }
  }
}

}  // namespace detail

// --- per-group and per-vector entry points ----------------------------------------------

// Entrywise soft threshold on a column vector; returns the summed divergence in a 1x1
// onsager matrix.
template <class S>
ShrinkEval<S> st_scalar(const Vec<S>& r, double sigma, double theta) {
  detail::require_sigma(sigma);
  ShrinkEval<S> e;
  e.onsager = Mat<S>::Zero(1, 1);
  e.x.resize(r.size(), 1);
  detail::st_rows<S>(r, sigma, theta, e.x, &e.onsager);
  return e;
}

// Entrywise derivative of the scalar soft threshold (conjugate coordinate held fixed).
template <class S>
VecXd st_scalar_derivative(const Vec<S>& r, double sigma, double theta) {
  detail::require_sigma(sigma);
  constexpr int kappa = scalar_traits<S>::kappa;
  const double T = theta * sigma;
  VecXd d = VecXd::Zero(r.size());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    const double a = std::sqrt(abs2(r[t]));
    if (a > T) d[t] = 1.0 - (kappa == 2 ? T / (2.0 * a) : 0.0);
  }
  return d;
}

// Posterior mean for one scalar group (one user's delay hypotheses).
template <class S>
Vec<S> mmse_group_scalar(const Vec<S>& r, double sigma, const ShrinkageParams& p) {
  detail::require_sigma(sigma);
  p.validate();
  Vec<S> x(r.size());
  detail::mmse_rows<S>(r, sigma, p, x, nullptr);
  return x;
}

// Entrywise derivative of the scalar group posterior mean (diagonal of its Jacobian).
template <class S>
VecXd mmse_group_scalar_derivative(const Vec<S>& r, double sigma, const ShrinkageParams& p) {
  detail::require_sigma(sigma);
  p.validate();
  const detail::MmseStats st = detail::mmse_stats(r, sigma, p);
  VecXd d(r.size());
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    const double ps = st.psi[t];
    d[t] = p.theta3 * st.a * ps * (1.0 + abs2(r[t]) / st.c * (1.0 - ps)) - p.theta4;
  }
  return d;
}

// Row-wise soft threshold for the multi-antenna case; threshold theta sqrt(M) sigma.
template <class S>
ShrinkEval<S> st_vector(const Mat<S>& R, double sigma, double theta) {
  detail::require_sigma(sigma);
  ShrinkEval<S> e;
  e.onsager = Mat<S>::Zero(R.cols(), R.cols());
  e.x.resize(R.rows(), R.cols());
  detail::st_rows<S>(R, sigma, theta, e.x, &e.onsager);
  return e;
}

// Posterior mean for one vector group (rows are delay hypotheses, columns antennas).
template <class S>
Mat<S> mmse_vector(const Mat<S>& R, double sigma, const ShrinkageParams& p) {
  detail::require_sigma(sigma);
  p.validate();
  Mat<S> x(R.rows(), R.cols());
  detail::mmse_rows<S>(R, sigma, p, x, nullptr);
  return x;
}

// Per-row Jacobians of the vector posterior mean, entry (j, m) = d eta_j / d r_m.
template <class S>
std::vector<Mat<S>> mmse_vector_jacobian(const Mat<S>& R, double sigma,
                                         const ShrinkageParams& p) {
  detail::require_sigma(sigma);
  p.validate();
  const int G = int(R.rows()), w = int(R.cols());
  const detail::MmseStats st = detail::mmse_stats(R, sigma, p);
  std::vector<Mat<S>> J(G);
  for (int t = 0; t < G; ++t) {
    const double s = p.theta3 * st.a * st.psi[t] - p.theta4;
    const double oc = p.theta3 * st.a * st.psi[t] * (1.0 - st.psi[t]) / st.c;
    J[t] = (R.row(t).transpose() * R.row(t).conjugate()) * S(real_of<S>(oc));
    J[t].diagonal().array() += S(real_of<S>(s));
    (void)w;
  }
  return J;
}

// --- solver-facing dispatch --------------------------------------------------------------

// Apply a denoiser to a full coefficient matrix (expanded_dim rows, subnetwork width
// columns). group_size is consumed by the MMSE kinds only.
template <class S>
ShrinkEval<S> shrink_apply(const Mat<S>& R, double sigma, const ShrinkageParams& p,
                           int group_size) {
  detail::require_sigma(sigma);
  p.validate();
  const int w = int(R.cols());
  if (!p.is_vector() && w != 1) throw ConfigError("scalar shrinkage expects one column");
  ShrinkEval<S> e;
  e.onsager = Mat<S>::Zero(w, w);
  e.x.resize(R.rows(), w);
  if (p.is_mmse()) {
    if (group_size < 1 || R.rows() % group_size != 0)
      throw ConfigError("shrink_apply: rows not a multiple of group_size");
    for (Eigen::Index g = 0; g < R.rows(); g += group_size)
      detail::mmse_rows<S>(R.middleRows(g, group_size), sigma, p,
                           e.x.middleRows(g, group_size), &e.onsager);
  } else {
    detail::st_rows<S>(R, sigma, p.theta, e.x, &e.onsager);
  }
  return e;
}

// In-place variant of shrink_apply for pre-sized outputs (used on column blocks of a
// batch). B is reset and receives this block's divergence alone.
template <class S>
void shrink_apply_into(const Eigen::Ref<const Mat<S>>& R, double sigma,
                       const ShrinkageParams& p, int group_size, Eigen::Ref<Mat<S>> X,
                       Mat<S>& B) {
  detail::require_sigma(sigma);
  const int w = int(R.cols());
  B.setZero(w, w);
  if (p.is_mmse()) {
    for (Eigen::Index g = 0; g < R.rows(); g += group_size)
      detail::mmse_rows<S>(R.middleRows(g, group_size), sigma, p,
                           X.middleRows(g, group_size), &B);
  } else {
    detail::st_rows<S>(R, sigma, p.theta, X, &B);
  }
}

// Backward companion of shrink_apply. U is the loss gradient with respect to the output
// (for the complex field: 2 dL/d conj(out)); writes the gradient with respect to R into
// *Gr when given (must be pre-sized), and accumulates parameter gradients into
// theta_grad using the flat slot order.
template <class S>
void shrink_vjp(const Eigen::Ref<const Mat<S>>& R, double sigma, const ShrinkageParams& p,
                int group_size, const Eigen::Ref<const Mat<S>>& U, Eigen::Ref<Mat<S>>* Gr,
                Eigen::Vector4d& theta_grad) {
  detail::require_sigma(sigma);
  p.validate();
  constexpr int kappa = scalar_traits<S>::kappa;
  const int w = int(R.cols());
  if (Gr) Gr->setZero();
  if (!p.is_mmse()) {
    const double T = p.theta * std::sqrt(double(w)) * sigma;
    double dth = 0;
    for (Eigen::Index t = 0; t < R.rows(); ++t) {
      double nrm = 0;
      for (int m = 0; m < w; ++m) nrm += abs2(R(t, m));
      nrm = std::sqrt(nrm);
      if (!(nrm > T)) continue;
      double rho0 = 0; // Re <u_t, r_t>
      for (int m = 0; m < w; ++m) {
        if constexpr (scalar_traits<S>::is_complex)
          rho0 += (std::conj(U(t, m)) * R(t, m)).real();
        else
          rho0 += double(U(t, m)) * R(t, m);
      }
      const double scale = 1.0 - T / nrm;
      if (Gr)
        Gr->row(t) = U.row(t) * S(real_of<S>(scale)) +
                     R.row(t) * S(real_of<S>(T / (nrm * nrm * nrm) * rho0));
      dth -= std::sqrt(double(w)) * sigma / nrm * rho0;
    }
    theta_grad[0] += dth;
    return;
  }
  if (group_size < 1 || R.rows() % group_size != 0)
    throw ConfigError("shrink_vjp: rows not a multiple of group_size");
  const double s2 = sigma * sigma;
  for (Eigen::Index g = 0; g < R.rows(); g += group_size) {
    const auto rg = R.middleRows(g, group_size);
    const auto ug = U.middleRows(g, group_size);
    const detail::MmseStats st = detail::mmse_stats(rg, sigma, p);
    const int G = group_size;
    Eigen::ArrayXd rho0(G);
    for (int t = 0; t < G; ++t) {
      double acc = 0;
      for (int m = 0; m < w; ++m) {
        if constexpr (scalar_traits<S>::is_complex)
          acc += (std::conj(ug(t, m)) * rg(t, m)).real();
        else
          acc += double(ug(t, m)) * rg(t, m);
      }
      rho0[t] = acc;
    }
    const Eigen::ArrayXd rho = double(kappa) * rho0;
    const double psirho = (st.psi * rho).sum();
    if (Gr) {
      for (int t = 0; t < G; ++t) {
        const double s = p.theta3 * st.a * st.psi[t] - p.theta4;
        const double oc = p.theta3 * st.a / st.c * st.psi[t] * (rho[t] - psirho);
        Gr->row(g + t) = ug.row(t) * S(real_of<S>(s)) + rg.row(t) * S(real_of<S>(oc));
      }
    }
    // parameter gradients
    const double psirho0 = (st.psi * rho0).sum();
    theta_grad[2] += st.a * psirho0; // theta3
    theta_grad[3] -= rho0.sum();     // theta4
    const double P = 1.0 + p.theta1 / s2;
    const double pf = std::exp(0.5 * kappa * w * std::log(P) - st.logS);
    theta_grad[1] -= p.theta3 * st.a * pf * psirho0; // theta2
    const double aprime = s2 / ((p.theta1 + s2) * (p.theta1 + s2));
    const Eigen::ArrayXd xiprime = st.xi * (s2 * s2 / (p.theta1 * p.theta1 * st.c));
    const double SpS =
        (st.psi * xiprime).sum() + st.bfrac * 0.5 * kappa * w / (s2 + p.theta1);
    double d1 = 0;
    for (int t = 0; t < G; ++t)
      d1 += rho0[t] * p.theta3 * st.psi[t] * (aprime + st.a * (xiprime[t] - SpS));
    theta_grad[0] += d1; // theta1
  }
}

}  // namespace gfamp
