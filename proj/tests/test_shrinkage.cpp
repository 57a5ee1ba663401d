#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "gfamp/rng.hpp"
#include "gfamp/shrinkage.hpp"
#include "oracles.hpp"

using namespace gfamp;
using cd = std::complex<double>;

namespace {

// spread draw: mix of prior-scale and wide values so tails get exercised
double spread_draw(Rng& rng, double scale) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double w = u(rng) < 0.3 ? 3.0 : 1.0;
  return scale * w * randn(rng);
}

template <class S>
Mat<S> random_group(Rng& rng, int G, int w, double scale) {
  Mat<S> r(G, w);
  for (int t = 0; t < G; ++t)
    for (int m = 0; m < w; ++m) {
      if constexpr (scalar_traits<S>::is_complex)
        r(t, m) = S(spread_draw(rng, scale), spread_draw(rng, scale));
      else
        r(t, m) = S(spread_draw(rng, scale));
    }
  return r;
}

ShrinkageParams mmse_params(ShrinkKind k, int G, double p_row, double th1) {
  ShrinkageParams p;
  p.kind = k;
  p.theta1 = th1;
  p.theta2 = (1.0 - G * p_row) / p_row;
  p.theta3 = 1.0;
  p.theta4 = 0.0;
  return p;
}

}  // namespace

TEST_CASE("scalar soft threshold: closed form and divergence") {
  Vec<double> r(5);
  r << 3.0, -3.0, 0.5, 1.0, -0.2;
  auto e = st_scalar<double>(r, 1.0, 1.0);
  CHECK(e.x(0, 0) == doctest::Approx(2.0));
  CHECK(e.x(1, 0) == doctest::Approx(-2.0));
  CHECK(e.x(2, 0) == 0.0);
  CHECK(e.x(3, 0) == 0.0); // exact boundary takes the zero branch
  CHECK(e.x(4, 0) == 0.0);
  // real-field divergence is 1 per surviving entry
  CHECK(e.onsager(0, 0) == doctest::Approx(2.0));
  VecXd d = st_scalar_derivative<double>(r, 1.0, 1.0);
  CHECK(d[0] == 1.0);
  CHECK(d[2] == 0.0);
  CHECK(d[3] == 0.0);

  CHECK_THROWS_AS(st_scalar<double>(r, 0.0, 1.0), ConfigError);
  // theta = 0 is the identity
  auto id = st_scalar<double>(r, 1.0, 0.0);
  CHECK((id.x.col(0) - r).norm() == 0.0);
  CHECK(id.onsager(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("complex soft threshold: Wirtinger divergence against finite differences") {
  Rng rng = make_stream(21, "st_c", 0);
  const double sigma = 0.7, theta = 0.9, T = theta * sigma;
  Vec<cd> r(6);
  for (int i = 0; i < 6; ++i) r[i] = cd(2.0 * randn(rng), 2.0 * randn(rng));
  auto e = st_scalar<cd>(r, sigma, theta);
  VecXd d = st_scalar_derivative<cd>(r, sigma, theta);

  double div_sum = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double a = std::abs(r[i]);
    if (a <= T) {
      CHECK(d[i] == 0.0);
      continue;
    }
    CHECK(d[i] == doctest::Approx(1.0 - T / (2.0 * a)));
    // u_x + v_y = 2 Re d eta / d r
    const double eps = 1e-6;
    auto ux = oracle::central_diff(
        [&](double x) {
          cd z(x, r[i].imag());
          double az = std::abs(z);
          return az > T ? ((1.0 - T / az) * z).real() : 0.0;
        },
        r[i].real(), eps);
    auto vy = oracle::central_diff(
        [&](double y) {
          cd z(r[i].real(), y);
          double az = std::abs(z);
          return az > T ? ((1.0 - T / az) * z).imag() : 0.0;
        },
        r[i].imag(), eps);
    CHECK(std::abs(0.5 * (ux + vy) - d[i]) < 1e-6);
    div_sum += d[i];
  }
  CHECK(std::abs(e.onsager(0, 0).real() - div_sum) < 1e-12);
  CHECK(std::abs(e.onsager(0, 0).imag()) < 1e-12);
}

TEST_CASE("vector soft threshold: row norms and Jacobian sum") {
  Rng rng = make_stream(22, "st_v", 0);
  const int n = 8, w = 3;
  const double sigma = 0.5, theta = 1.1;
  Mat<double> R = random_group<double>(rng, n, w, 1.0);
  auto e = st_vector<double>(R, sigma, theta);
  const double T = theta * std::sqrt(double(w)) * sigma;
  for (int t = 0; t < n; ++t) {
    double nrm = R.row(t).norm();
    if (nrm <= T)
      CHECK(e.x.row(t).norm() == 0.0);
    else
      CHECK((e.x.row(t) - R.row(t) * (1.0 - T / nrm)).norm() < 1e-14);
  }
  // onsager equals the transposed sum of per-row Jacobians, by finite differences
  Mat<double> Bfd = Mat<double>::Zero(w, w);
  const double eps = 1e-6;
  for (int t = 0; t < n; ++t)
    for (int a = 0; a < w; ++a)
      for (int b = 0; b < w; ++b) {
        auto f = [&](double v) {
          Mat<double> Rp = R;
          Rp(t, b) = v;
          double nrm = Rp.row(t).norm();
          return nrm > T ? (1.0 - T / nrm) * Rp(t, a) : 0.0;
        };
        Bfd(b, a) += oracle::central_diff(f, R(t, b), eps);
      }
  CHECK((e.onsager - Bfd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("group MMSE matches the quadrature posterior mean, real field") {
  Rng rng = make_stream(23, "mmse_r", 0);
  const double th1 = 0.8, sigma = 0.5, nvar = sigma * sigma;
  for (int G : {1, 2, 4}) {
    const double p_row = 0.2 / G;
    ShrinkageParams p = mmse_params(ShrinkKind::group_mmse, G, p_row, th1);
    for (int trial = 0; trial < 25; ++trial) {
      Vec<double> r = random_group<double>(rng, G, 1, std::sqrt(th1 + nvar)).col(0);
      Vec<double> got = mmse_group_scalar<double>(r, sigma, p);
      Eigen::MatrixXd want = oracle::bg_group_posterior_mean(r, p_row, th1, nvar, 48);
      CHECK((got - want.col(0)).norm() <= 1e-6 * want.col(0).norm() + 1e-10);
    }
  }
}

TEST_CASE("group MMSE matches the quadrature posterior mean, complex field") {
  Rng rng = make_stream(24, "mmse_c", 0);
  const double th1 = 1.2, sigma = 0.6, nvar = sigma * sigma;
  for (int G : {1, 2}) {
    const double p_row = 0.15 / G;
    ShrinkageParams p = mmse_params(ShrinkKind::group_mmse, G, p_row, th1);
    for (int trial = 0; trial < 12; ++trial) {
      Vec<cd> r = random_group<cd>(rng, G, 1, std::sqrt((th1 + nvar) / 2)).col(0);
      Vec<cd> got = mmse_group_scalar<cd>(r, sigma, p);
      // flatten to real coordinates; per-part variances are halved
      Eigen::MatrixXd rows(G, 2);
      for (int t = 0; t < G; ++t) rows.row(t) = oracle::flatten_row(Eigen::RowVectorXcd::Constant(1, r[t])).transpose();
      Eigen::MatrixXd want = oracle::bg_group_posterior_mean(rows, p_row, th1 / 2, nvar / 2, 48);
      double err = 0, ref = 0;
      for (int t = 0; t < G; ++t) {
        cd w(want(t, 0), want(t, 1));
        err += std::norm(got[t] - w);
        ref += std::norm(w);
      }
      CHECK(std::sqrt(err) <= 1e-6 * std::sqrt(ref) + 1e-10);
    }
  }
}

TEST_CASE("vector MMSE matches the quadrature posterior mean") {
  Rng rng = make_stream(25, "mmse_v", 0);
  const double th1 = 0.9, sigma = 0.45, nvar = sigma * sigma;

  // real field, M = 2, G in {1, 2}
  for (int G : {1, 2}) {
    const double p_row = 0.2 / G;
    ShrinkageParams p = mmse_params(ShrinkKind::vector_mmse, G, p_row, th1);
    for (int trial = 0; trial < 10; ++trial) {
      Mat<double> R = random_group<double>(rng, G, 2, std::sqrt(th1 + nvar));
      Mat<double> got = mmse_vector<double>(R, sigma, p);
      Eigen::MatrixXd want = oracle::bg_group_posterior_mean(R, p_row, th1, nvar, 48);
      CHECK((got - want).norm() <= 1e-4 * want.norm() + 1e-10);
    }
  }

  // complex field, M = 2, G = 1: four real dimensions
  {
    const double p_row = 0.12;
    ShrinkageParams p = mmse_params(ShrinkKind::vector_mmse, 1, p_row, th1);
    for (int trial = 0; trial < 6; ++trial) {
      Mat<cd> R = random_group<cd>(rng, 1, 2, std::sqrt((th1 + nvar) / 2));
      Mat<cd> got = mmse_vector<cd>(R, sigma, p);
      Eigen::MatrixXd rows(1, 4);
      rows.row(0) = oracle::flatten_row(R.row(0)).transpose();
      Eigen::MatrixXd want = oracle::bg_group_posterior_mean(rows, p_row, th1 / 2, nvar / 2, 32);
      Eigen::RowVectorXcd w = oracle::unflatten_row(want.row(0).transpose());
      CHECK((got.row(0) - w).norm() <= 1e-4 * w.norm() + 1e-10);
    }
  }

  // complex M = 1 vector kind agrees with the scalar group kind exactly
  {
    ShrinkageParams pv = mmse_params(ShrinkKind::vector_mmse, 2, 0.08, th1);
    ShrinkageParams ps = pv;
    ps.kind = ShrinkKind::group_mmse;
    Mat<cd> R = random_group<cd>(rng, 2, 1, 1.0);
    Mat<cd> a = mmse_vector<cd>(R, sigma, pv);
    Vec<cd> b = mmse_group_scalar<cd>(R.col(0), sigma, ps);
    CHECK((a.col(0) - b).norm() == 0.0);
  }
}

TEST_CASE("MMSE derivatives match finite differences") {
  Rng rng = make_stream(26, "mmse_d", 0);
  const double sigma = 0.55;
  ShrinkageParams p = mmse_params(ShrinkKind::group_mmse, 2, 0.07, 1.1);
  p.theta3 = 0.9;
  p.theta4 = 0.05;

  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    Vec<double> r = random_group<double>(rng, 2, 1, 1.2).col(0);
    VecXd d = mmse_group_scalar_derivative<double>(r, sigma, p);
    for (int t = 0; t < 2; ++t) {
      auto f = [&](double v) {
        Vec<double> rp = r;
        rp[t] = v;
        return mmse_group_scalar<double>(rp, sigma, p)[t];
      };
      double fd = oracle::central_diff(f, r[t], 1e-6);
      CHECK(std::abs(d[t] - fd) < 1e-5 * (1.0 + std::abs(fd)));
      ++checked;
    }
  }
  CHECK(checked >= 100);

  // complex diagonal derivative via the Wirtinger identity u_x + v_y = 2 Re deta/dr
  ShrinkageParams pc = mmse_params(ShrinkKind::group_mmse, 2, 0.07, 1.1);
  for (int trial = 0; trial < 20; ++trial) {
    Vec<cd> r = random_group<cd>(rng, 2, 1, 0.9).col(0);
    VecXd d = mmse_group_scalar_derivative<cd>(r, sigma, pc);
    for (int t = 0; t < 2; ++t) {
      auto ux = oracle::central_diff(
          [&](double x) {
            Vec<cd> rp = r;
            rp[t] = cd(x, r[t].imag());
            return mmse_group_scalar<cd>(rp, sigma, pc)[t].real();
          },
          r[t].real(), 1e-6);
      auto vy = oracle::central_diff(
          [&](double y) {
            Vec<cd> rp = r;
            rp[t] = cd(r[t].real(), y);
            return mmse_group_scalar<cd>(rp, sigma, pc)[t].imag();
          },
          r[t].imag(), 1e-6);
      CHECK(std::abs(0.5 * (ux + vy) - d[t]) < 1e-5 * (1.0 + std::abs(d[t])));
    }
  }
}

TEST_CASE("vector MMSE per-row Jacobian matches finite differences") {
  Rng rng = make_stream(27, "mmse_j", 0);
  const double sigma = 0.5;
  ShrinkageParams p = mmse_params(ShrinkKind::vector_mmse, 2, 0.08, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mat<double> R = random_group<double>(rng, 2, 2, 1.1);
    auto J = mmse_vector_jacobian<double>(R, sigma, p);
    for (int t = 0; t < 2; ++t)
      for (int m = 0; m < 2; ++m)
        for (int j = 0; j < 2; ++j) {
          auto f = [&](double v) {
            Mat<double> Rp = R;
            Rp(t, m) = v;
            return mmse_vector<double>(Rp, sigma, p)(t, j);
          };
          double fd = oracle::central_diff(f, R(t, m), 1e-6);
          CHECK(std::abs(J[t](j, m) - fd) < 1e-5 * (1.0 + std::abs(fd)));
        }
  }

  // theta3 = 0 reduces every kind to the linear leak -theta4 r
  ShrinkageParams lin = p;
  lin.theta3 = 0.0;
  lin.theta4 = 0.3;
  Mat<double> R = random_group<double>(rng, 4, 2, 1.0);
  Mat<double> got = mmse_vector<double>(R, sigma, lin);
  CHECK((got + 0.3 * R).norm() < 1e-14);
  auto J = mmse_vector_jacobian<double>(R, sigma, lin);
  CHECK((J[0] + 0.3 * Mat<double>::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("phase equivariance in the complex field") {
  Rng rng = make_stream(28, "phase", 0);
  const double sigma = 0.6;
  const cd ph = std::polar(1.0, 1.234);
  Vec<cd> r = random_group<cd>(rng, 4, 1, 1.0).col(0);

  auto e1 = st_scalar<cd>(r, sigma, 0.8);
  auto e2 = st_scalar<cd>(Vec<cd>(r * ph), sigma, 0.8);
  CHECK((e2.x - e1.x * ph).norm() < 1e-12);

  ShrinkageParams p = mmse_params(ShrinkKind::group_mmse, 4, 0.04, 1.0);
  Vec<cd> m1 = mmse_group_scalar<cd>(r, sigma, p);
  Vec<cd> m2 = mmse_group_scalar<cd>(Vec<cd>(r * ph), sigma, p);
  CHECK((m2 - m1 * ph).norm() < 1e-12);

  Mat<cd> R = random_group<cd>(rng, 2, 3, 1.0);
  ShrinkageParams pv = mmse_params(ShrinkKind::vector_mmse, 2, 0.08, 1.0);
  Mat<cd> v1 = mmse_vector<cd>(R, sigma, pv);
  Mat<cd> v2 = mmse_vector<cd>(Mat<cd>(R * ph), sigma, pv);
  CHECK((v2 - v1 * ph).norm() < 1e-12);
}

TEST_CASE("MMSE risk beats the best soft threshold on prior draws") {
  Rng rng = make_stream(29, "risk", 0);
  const int G = 2, n = 20000;
  const double p_row = 0.06, th1 = 1.0, sigma = 0.4;
  ShrinkageParams pm = mmse_params(ShrinkKind::group_mmse, G, p_row, th1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  Vec<double> x0(n * G), r(n * G);
  for (int g = 0; g < n; ++g) {
    double roll = u(rng);
    int act = roll < G * p_row ? int(roll / p_row) : -1;
    for (int t = 0; t < G; ++t) {
      double xv = (t == act) ? std::sqrt(th1) * randn(rng) : 0.0;
      x0[g * G + t] = xv;
      r[g * G + t] = xv + sigma * randn(rng);
    }
  }
  Mat<double> R = r;
  auto em = shrink_apply<double>(R, sigma, pm, G);
  const double mse_m = (em.x.col(0) - x0).squaredNorm() / n;

  double best_st = 1e300;
  for (double th = 0.25; th <= 3.0; th += 0.125) {
    auto es = st_scalar<double>(r, sigma, th);
    best_st = std::min(best_st, (es.x.col(0) - x0).squaredNorm() / n);
  }
  CHECK(mse_m < best_st);
}

TEST_CASE("shrink_apply dispatch, grouping and the in-place variant") {
  Rng rng = make_stream(30, "apply", 0);
  const double sigma = 0.5;
  const int G = 3;
  ShrinkageParams p = mmse_params(ShrinkKind::group_mmse, G, 0.05, 1.0);

  Mat<double> R = random_group<double>(rng, 2 * G, 1, 1.0);
  auto e = shrink_apply<double>(R, sigma, p, G);
  // blockwise application agrees
  for (int g = 0; g < 2; ++g) {
    Vec<double> blk = R.col(0).segment(g * G, G);
    Vec<double> want = mmse_group_scalar<double>(blk, sigma, p);
    CHECK((e.x.col(0).segment(g * G, G) - want).norm() == 0.0);
  }
  // onsager is the transposed sum of per-row Jacobians
  ShrinkageParams pv = p;
  pv.kind = ShrinkKind::vector_mmse;
  Mat<double> Rv = random_group<double>(rng, 2 * G, 2, 1.0);
  auto ev = shrink_apply<double>(Rv, sigma, pv, G);
  Mat<double> Bsum = Mat<double>::Zero(2, 2);
  for (int g = 0; g < 2; ++g) {
    auto J = mmse_vector_jacobian<double>(Rv.middleRows(g * G, G), sigma, pv);
    for (auto& j : J) Bsum += j.transpose();
  }
  CHECK((ev.onsager - Bsum).norm() < 1e-13);

  // in-place variant matches
  Mat<double> X(Rv.rows(), Rv.cols()), B;
  shrink_apply_into<double>(Rv, sigma, pv, G, X, B);
  CHECK((X - ev.x).norm() == 0.0);
  CHECK((B - ev.onsager).norm() == 0.0);

  CHECK_THROWS_AS(shrink_apply<double>(Rv, sigma, p, G), ConfigError); // scalar kind, 2 cols
  Mat<double> R4 = random_group<double>(rng, 4, 1, 1.0);
  CHECK_THROWS_AS(shrink_apply<double>(R4, sigma, p, 3), ConfigError); // 4 rows, group 3

  // zero input maps to zero when theta4 = 0
  Mat<double> Z = Mat<double>::Zero(2 * G, 1);
  CHECK(shrink_apply<double>(Z, sigma, p, G).x.norm() == 0.0);
  CHECK(st_scalar<double>(Vec<double>::Zero(5), sigma, 1.0).x.norm() == 0.0);
}

TEST_CASE("shrink_vjp agrees with finite differences of a scalar functional") {
  Rng rng = make_stream(31, "vjp", 0);
  const double sigma = 0.5;
  const int G = 2, w = 2, n = 2 * G;

  auto functional = [&](const Mat<double>& R, const Mat<double>& U, const ShrinkageParams& p) {
    auto e = shrink_apply<double>(R, sigma, p, G);
    return (U.array() * e.x.array()).sum();
  };

  for (ShrinkKind kind : {ShrinkKind::vector_mmse, ShrinkKind::vector_st}) {
    ShrinkageParams p = mmse_params(kind, G, 0.08, 1.1);
    p.theta3 = 0.85;
    p.theta4 = 0.04;
    p.theta = 0.7;
    for (int trial = 0; trial < 8; ++trial) {
      Mat<double> R = random_group<double>(rng, n, w, 1.0);
      Mat<double> U = random_group<double>(rng, n, w, 1.0);
      Mat<double> Gr(n, w);
      Eigen::Ref<Mat<double>> gr_ref = Gr;
      Eigen::Vector4d tg = Eigen::Vector4d::Zero();
      shrink_vjp<double>(R, sigma, p, G, U, &gr_ref, tg);

      for (int t = 0; t < n; ++t)
        for (int m = 0; m < w; ++m) {
          auto f = [&](double v) {
            Mat<double> Rp = R;
            Rp(t, m) = v;
            return functional(Rp, U, p);
          };
          double fd = oracle::central_diff(f, R(t, m), 1e-6);
          CHECK(std::abs(Gr(t, m) - fd) < 1e-5 * (1.0 + std::abs(fd)));
        }
      for (int slot = 0; slot < p.param_count(); ++slot) {
        auto f = [&](double v) {
          ShrinkageParams pp = p;
          pp.set(slot, v);
          return functional(R, U, pp);
        };
        double fd = oracle::central_diff(f, p.get(slot), 1e-6);
        CHECK(std::abs(tg[slot] - fd) < 1e-5 * (1.0 + std::abs(fd)));
      }
    }
  }

  // complex field: Gr = 2 df/dconj(r), so dRe = Re Gr and dIm = Im Gr
  ShrinkageParams pc = mmse_params(ShrinkKind::vector_mmse, G, 0.08, 1.0);
  auto functional_c = [&](const Mat<cd>& R, const Mat<cd>& U, const ShrinkageParams& p) {
    auto e = shrink_apply<cd>(R, sigma, p, G);
    double acc = 0;
    for (int i = 0; i < R.rows(); ++i)
      for (int j = 0; j < R.cols(); ++j) acc += (std::conj(U(i, j)) * e.x(i, j)).real();
    return acc;
  };
  for (int trial = 0; trial < 4; ++trial) {
    Mat<cd> R = random_group<cd>(rng, n, w, 0.8);
    Mat<cd> U = random_group<cd>(rng, n, w, 0.8);
    Mat<cd> Gr(n, w);
    Eigen::Ref<Mat<cd>> gr_ref = Gr;
    Eigen::Vector4d tg = Eigen::Vector4d::Zero();
    shrink_vjp<cd>(R, sigma, pc, G, U, &gr_ref, tg);
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < w; ++m) {
        auto fre = [&](double v) {
          Mat<cd> Rp = R;
          Rp(t, m) = cd(v, R(t, m).imag());
          return functional_c(Rp, U, pc);
        };
        auto fim = [&](double v) {
          Mat<cd> Rp = R;
          Rp(t, m) = cd(R(t, m).real(), v);
          return functional_c(Rp, U, pc);
        };
        double fdr = oracle::central_diff(fre, R(t, m).real(), 1e-6);
        double fdi = oracle::central_diff(fim, R(t, m).imag(), 1e-6);
        CHECK(std::abs(Gr(t, m).real() - fdr) < 1e-5 * (1.0 + std::abs(fdr)));
        CHECK(std::abs(Gr(t, m).imag() - fdi) < 1e-5 * (1.0 + std::abs(fdi)));
      }
    for (int slot = 0; slot < 4; ++slot) {
      auto f = [&](double v) {
        ShrinkageParams pp = pc;
        pp.set(slot, v);
        return functional_c(R, U, pp);
      };
      double fd = oracle::central_diff(f, pc.get(slot), 1e-6);
      CHECK(std::abs(tg[slot] - fd) < 1e-5 * (1.0 + std::abs(fd)));
    }
  }
}

TEST_CASE("oracle defaults and validation") {
  SystemConfig cfg;
  cfg.num_users = 100;
  cfg.pilot_len = 40;
  cfg.guard_len = 3;
  cfg.max_delay = 3;
  cfg.active_prob = 0.1;
  ShrinkageParams p = ShrinkageParams::mmse_oracle(ShrinkKind::group_mmse, cfg);
  CHECK(p.theta1 == doctest::Approx(1.0));
  CHECK(p.theta2 == doctest::Approx(36.0)); // (1 - 0.1) / 0.025
  CHECK(p.theta3 == 1.0);
  CHECK(p.theta4 == 0.0);

  ShrinkageParams bad = p;
  bad.theta1 = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ShrinkageParams bad2 = ShrinkageParams::soft_threshold(ShrinkKind::scalar_st, -0.1);
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
  CHECK(ShrinkageParams::soft_threshold(ShrinkKind::scalar_st).theta == doctest::Approx(1.14));
}
