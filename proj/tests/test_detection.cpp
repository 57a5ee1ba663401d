#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "gfamp/detection.hpp"

using namespace gfamp;
using cd = std::complex<double>;

namespace {

std::vector<UserRecord> synthetic_pool(int n_act, int n_inact, double sep,
                                       std::uint64_t seed) {
  Rng rng = make_stream(seed, "pool", 0);
  std::vector<UserRecord> pool;
  for (int i = 0; i < n_act; ++i) {
    UserRecord u;
    u.truth_active = 1;
    u.truth_delay = 0;
    u.est_delay = 0;
    u.score = std::abs(sep + 0.5 * randn(rng));
    pool.push_back(u);
  }
  for (int i = 0; i < n_inact; ++i) {
    UserRecord u;
    u.truth_active = 0;
    u.truth_delay = -1;
    u.est_delay = 0;
    u.score = std::abs(0.5 * randn(rng));
    pool.push_back(u);
  }
  return pool;
}

}  // namespace

TEST_CASE("group refinement keeps one row per group") {
  Mat<double> X(4, 1);
  X << 0.0, 2.0, -1.0, 0.0;
  Mat<double> r = group_refine(X, 4);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(1, 0) == 2.0);
  CHECK(r(2, 0) == 0.0);
  CHECK(r(3, 0) == 0.0);

  // two groups of two, tie inside the second group goes to the smaller delay
  Mat<double> X2(4, 2);
  X2 << 1.0, 0.0,
        3.0, 0.0,
        0.5, 0.5,
        0.5, 0.5;
  Mat<double> r2 = group_refine(X2, 2);
  CHECK(r2.row(0).norm() == 0.0);
  CHECK((r2.row(1) - X2.row(1)).norm() == 0.0);
  CHECK((r2.row(2) - X2.row(2)).norm() == 0.0);
  CHECK(r2.row(3).norm() == 0.0);

  Mat<double> Z = Mat<double>::Zero(4, 1);
  Mat<double> rz = group_refine(Z, 2);
  CHECK(rz.norm() == 0.0);

  CHECK_THROWS_AS(group_refine(X, 3), ConfigError);
}

TEST_CASE("refinement is idempotent and scale-equivariant") {
  Rng rng = make_stream(41, "gr", 0);
  Mat<cd> X(12, 2);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = cd(randn(rng), randn(rng));
  Mat<cd> r1 = group_refine(X, 3);
  CHECK((group_refine(r1, 3) - r1).norm() == 0.0);
  Mat<cd> r2 = group_refine(Mat<cd>(X * cd(2.5)), 3);
  CHECK((r2 - r1 * cd(2.5)).norm() < 1e-12);
  // exactly one nonzero row per group
  for (int g = 0; g < 4; ++g) {
    int nz = 0;
    for (int t = 0; t < 3; ++t)
      if (r1.row(3 * g + t).norm() > 0) ++nz;
    CHECK(nz == 1);
  }
}

TEST_CASE("detect: threshold is strict and scores are row norms") {
  Mat<double> X(4, 1);
  X << 0.0, 2.0, 0.0, 0.0; // two groups of two: scores 2 and 0
  DetectionResult d = detect(X, 2, 0.0);
  REQUIRE(d.active.size() == 2);
  CHECK(d.active[0] == 1);
  CHECK(d.delay[0] == 1);
  CHECK(d.score[0] == doctest::Approx(2.0));
  CHECK(d.active[1] == 0); // score 0 is not strictly above 0
  CHECK(d.delay[1] == -1);

  DetectionResult d2 = detect(X, 2, 2.0);
  CHECK(d2.active[0] == 0); // exactly at the threshold, not strictly above
  DetectionResult d3 = detect(X, 2, 1.9);
  CHECK(d3.active[0] == 1);
}

TEST_CASE("metrics: hand-checked ratios and the delay-error convention") {
  std::vector<UserRecord> pool;
  auto add = [&](int act, int tdel, int edel, double score) {
    UserRecord u;
    u.truth_active = std::uint8_t(act);
    u.truth_delay = tdel;
    u.est_delay = edel;
    u.score = score;
    pool.push_back(u);
  };
  // 5 active: detected-right, detected-wrong-delay, missed, detected-right, missed
  add(1, 0, 0, 2.0);
  add(1, 1, 0, 2.0);
  add(1, 0, 0, 0.1);
  add(1, 2, 2, 1.5);
  add(1, 1, 1, 0.2);
  // 4 inactive: one false alarm at q = 1.0
  add(0, -1, 0, 0.4);
  add(0, -1, 1, 1.2);
  add(0, -1, 0, 0.0);
  add(0, -1, 2, 0.9);

  MetricReport m = metrics_at(pool, 1.0);
  CHECK(m.n_active == 5);
  CHECK(m.n_inactive == 4);
  CHECK(*m.missed_detection == doctest::Approx(2.0 / 5.0));
  CHECK(*m.false_alarm == doctest::Approx(1.0 / 4.0));
  // delay errors: the wrong-delay detection plus both missed actives
  CHECK(*m.delay_error == doctest::Approx(3.0 / 5.0));

  // all-active pool leaves the false-alarm ratio absent
  std::vector<UserRecord> only_act(pool.begin(), pool.begin() + 5);
  MetricReport ma = metrics_at(only_act, 1.0);
  CHECK(!ma.false_alarm.has_value());
  CHECK(ma.missed_detection.has_value());
  // all-inactive pool leaves the active ratios absent
  std::vector<UserRecord> only_in(pool.begin() + 5, pool.end());
  MetricReport mi = metrics_at(only_in, 1.0);
  CHECK(!mi.missed_detection.has_value());
  CHECK(!mi.delay_error.has_value());
  CHECK(mi.false_alarm.has_value());

  // monotone in the threshold
  MetricReport lo = metrics_at(pool, 0.05);
  MetricReport hi = metrics_at(pool, 1.6);
  CHECK(*lo.missed_detection <= *m.missed_detection);
  CHECK(*m.missed_detection <= *hi.missed_detection);
  CHECK(*lo.false_alarm >= *m.false_alarm);
  CHECK(*m.false_alarm >= *hi.false_alarm);
}

TEST_CASE("pool_records carries truth and argmax through") {
  SystemConfig c;
  c.num_users = 3;
  c.pilot_len = 4;
  c.guard_len = 1;
  c.max_delay = 1;
  c.field = Field::real;
  GroundTruth<double> t;
  t.active = {1, 0, 1};
  t.delay = {1, -1, 0};
  t.channels = Mat<double>::Zero(3, 1);
  t.channels(0, 0) = 2.0;
  t.channels(2, 0) = -1.5;
  Mat<double> x0 = effective_channel(c, t);
  Mat<double> refined = group_refine(x0, 2);
  std::vector<UserRecord> pool;
  pool_records(refined, t, 2, pool);
  REQUIRE(pool.size() == 3);
  CHECK(pool[0].truth_active == 1);
  CHECK(pool[0].truth_delay == 1);
  CHECK(pool[0].est_delay == 1);
  CHECK(pool[0].score == doctest::Approx(2.0));
  CHECK(pool[1].truth_active == 0);
  CHECK(pool[1].score == 0.0);
  CHECK(pool[1].est_delay == 0); // argmax defined even without detection
  CHECK(pool[2].est_delay == 0);
  CHECK(pool[2].score == doctest::Approx(1.5));
}

TEST_CASE("threshold calibration hits the target false alarm") {
  auto pool = synthetic_pool(400, 4000, 3.0, 61);
  for (double eps : {0.01, 0.1, 0.3}) {
    const double q = calibrate_threshold(pool, eps);
    MetricReport m = metrics_at(pool, q);
    // in-sample: at most eps, and within one score of it
    CHECK(*m.false_alarm <= eps + 1e-12);
    CHECK(*m.false_alarm >= eps - 1.0 / 4000.0 - 1e-12);
  }
  // held-out pool from the same distribution lands near the target
  auto held = synthetic_pool(400, 4000, 3.0, 62);
  const double q = calibrate_threshold(pool, 0.1);
  MetricReport m = metrics_at(held, q);
  CHECK(std::abs(*m.false_alarm - 0.1) < 0.025);

  CHECK_THROWS_AS(calibrate_threshold(pool, 0.0), ConfigError);
  CHECK_THROWS_AS(calibrate_threshold(pool, 1.0), ConfigError);
  std::vector<UserRecord> no_inact = synthetic_pool(5, 0, 3.0, 63);
  CHECK_THROWS_AS(calibrate_threshold(no_inact, 0.1), ConfigError);
}

TEST_CASE("roc sweep and interpolation") {
  auto pool = synthetic_pool(500, 5000, 2.0, 64);
  std::vector<double> qs;
  for (double q = 0.0; q <= 4.0; q += 0.25) qs.push_back(q);
  auto roc = roc_sweep(pool, qs);
  REQUIRE(roc.size() == qs.size());
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].threshold >= roc[i - 1].threshold);
    CHECK(roc[i].false_alarm <= roc[i - 1].false_alarm);
    CHECK(roc[i].missed_detection >= roc[i - 1].missed_detection);
  }
  // interpolation agrees with a direct evaluation at an interior level
  auto md = roc_md_at_fa(roc, 0.1);
  REQUIRE(md.has_value());
  const double q01 = calibrate_threshold(pool, 0.1);
  MetricReport direct = metrics_at(pool, q01);
  CHECK(std::abs(*md - *direct.missed_detection) < 0.05);
  // outside the covered range: nullopt
  CHECK(!roc_md_at_fa(roc, 1.5).has_value());
  auto roc1 = roc_sweep(pool, {1.0});
  CHECK(!roc_md_at_fa(roc1, roc1[0].false_alarm + 0.1).has_value());
  CHECK(roc_md_at_fa(roc1, roc1[0].false_alarm).has_value());
}
