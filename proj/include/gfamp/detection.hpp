#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "gfamp/signal_model.hpp"

namespace gfamp {

// Keep only the strongest row (squared L2 norm over antennas) inside each user group,
// zero the rest. Ties go to the smallest delay index.
template <class S>
Mat<S> group_refine(const Mat<S>& X, int group_size) {
  if (group_size < 1 || X.rows() % group_size != 0)
    throw ConfigError("group_refine: rows not a multiple of group_size");
  Mat<S> out = Mat<S>::Zero(X.rows(), X.cols());
  for (Eigen::Index g = 0; g < X.rows(); g += group_size) {
    int best = 0;
    double best_sq = -1;
    for (int t = 0; t < group_size; ++t) {
      const double sq = X.row(g + t).squaredNorm();
      if (sq > best_sq) {
        best_sq = sq;
        best = t;
      }
    }
    out.row(g + best) = X.row(g + best);
  }
  return out;
}

struct DetectionResult {
  std::vector<std::uint8_t> active;
  std::vector<int> delay;       // -1 when not detected
  std::vector<double> score;    // norm of the surviving row
  double threshold = 0;
};

// Declare user n active iff its refined-group score exceeds q_th (strictly).
template <class S>
DetectionResult detect(const Mat<S>& refined, int group_size, double q_th) {
  if (group_size < 1 || refined.rows() % group_size != 0)
    throw ConfigError("detect: rows not a multiple of group_size");
  const int N = int(refined.rows() / group_size);
  DetectionResult d;
  d.threshold = q_th;
  d.active.assign(std::size_t(N), 0);
  d.delay.assign(std::size_t(N), -1);
  d.score.assign(std::size_t(N), 0.0);
  for (int n = 0; n < N; ++n) {
    int best = 0;
    double best_sq = -1;
    for (int t = 0; t < group_size; ++t) {
      const double sq = refined.row(Eigen::Index(n) * group_size + t).squaredNorm();
      if (sq > best_sq) {
        best_sq = sq;
        best = t;
      }
    }
    d.score[std::size_t(n)] = std::sqrt(std::max(0.0, best_sq));
    if (d.score[std::size_t(n)] > q_th) {
      d.active[std::size_t(n)] = 1;
      d.delay[std::size_t(n)] = best;
    }
  }
  return d;
}

// One pooled (truth, score) record per user per sample; everything downstream (ROC,
// calibration, ratios) is computed from these.
struct UserRecord {
  std::uint8_t truth_active = 0;
  std::int32_t truth_delay = -1;
  std::int32_t est_delay = -1;  // argmax delay of the refined group, defined always
  double score = 0;
};

template <class S>
void pool_records(const Mat<S>& refined, const GroundTruth<S>& truth, int group_size,
                  std::vector<UserRecord>& out) {
  const int N = int(refined.rows() / group_size);
  for (int n = 0; n < N; ++n) {
    UserRecord u;
    u.truth_active = truth.active[std::size_t(n)];
    u.truth_delay = truth.delay[std::size_t(n)];
    int best = 0;
    double best_sq = -1;
    for (int t = 0; t < group_size; ++t) {
      const double sq = refined.row(Eigen::Index(n) * group_size + t).squaredNorm();
      if (sq > best_sq) {
        best_sq = sq;
        best = t;
      }
    }
    u.est_delay = best;
    u.score = std::sqrt(std::max(0.0, best_sq));
    out.push_back(u);
  }
}

struct MetricReport {
  double threshold = 0;
  long n_active = 0, n_inactive = 0;
  long n_missed = 0, n_false_alarm = 0, n_delay_err = 0;
  std::optional<double> missed_detection, false_alarm, delay_error;
  std::optional<double> nmse;  // pooled ||x_refined - x0||^2 / ||x0||^2
  std::optional<double> mse;   // mean per-sample squared error of the raw estimate
};

// Ratios at one threshold from a pooled record set. An active user counts as a delay
// error when it is undetected or detected at the wrong delay.
inline MetricReport metrics_at(const std::vector<UserRecord>& pool, double q_th) {
  MetricReport r;
  r.threshold = q_th;
  for (const UserRecord& u : pool) {
    if (u.truth_active) {
      ++r.n_active;
      const bool detected = u.score > q_th;
      if (!detected) ++r.n_missed;
      if (!detected || u.est_delay != u.truth_delay) ++r.n_delay_err;
    } else {
      ++r.n_inactive;
      if (u.score > q_th) ++r.n_false_alarm;
    }
  }
  if (r.n_active > 0) {
    r.missed_detection = double(r.n_missed) / double(r.n_active);
    r.delay_error = double(r.n_delay_err) / double(r.n_active);
  }
  if (r.n_inactive > 0) r.false_alarm = double(r.n_false_alarm) / double(r.n_inactive);
  return r;
}

// Threshold whose empirical false alarm on the pooled inactive scores is close to eps:
// the (1-eps) quantile of the inactive score distribution.
inline double calibrate_threshold(const std::vector<UserRecord>& pool, double eps) {
  if (!(eps > 0 && eps < 1)) throw ConfigError("calibrate_threshold: eps outside (0,1)");
  std::vector<double> inact;
  for (const UserRecord& u : pool)
    if (!u.truth_active) inact.push_back(u.score);
  if (inact.empty()) throw ConfigError("calibrate_threshold: no inactive users pooled");
  std::sort(inact.begin(), inact.end());
  // detection uses score > q, so q = k-th largest with k = floor(eps * n) leaves
  // at most eps*n scores strictly above
  const long n = long(inact.size());
  long k = long(eps * double(n));
  k = std::min(std::max(k, 0L), n - 1);
  return inact[std::size_t(n - 1 - k)];
}

struct RocPoint {
  double threshold = 0, false_alarm = 0, missed_detection = 0;
};

// One operating point per threshold, sorted by threshold.
inline std::vector<RocPoint> roc_sweep(const std::vector<UserRecord>& pool,
                                       std::vector<double> thresholds) {
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<RocPoint> out;
  for (double q : thresholds) {
    const MetricReport m = metrics_at(pool, q);
    RocPoint p;
    p.threshold = q;
    p.false_alarm = m.false_alarm.value_or(0.0);
    p.missed_detection = m.missed_detection.value_or(0.0);
    out.push_back(p);
  }
  return out;
}

// Missed detection at a given false-alarm level, linearly interpolated along the ROC
// (points sorted by decreasing threshold give increasing false alarm). Returns nullopt
// outside the covered range.
inline std::optional<double> roc_md_at_fa(const std::vector<RocPoint>& roc, double fa) {
  std::vector<RocPoint> pts = roc;
  std::sort(pts.begin(), pts.end(),
            [](const RocPoint& a, const RocPoint& b) { return a.false_alarm < b.false_alarm; });
  if (pts.empty() || fa < pts.front().false_alarm || fa > pts.back().false_alarm)
    return std::nullopt;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (fa <= pts[i].false_alarm) {
      const double fa0 = pts[i - 1].false_alarm, fa1 = pts[i].false_alarm;
      const double md0 = pts[i - 1].missed_detection, md1 = pts[i].missed_detection;
      if (fa1 <= fa0) return md1;
      const double w = (fa - fa0) / (fa1 - fa0);
      return md0 + w * (md1 - md0);
    }
  }
  return pts.back().missed_detection;
}

}  // namespace gfamp
