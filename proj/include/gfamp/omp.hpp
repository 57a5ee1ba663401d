#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/QR>

#include "gfamp/field.hpp"
#include "gfamp/errors.hpp"

namespace gfamp {

template <class S>
struct OmpResult {
  std::vector<int> cols;          // selected expanded columns, in selection order
  Mat<S> coeff;                   // LS coefficients on the support, |cols| x M
  Mat<S> estimate;                // scattered into the full dim x M shape
  std::vector<double> residual_norms;  // after each selection
  bool rank_deficient = false;
};

// Group-aware orthogonal matching pursuit. Each selection claims the whole user group
// (delay-level sparsity by construction); the support estimate is refreshed by least
// squares after every selection. Stops at the cap, when every group is claimed, or when
// the residual is numerically zero.
template <class S>
OmpResult<S> omp_solve(const Mat<S>& smat_s, const Mat<S>& Y, int group_size, int cap) {
  if (cap < 1) throw ConfigError("omp: cap must be >= 1");
  if (group_size < 1 || smat_s.cols() % group_size != 0)
    throw ConfigError("omp: columns not a multiple of group_size");
  const long dim = smat_s.cols();
  const long groups = dim / group_size;
  OmpResult<S> r;
  Mat<S> resid = Y;
  std::vector<char> used(std::size_t(groups), 0);
  Mat<S> A(smat_s.rows(), 0);
  const double y_norm = Y.norm();
  for (int it = 0; it < cap && it < groups; ++it) {
    if (resid.norm() <= 1e-13 * std::max(1.0, y_norm)) break;
    Mat<S> corr = smat_s.adjoint() * resid;
    int best_col = -1;
    double best_sq = -1;
    for (long j = 0; j < dim; ++j) {
      if (used[std::size_t(j / group_size)]) continue;
      const double sq = corr.row(j).squaredNorm();
      if (sq > best_sq) {
        best_sq = sq;
        best_col = int(j);
      }
    }
    if (best_col < 0) break;
    used[std::size_t(best_col / group_size)] = 1;
    r.cols.push_back(best_col);
    A.conservativeResize(Eigen::NoChange, A.cols() + 1);
    A.col(A.cols() - 1) = smat_s.col(best_col);
    Eigen::CompleteOrthogonalDecomposition<Mat<S>> cod(A);
    if (cod.rank() < A.cols()) r.rank_deficient = true;
    r.coeff = cod.solve(Y);
    resid = Y;
    resid.noalias() -= A * r.coeff;
    r.residual_norms.push_back(resid.norm());
  }
  r.estimate = Mat<S>::Zero(dim, Y.cols());
  for (std::size_t k = 0; k < r.cols.size(); ++k)
    r.estimate.row(r.cols[k]) = r.coeff.row(Eigen::Index(k));
  return r;
}

}  // namespace gfamp
