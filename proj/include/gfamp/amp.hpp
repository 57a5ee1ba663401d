#pragma once
#include <string>
#include <vector>

#include "gfamp/field.hpp"
#include "gfamp/shrinkage.hpp"

namespace gfamp {

// Per-iteration record of the solver: coefficient estimates, residuals, the noise-std
// estimate fed to each denoiser call and the divergence matrix used in each residual
// update. Entry i corresponds to iteration i+1.
template <class S>
struct AmpTrace {
  std::vector<Mat<S>> x;
  std::vector<Mat<S>> v;
  std::vector<double> sigma;
  std::vector<Mat<S>> onsager;
};

struct IterOptions {
  bool onsager = true;      // disable to study the uncorrected iteration
  bool separable = false;   // scalar denoiser applied per column with per-column sigma
  double sigma_floor = 1e-12;
};

// Shared iteration: x <- eta(x + W v), v <- y - S x + (1/len) v B. Classical AMP uses
// W = S^H and one parameter set for every iteration; the unfolded network supplies a
// learned W and per-layer parameters.
template <class S>
AmpTrace<S> run_iterations(const Mat<S>& W, const Mat<S>& smat,
                           const std::vector<ShrinkageParams>& layers, int group_size,
                           const Mat<S>& Y, int depth, const IterOptions& opt = {}) {
  const int len = int(smat.rows()), dim = int(smat.cols()), w = int(Y.cols());
  if (Y.rows() != len) throw ConfigError("run_iterations: Y rows mismatch");
  if (W.rows() != dim || W.cols() != len) throw ConfigError("run_iterations: W shape mismatch");
  if (depth < 0 || depth > int(layers.size()))
    throw ConfigError("run_iterations: depth out of range");
  AmpTrace<S> tr;
  tr.x.reserve(depth);
  tr.v.reserve(depth);
  Mat<S> x = Mat<S>::Zero(dim, w);
  Mat<S> v = Y;
  Mat<S> r(dim, w);
  for (int i = 0; i < depth; ++i) {
    const ShrinkageParams& p = layers[i];
    Mat<S> xnew(dim, w);
    Mat<S> B;
    double sigma_pooled = std::max(opt.sigma_floor, std::sqrt(v.squaredNorm() / double(len) / w));
    if (opt.separable) {
      if (p.is_vector()) throw ConfigError("separable mode expects a scalar denoiser");
      B = Mat<S>::Zero(w, w);
      for (int m = 0; m < w; ++m) {
        const double sm = std::max(opt.sigma_floor, std::sqrt(v.col(m).squaredNorm() / double(len)));
        r.col(m) = x.col(m) + W * v.col(m);
        ShrinkEval<S> e = shrink_apply<S>(r.col(m), sm, p, group_size);
        xnew.col(m) = e.x;
        B(m, m) = e.onsager(0, 0);
      }
    } else {
      r.noalias() = x + W * v;
      ShrinkEval<S> e = shrink_apply<S>(r, sigma_pooled, p, group_size);
      xnew = std::move(e.x);
      B = std::move(e.onsager);
    }
    Mat<S> vnew = Y - smat * xnew;
    if (opt.onsager) vnew.noalias() += v * B * S(real_of<S>(1.0 / len));
    if (!xnew.allFinite() || !vnew.allFinite())
      throw NumericError("solver: non-finite values at iteration " + std::to_string(i + 1));
    x = xnew;
    tr.x.push_back(std::move(xnew));
    tr.v.push_back(vnew);
    tr.sigma.push_back(sigma_pooled);
    tr.onsager.push_back(std::move(B));
    v = std::move(vnew);
  }
  return tr;
}

// Classical AMP, single measurement vector.
template <class S>
AmpTrace<S> amp_smv(const Vec<S>& y, const Mat<S>& smat, const ShrinkageParams& p,
                    int group_size, int iters, const IterOptions& opt = {}) {
  std::vector<ShrinkageParams> layers(iters, p);
  return run_iterations<S>(smat.adjoint(), smat, layers, group_size, y, iters, opt);
}

// Classical AMP, multiple measurement vectors (one column per antenna).
template <class S>
AmpTrace<S> amp_mmv(const Mat<S>& Y, const Mat<S>& smat, const ShrinkageParams& p,
                    int group_size, int iters, const IterOptions& opt = {}) {
  std::vector<ShrinkageParams> layers(iters, p);
  return run_iterations<S>(smat.adjoint(), smat, layers, group_size, Y, iters, opt);
}

}  // namespace gfamp
