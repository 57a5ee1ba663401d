#pragma once
#include <vector>

#include "gfamp/lamp.hpp"

namespace gfamp {

// Loss is the squared error of the final estimate against the true coefficients. The
// backward pass follows a stop-gradient convention: the noise-std estimates and the
// divergence matrices are treated as constants of each layer, so gradients flow through
// the denoiser input, the residual recursion and the parameters, but not through sigma
// or the Onsager weights. The finite-difference oracle below evaluates the loss under
// the same convention (sigma/divergence frozen at the base point).
template <class S>
struct ForwardCache {
  Mat<S> y;
  std::vector<Mat<S>> r, x, v; // per layer; v[i] is the residual after layer i
  std::vector<double> sigma;   // noise-std fed to layer i's denoiser
  std::vector<Mat<S>> B;       // divergence used in layer i's residual update
  int depth() const { return int(x.size()); }
  const Mat<S>& v_in(int i) const { return i == 0 ? y : v[i - 1]; }
};

template <class S>
double sq_err(const Mat<S>& a, const Mat<S>& b) {
  return double((a - b).squaredNorm());
}

template <class S>
ForwardCache<S> forward_cached(const LampModel<S>& m, const Mat<S>& Y, int depth = -1,
                               double sigma_floor = 1e-12) {
  if (depth < 0) depth = m.depth;
  const int len = int(m.smat.rows()), dim = int(m.smat.cols()), w = int(Y.cols());
  if (w != m.width) throw ConfigError("forward_cached: block width mismatch");
  ForwardCache<S> c;
  c.y = Y;
  Mat<S> x = Mat<S>::Zero(dim, w);
  for (int i = 0; i < depth; ++i) {
    const Mat<S>& vin = c.v_in(i);
    const double sigma =
        std::max(sigma_floor, std::sqrt(vin.squaredNorm() / double(len) / w));
    Mat<S> r = x + m.W * vin;
    ShrinkEval<S> e = shrink_apply<S>(r, sigma, m.layers[i], m.group_size);
    Mat<S> v = Y - m.smat * e.x;
    v.noalias() += vin * e.onsager * S(real_of<S>(1.0 / len));
    x = e.x;
    c.r.push_back(std::move(r));
    c.x.push_back(std::move(e.x));
    c.v.push_back(std::move(v));
    c.sigma.push_back(sigma);
    c.B.push_back(std::move(e.onsager));
  }
  return c;
}

template <class S>
struct Gradients {
  Mat<S> W;                           // empty when W gradients were not requested
  std::vector<Eigen::Vector4d> theta; // per layer, flat slot order of ShrinkageParams
};

// Reverse accumulation of d||x_depth - X0||^2 / d(W, theta). For the complex field the
// W gradient uses the conjugate convention: dL/dRe W = Re(g), dL/dIm W = Im(g).
template <class S>
Gradients<S> backward(const LampModel<S>& m, const ForwardCache<S>& c, const Mat<S>& X0,
                      bool want_W) {
  const int d = c.depth();
  const int len = int(m.smat.rows());
  Gradients<S> g;
  g.theta.assign(m.layers.size(), Eigen::Vector4d::Zero());
  if (want_W) g.W = Mat<S>::Zero(m.W.rows(), m.W.cols());
  if (d == 0) return g;
  Mat<S> gx = S(real_of<S>(2)) * (c.x[d - 1] - X0);
  Mat<S> gv; // empty until a residual feeds a later layer
  Mat<S> gr(m.smat.cols(), c.y.cols());
  Eigen::Ref<Mat<S>> gr_ref = gr;
  for (int i = d - 1; i >= 0; --i) {
    if (gv.size() > 0) {
      // v_i = y - S x_i + (1/len) v_in B_i
      gx.noalias() -= m.smat.adjoint() * gv;
    }
    shrink_vjp<S>(c.r[i], c.sigma[i], m.layers[i], m.group_size, gx, &gr_ref, g.theta[i]);
    // r_i = x_{i-1} + W v_in
    if (want_W) g.W.noalias() += gr * c.v_in(i).adjoint();
    Mat<S> gvin = m.W.adjoint() * gr;
    if (gv.size() > 0)
      gvin.noalias() += gv * c.B[i].adjoint() * S(real_of<S>(1.0 / len));
    gx = gr; // gradient w.r.t. x_{i-1}
    gv = std::move(gvin);
  }
  return g;
}

// Forward pass with sigma and divergence values frozen to a reference schedule.
template <class S>
double loss_frozen(const LampModel<S>& m, const Mat<S>& Y, const Mat<S>& X0, int depth,
                   const std::vector<double>& sigma, const std::vector<Mat<S>>& B) {
  const int len = int(m.smat.rows()), dim = int(m.smat.cols()), w = int(Y.cols());
  Mat<S> x = Mat<S>::Zero(dim, w), v = Y;
  for (int i = 0; i < depth; ++i) {
    Mat<S> r = x + m.W * v;
    ShrinkEval<S> e = shrink_apply<S>(r, sigma[i], m.layers[i], m.group_size);
    Mat<S> vnew = Y - m.smat * e.x;
    vnew.noalias() += v * B[i] * S(real_of<S>(1.0 / len));
    x = std::move(e.x);
    v = std::move(vnew);
  }
  return sq_err<S>(x, X0);
}

// Central differences for one theta coordinate, frozen schedule from the base point.
template <class S>
double fd_grad_theta(const LampModel<S>& m, const Mat<S>& Y, const Mat<S>& X0, int depth,
                     int layer, int slot, double eps) {
  ForwardCache<S> base = forward_cached<S>(m, Y, depth);
  LampModel<S> mp = m, mm = m;
  mp.layers[layer].set(slot, m.layers[layer].get(slot) + eps);
  mm.layers[layer].set(slot, m.layers[layer].get(slot) - eps);
  const double lp = loss_frozen<S>(mp, Y, X0, depth, base.sigma, base.B);
  const double lm = loss_frozen<S>(mm, Y, X0, depth, base.sigma, base.B);
  return (lp - lm) / (2 * eps);
}

// Central differences for one real coordinate of W (imag selects the imaginary part).
template <class S>
double fd_grad_W(const LampModel<S>& m, const Mat<S>& Y, const Mat<S>& X0, int depth,
                 int row, int col, bool imag, double eps) {
  ForwardCache<S> base = forward_cached<S>(m, Y, depth);
  LampModel<S> mp = m, mm = m;
  if constexpr (scalar_traits<S>::is_complex) {
    const S dz = imag ? S(0, real_of<S>(eps)) : S(real_of<S>(eps), 0);
    mp.W(row, col) += dz;
    mm.W(row, col) -= dz;
  } else {
    if (imag) throw ConfigError("fd_grad_W: real field has no imaginary part");
    mp.W(row, col) += S(eps);
    mm.W(row, col) -= S(eps);
  }
  const double lp = loss_frozen<S>(mp, Y, X0, depth, base.sigma, base.B);
  const double lm = loss_frozen<S>(mm, Y, X0, depth, base.sigma, base.B);
  return (lp - lm) / (2 * eps);
}

}  // namespace gfamp
