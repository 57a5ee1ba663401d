#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gfamp/adam.hpp"
#include "gfamp/grad.hpp"
#include "gfamp/lamp.hpp"
#include "gfamp/rng.hpp"
#include "gfamp/signal_model.hpp"

namespace gfamp {

// Flattened training view. Columns come in blocks of `width`; each block is one
// (sample, subnetwork input) pair. A width-M model over M antennas yields one block per
// sample, a width-1 model yields M blocks per sample, and a hybrid model with block
// width w yields M/w blocks per sample. Shared subnetworks therefore see every block of
// every sample as an independent training unit.
template <class S>
struct TrainSet {
  Mat<S> Y;   // expanded_len x (count*width)
  Mat<S> X0;  // expanded_dim x (count*width)
  int width = 1;
  long count = 0;
};

template <class S>
TrainSet<S> make_trainset(const Dataset<S>& ds, int width) {
  const int M = ds.cfg.num_antennas;
  if (width < 1 || M % width != 0)
    throw ConfigError("make_trainset: width must divide the antenna count");
  TrainSet<S> t;
  t.width = width;
  t.count = long(ds.samples.size()) * (M / width);
  t.Y.resize(ds.cfg.expanded_len(), t.count * width);
  t.X0.resize(ds.cfg.expanded_dim(), t.count * width);
  long col = 0;
  for (const auto& s : ds.samples) {
    t.Y.middleCols(col, M) = s.y;
    t.X0.middleCols(col, M) = s.x0;
    col += M;
  }
  return t;
}

struct TrainConfig {
  double learn_rate = 7e-4;
  int batch = 100;          // minibatch size in blocks
  int cadence = 100;        // validation every this many steps
  int patience = 20;        // stop after this many non-improving validations
  int max_steps = 10000;    // per-phase cap
  std::uint64_t seed = 7;   // minibatch sampling stream
  bool final_refine_W = true;
  int verbose = 0;
  double sigma_floor = 1e-12;
};

struct PhaseRecord {
  std::string name;
  int steps = 0;      // steps actually run
  int best_step = 0;  // step of the restored snapshot
  double val_start = 0;
  double val_best = 0;
  std::vector<std::pair<int, double>> curve;  // (step, val mse)
};

struct TrainLog {
  std::vector<PhaseRecord> phases;
  std::vector<double> depth_val_mse;  // tau_i: val MSE at depth i+1 when epoch i ends
  double final_val_mse = 0;
};

namespace detail {

// Map between a phase's trainable coordinates and one flat double vector that the
// optimizer owns. W (when present) is packed after the thetas, real parts interleaved
// with imaginary parts for the complex field.
template <class S>
struct ParamPack {
  std::vector<std::pair<int, int>> coords;  // (layer, slot)
  bool with_W = false;
  long wreal = 0;

  static ParamPack make(const LampModel<S>& m, int first_layer, int last_layer,
                        bool with_W) {
    ParamPack p;
    for (int l = first_layer; l <= last_layer; ++l)
      for (int s = 0; s < m.layers[l].param_count(); ++s) p.coords.push_back({l, s});
    p.with_W = with_W;
    p.wreal = with_W ? long(m.W.size()) * (scalar_traits<S>::is_complex ? 2 : 1) : 0;
    return p;
  }

  long size() const { return long(coords.size()) + wreal; }

  VecXd pack(const LampModel<S>& m) const {
    VecXd p(size());
    for (size_t k = 0; k < coords.size(); ++k)
      p[long(k)] = m.layers[coords[k].first].get(coords[k].second);
    if (with_W) {
      const auto* raw = reinterpret_cast<const real_of<S>*>(m.W.data());
      for (long k = 0; k < wreal; ++k) p[long(coords.size()) + k] = double(raw[k]);
    }
    return p;
  }

  void unpack(const VecXd& p, LampModel<S>& m) const {
    for (size_t k = 0; k < coords.size(); ++k)
      m.layers[coords[k].first].set(coords[k].second, p[long(k)]);
    if (with_W) {
      auto* raw = reinterpret_cast<real_of<S>*>(m.W.data());
      for (long k = 0; k < wreal; ++k)
        raw[k] = real_of<S>(p[long(coords.size()) + k]);
    }
  }

  VecXd pack_grad(const LampModel<S>& m, const Gradients<S>& g) const {
    VecXd p(size());
    for (size_t k = 0; k < coords.size(); ++k) {
      const auto [l, s] = coords[k];
      // flat slot -> theta slot: ST exposes theta only; MMSE exposes theta1..theta4
      p[long(k)] = m.layers[l].is_mmse() ? g.theta[l][s]
                                         : g.theta[l][0];
    }
    if (with_W) {
      const auto* raw = reinterpret_cast<const real_of<S>*>(g.W.data());
      for (long k = 0; k < wreal; ++k) p[long(coords.size()) + k] = double(raw[k]);
    }
    return p;
  }

  // keep MMSE variance / weight parameters in their valid range after a step
  void clamp(VecXd& p, const LampModel<S>& m) const {
    for (size_t k = 0; k < coords.size(); ++k) {
      const auto [l, s] = coords[k];
      if (m.layers[l].is_mmse()) {
        if (s == 0) p[long(k)] = std::max(p[long(k)], 1e-8);
        if (s == 1) p[long(k)] = std::max(p[long(k)], 0.0);
      } else {
        p[long(k)] = std::max(p[long(k)], 0.0);
      }
    }
  }
};

// full parameter snapshot (all thetas + W) for best-validation restoration
template <class S>
struct ModelSnap {
  std::vector<ShrinkageParams> layers;
  Mat<S> W;
  void take(const LampModel<S>& m) { layers = m.layers; W = m.W; }
  void put(LampModel<S>& m) const { m.layers = layers; m.W = W; }
};

// Reusable per-minibatch workspace for the unfolded forward pass.
template <class S>
struct BatchCache {
  Mat<S> y;
  std::vector<Mat<S>> r, x, v;
  std::vector<std::vector<double>> sigma;  // [layer][block]
  std::vector<std::vector<Mat<S>>> B;      // [layer][block] w x w
};

template <class S>
void batch_forward(const LampModel<S>& m, int depth, BatchCache<S>& c,
                   double sigma_floor) {
  const int w = m.width;
  const long cols = c.y.cols();
  const long nb = cols / w;
  const long len = m.smat.rows();
  const long dim = m.smat.cols();
  c.r.resize(depth);
  c.x.resize(depth);
  c.v.resize(depth);
  c.sigma.assign(depth, {});
  c.B.assign(depth, {});
  const double denom = std::sqrt(double(len) * w);
  const Mat<S>* vin = &c.y;
  for (int i = 0; i < depth; ++i) {
    c.r[i].resize(dim, cols);
    c.r[i].noalias() = m.W * (*vin);
    if (i > 0) c.r[i] += c.x[i - 1];
    c.sigma[i].resize(nb);
    c.B[i].resize(nb);
    c.x[i].resize(dim, cols);
    for (long b = 0; b < nb; ++b) {
      const double sig =
          std::max(sigma_floor, vin->middleCols(b * w, w).norm() / denom);
      c.sigma[i][b] = sig;
      shrink_apply_into<S>(c.r[i].middleCols(b * w, w), sig, m.layers[i], m.group_size,
                           c.x[i].middleCols(b * w, w), c.B[i][b]);
    }
    c.v[i].resize(len, cols);
    c.v[i] = c.y;
    c.v[i].noalias() -= m.smat * c.x[i];
    {
      const S inv_len = S(real_of<S>(1.0 / double(len)));
      for (long b = 0; b < nb; ++b)
        c.v[i].middleCols(b * w, w).noalias() +=
            vin->middleCols(b * w, w) * c.B[i][b] * inv_len;
    }
    if (!c.x[i].allFinite() || !c.v[i].allFinite())
      throw NumericError("training: non-finite values in forward pass");
    vin = &c.v[i];
  }
}

// Backward pass over a batch cache. Seeds with dL/dx_hat for the mean loss
// (1/nb) sum ||x_hat - x0||^2 and returns gradients for every layer plus W.
template <class S>
Gradients<S> batch_backward(const LampModel<S>& m, const BatchCache<S>& c,
                            const Mat<S>& X0, int depth, bool want_W) {
  const int w = m.width;
  const long cols = c.y.cols();
  const long nb = cols / w;
  const long len = m.smat.rows();
  const long dim = m.smat.cols();
  Gradients<S> g;
  g.theta.assign(m.layers.size(), Eigen::Vector4d::Zero());
  if (want_W) g.W = Mat<S>::Zero(m.W.rows(), m.W.cols());
  Mat<S> gx = (c.x[depth - 1] - X0) * S(real_of<S>(2.0 / double(nb)));
  Mat<S> gv;
  Mat<S> gr(dim, cols), gvin(len, cols);
  const S inv_len = S(real_of<S>(1.0 / double(len)));
  for (int i = depth - 1; i >= 0; --i) {
    if (gv.size() > 0) gx.noalias() -= m.smat.adjoint() * gv;
    for (long b = 0; b < nb; ++b) {
      Eigen::Ref<Mat<S>> grb = gr.middleCols(b * w, w);
      shrink_vjp<S>(c.r[i].middleCols(b * w, w), c.sigma[i][b], m.layers[i],
                    m.group_size, gx.middleCols(b * w, w), &grb, g.theta[i]);
    }
    const Mat<S>& vin = (i == 0) ? c.y : c.v[i - 1];
    if (want_W) g.W.noalias() += gr * vin.adjoint();
    gvin.noalias() = m.W.adjoint() * gr;
    if (gv.size() > 0) {
      for (long b = 0; b < nb; ++b)
        gvin.middleCols(b * w, w).noalias() +=
            gv.middleCols(b * w, w) * c.B[i][b].adjoint() * inv_len;
    }
    gx = gr;
    gv = gvin;
  }
  return g;
}

template <class S>
void gather_cols(const Mat<S>& src, const std::vector<long>& blocks, int w,
                 Mat<S>& dst) {
  dst.resize(src.rows(), long(blocks.size()) * w);
  for (size_t k = 0; k < blocks.size(); ++k)
    dst.middleCols(long(k) * w, w) = src.middleCols(blocks[k] * w, w);
}

}  // namespace detail

// Mean per-block squared error of the model at the given depth over a whole set,
// evaluated in chunks to bound memory.
template <class S>
double val_loss(const LampModel<S>& m, const TrainSet<S>& set, int depth,
                double sigma_floor = 1e-12, long chunk_blocks = 256) {
  if (set.width != m.width) throw ConfigError("val_loss: width mismatch");
  const int w = m.width;
  double acc = 0;
  detail::BatchCache<S> c;
  for (long b0 = 0; b0 < set.count; b0 += chunk_blocks) {
    const long nb = std::min(chunk_blocks, set.count - b0);
    c.y = set.Y.middleCols(b0 * w, nb * w);
    detail::batch_forward(m, depth, c, sigma_floor);
    acc += (c.x[depth - 1] - set.X0.middleCols(b0 * w, nb * w)).squaredNorm();
  }
  return acc / double(set.count);
}

namespace detail {

// Shared early-stopping driver. do_step advances one optimizer step, do_val scores the
// validation set, snap/restore manage the best-so-far parameter snapshot. The initial
// state is snapshotted too, so a phase can never end worse than it started.
inline PhaseRecord run_early_stopped(const std::string& name, const TrainConfig& tc,
                                     const std::function<void(int)>& do_step,
                                     const std::function<double()>& do_val,
                                     const std::function<void()>& snap,
                                     const std::function<void()>& restore) {
  PhaseRecord rec;
  rec.name = name;
  double best = do_val();
  rec.val_start = best;
  rec.curve.push_back({0, best});
  snap();
  int best_step = 0, since = 0, step = 0;
  while (step < tc.max_steps) {
    ++step;
    do_step(step);
    if (step % tc.cadence == 0) {
      const double v = do_val();
      rec.curve.push_back({step, v});
      if (v < best) {
        best = v;
        best_step = step;
        snap();
        since = 0;
      } else if (++since >= tc.patience) {
        break;
      }
    }
  }
  restore();
  rec.steps = step;
  rec.best_step = best_step;
  rec.val_best = best;
  if (tc.verbose >= 1)
    std::fprintf(stderr, "[train] %-8s steps=%-6d val %.6g -> %.6g (best@%d)\n",
                 name.c_str(), step, rec.val_start, rec.val_best, best_step);
  return rec;
}

// Residual-and-sigma prefix of the network: run layers 0..layer-1 over a whole set and
// record the input r and per-block sigma of layer `layer`. Lets the denoiser-only
// phases skip the frozen prefix entirely.
template <class S>
struct Prefix {
  Mat<S> R;
  std::vector<double> sigma;  // per block
};

template <class S>
Prefix<S> make_prefix(const LampModel<S>& m, const TrainSet<S>& set, int layer,
                      double sigma_floor, long chunk_blocks = 256) {
  const int w = m.width;
  Prefix<S> pre;
  pre.R.resize(m.smat.cols(), set.count * w);
  pre.sigma.resize(set.count);
  BatchCache<S> c;
  const double denom = std::sqrt(double(m.smat.rows()) * w);
  for (long b0 = 0; b0 < set.count; b0 += chunk_blocks) {
    const long nb = std::min(chunk_blocks, set.count - b0);
    c.y = set.Y.middleCols(b0 * w, nb * w);
    const Mat<S>* vin = &c.y;
    Mat<S> xprev;
    if (layer > 0) {
      batch_forward(m, layer, c, sigma_floor);
      vin = &c.v[layer - 1];
      xprev = c.x[layer - 1];
    }
    Eigen::Ref<Mat<S>> Rblk = pre.R.middleCols(b0 * w, nb * w);
    Rblk.noalias() = m.W * (*vin);
    if (layer > 0) Rblk += xprev;
    for (long b = 0; b < nb; ++b)
      pre.sigma[b0 + b] =
          std::max(sigma_floor, vin->middleCols(b * w, w).norm() / denom);
  }
  return pre;
}

// One denoiser-only phase: optimize layer `layer`'s shrinkage parameters against the
// precomputed prefix, all earlier layers frozen.
template <class S>
PhaseRecord phase_denoiser(LampModel<S>& m, const TrainSet<S>& tr, const TrainSet<S>& va,
                           const TrainConfig& tc, int layer, const std::string& name) {
  const int w = m.width;
  const Prefix<S> ptr = make_prefix(m, tr, layer, tc.sigma_floor);
  const Prefix<S> pva = make_prefix(m, va, layer, tc.sigma_floor);
  ParamPack<S> pack = ParamPack<S>::make(m, layer, layer, false);
  VecXd p = pack.pack(m);
  Adam opt;
  opt.lr = tc.learn_rate;
  opt.reset(p.size());
  Mat<S> Rb, X0b, Xb, Gr;
  Mat<S> Bscratch;
  std::vector<long> idx(tc.batch);
  std::vector<double> sigb(tc.batch);
  auto do_step = [&](int step) {
    Rng rng = make_stream(tc.seed, name, std::uint64_t(step));
    std::uniform_int_distribution<long> pick(0, tr.count - 1);
    for (int k = 0; k < tc.batch; ++k) {
      idx[size_t(k)] = pick(rng);
      sigb[size_t(k)] = ptr.sigma[size_t(idx[size_t(k)])];
    }
    gather_cols(ptr.R, idx, w, Rb);
    gather_cols(tr.X0, idx, w, X0b);
    Xb.resize(Rb.rows(), Rb.cols());
    Gr.resize(Rb.rows(), Rb.cols());
    Gradients<S> g;
    g.theta.assign(m.layers.size(), Eigen::Vector4d::Zero());
    for (int k = 0; k < tc.batch; ++k) {
      shrink_apply_into<S>(Rb.middleCols(long(k) * w, w), sigb[size_t(k)],
                           m.layers[layer], m.group_size,
                           Xb.middleCols(long(k) * w, w), Bscratch);
    }
    Xb -= X0b;
    Xb *= S(real_of<S>(2.0 / double(tc.batch)));
    for (int k = 0; k < tc.batch; ++k) {
      shrink_vjp<S>(Rb.middleCols(long(k) * w, w), sigb[size_t(k)], m.layers[layer],
                    m.group_size, Xb.middleCols(long(k) * w, w),
                    static_cast<Eigen::Ref<Mat<S>>*>(nullptr), g.theta[layer]);
    }
    VecXd gp = pack.pack_grad(m, g);
    opt.step(p, gp);
    pack.clamp(p, m);
    pack.unpack(p, m);
  };
  Mat<S> Xv;
  auto do_val = [&]() {
    double acc = 0;
    Xv.resize(pva.R.rows(), w);
    Mat<S> Bs;
    for (long b = 0; b < va.count; ++b) {
      shrink_apply_into<S>(pva.R.middleCols(b * w, w), pva.sigma[size_t(b)],
                           m.layers[layer], m.group_size, Xv, Bs);
      acc += (Xv - va.X0.middleCols(b * w, w)).squaredNorm();
    }
    return acc / double(va.count);
  };
  ModelSnap<S> best;
  auto snap = [&]() { best.take(m); };
  auto restore = [&]() { best.put(m); };
  return run_early_stopped(name, tc, do_step, do_val, snap, restore);
}

// One unfolded phase at the given depth: optimize layers first..last (thetas), plus W
// when with_W is set, through the full truncated network.
template <class S>
PhaseRecord phase_full(LampModel<S>& m, const TrainSet<S>& tr, const TrainSet<S>& va,
                       const TrainConfig& tc, int depth, int first_layer, int last_layer,
                       bool with_W, const std::string& name) {
  const int w = m.width;
  ParamPack<S> pack = ParamPack<S>::make(m, first_layer, last_layer, with_W);
  VecXd p = pack.pack(m);
  Adam opt;
  opt.lr = tc.learn_rate;
  opt.reset(p.size());
  BatchCache<S> c;
  Mat<S> X0b;
  std::vector<long> idx(tc.batch);
  auto do_step = [&](int step) {
    Rng rng = make_stream(tc.seed, name, std::uint64_t(step));
    std::uniform_int_distribution<long> pick(0, tr.count - 1);
    for (int k = 0; k < tc.batch; ++k) idx[size_t(k)] = pick(rng);
    gather_cols(tr.Y, idx, w, c.y);
    gather_cols(tr.X0, idx, w, X0b);
    batch_forward(m, depth, c, tc.sigma_floor);
    Gradients<S> g = batch_backward(m, c, X0b, depth, with_W);
    VecXd gp = pack.pack_grad(m, g);
    opt.step(p, gp);
    pack.clamp(p, m);
    pack.unpack(p, m);
  };
  auto do_val = [&]() { return val_loss(m, va, depth, tc.sigma_floor); };
  ModelSnap<S> best;
  auto snap = [&]() { best.take(m); };
  auto restore = [&]() { best.put(m); };
  return run_early_stopped(name, tc, do_step, do_val, snap, restore);
}

}  // namespace detail

// Layer-by-layer training with denoiser decoupling. For each layer i: first fit its
// shrinkage parameters alone against the frozen prefix (cheap, no unfolding), then
// refine thetas of layers 0..i through the depth-(i+1) truncated network. A final pass
// trains W jointly with every theta. Each phase early-stops on validation MSE and
// restores its best snapshot.
template <class S>
TrainLog train_lamp(LampModel<S>& m, const TrainSet<S>& tr, const TrainSet<S>& va,
                    const TrainConfig& tc) {
  m.validate();
  if (tr.width != m.width || va.width != m.width)
    throw ConfigError("train_lamp: train set width does not match the model");
  TrainLog log;
  for (int i = 0; i < m.depth; ++i) {
    const std::string tag = "layer" + std::to_string(i + 1);
    log.phases.push_back(
        detail::phase_denoiser(m, tr, va, tc, i, i == 0 ? tag : tag + "a"));
    if (i > 0)
      log.phases.push_back(
          detail::phase_full(m, tr, va, tc, i + 1, 0, i, false, tag + "b"));
    // tau_i: depth-(i+1) validation MSE when its epoch closes
    log.depth_val_mse.push_back(log.phases.back().val_best);
  }
  if (tc.final_refine_W) {
    log.phases.push_back(
        detail::phase_full(m, tr, va, tc, m.depth, 0, m.depth - 1, true, "refine"));
    log.depth_val_mse.back() = std::min(log.depth_val_mse.back(), log.phases.back().val_best);
  }
  log.final_val_mse = log.depth_val_mse.back();
  return log;
}

}  // namespace gfamp
