#pragma once
#include <string>
#include <vector>

#include "gfamp/amp.hpp"
#include "gfamp/config.hpp"

namespace gfamp {

// How a multi-antenna scenario maps onto subnetworks:
//   smv    - single antenna, scalar denoisers
//   dist   - one shared scalar subnetwork run per antenna
//   cent   - one vector subnetwork over all antennas jointly
//   hybrid - antennas split into equal blocks, one shared vector subnetwork per block
enum class LampStructure { smv, dist, cent, hybrid };

inline const char* lamp_structure_name(LampStructure s) {
  switch (s) {
    case LampStructure::smv: return "smv";
    case LampStructure::dist: return "dist";
    case LampStructure::cent: return "cent";
    case LampStructure::hybrid: return "hybrid";
  }
  return "?";
}

inline LampStructure lamp_structure_from_name(std::string_view s) {
  if (s == "smv") return LampStructure::smv;
  if (s == "dist") return LampStructure::dist;
  if (s == "cent") return LampStructure::cent;
  if (s == "hybrid") return LampStructure::hybrid;
  throw ConfigError("unknown lamp structure: " + std::string(s));
}

// Unfolded network: depth iterations of the AMP recursion with a learned matched filter
// W (tied across layers) and per-layer denoiser parameters. For dist/hybrid the model
// describes the shared subnetwork; forward passes split the antenna columns into blocks.
template <class S>
struct LampModel {
  LampStructure structure = LampStructure::smv;
  int depth = 0;
  int antennas = 1;   // scenario antenna count
  int width = 1;      // columns a subnetwork processes at once
  int group_size = 1;
  Mat<S> smat;        // expanded_len x expanded_dim, fixed
  Mat<S> W;           // expanded_dim x expanded_len, learned
  std::vector<ShrinkageParams> layers;

  int blocks() const { return antennas / width; }

  void validate() const {
    if (depth < 1 || int(layers.size()) != depth) throw ConfigError("lamp: bad depth");
    if (antennas < 1 || width < 1 || antennas % width != 0)
      throw ConfigError("lamp: antennas not divisible into blocks");
    const bool vec_struct =
        structure == LampStructure::cent || structure == LampStructure::hybrid;
    if (!vec_struct && width != 1) throw ConfigError("lamp: scalar structure needs width 1");
    if (structure == LampStructure::smv && antennas != 1)
      throw ConfigError("lamp: smv structure is single-antenna");
    if (structure == LampStructure::cent && width != antennas)
      throw ConfigError("lamp: cent structure spans all antennas");
    for (const auto& p : layers) {
      if (p.is_vector() != vec_struct)
        throw ConfigError("lamp: denoiser kind does not match structure");
      p.validate();
    }
    if (W.rows() != smat.cols() || W.cols() != smat.rows())
      throw ConfigError("lamp: W shape mismatch");
  }
};

// Fresh model with the matched-filter initialization W = S^T and identical per-layer
// parameters; equivalent to classical AMP until trained.
template <class S>
LampModel<S> make_lamp(const MatXd& smat, LampStructure st, int depth, int antennas,
                       int group_size, const ShrinkageParams& proto, int hybrid_blocks = 2) {
  LampModel<S> m;
  m.structure = st;
  m.depth = depth;
  m.antennas = antennas;
  m.group_size = group_size;
  switch (st) {
    case LampStructure::smv:
    case LampStructure::dist: m.width = 1; break;
    case LampStructure::cent: m.width = antennas; break;
    case LampStructure::hybrid:
      if (hybrid_blocks < 1 || antennas % hybrid_blocks != 0)
        throw ConfigError("make_lamp: antennas not divisible by hybrid block count");
      m.width = antennas / hybrid_blocks;
      break;
  }
  m.smat = smat.cast<S>();
  m.W = m.smat.adjoint();
  m.layers.assign(depth, proto);
  m.validate();
  return m;
}

// Forward pass of the shared subnetwork on one width-sized column block.
template <class S>
AmpTrace<S> lamp_forward_block(const LampModel<S>& m, const Mat<S>& Yblk, int depth = -1,
                               const IterOptions& opt = {}) {
  if (depth < 0) depth = m.depth;
  return run_iterations<S>(m.W, m.smat, m.layers, m.group_size, Yblk, depth, opt);
}

// Full-structure forward: splits the antenna columns per structure, runs the shared
// subnetwork on each block and concatenates the final estimates.
template <class S>
Mat<S> lamp_forward(const LampModel<S>& m, const Mat<S>& Y, int depth = -1) {
  if (depth < 0) depth = m.depth;
  if (Y.cols() != m.antennas) throw ConfigError("lamp_forward: antenna count mismatch");
  if (depth == 0) return Mat<S>::Zero(m.smat.cols(), Y.cols());
  Mat<S> X(m.smat.cols(), Y.cols());
  for (int b = 0; b < m.blocks(); ++b) {
    const auto blk = Y.middleCols(Eigen::Index(b) * m.width, m.width);
    AmpTrace<S> tr = lamp_forward_block<S>(m, blk, depth);
    X.middleCols(Eigen::Index(b) * m.width, m.width) = tr.x.back();
  }
  return X;
}

}  // namespace gfamp
