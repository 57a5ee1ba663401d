#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "gfamp/config.hpp"
#include "gfamp/training.hpp"

namespace gfamp {

// Method identifiers accepted in specs and on the command line:
//   amp_st, amp_mmse          untrained AMP (ST at the default threshold / oracle MMSE)
//   lamp_st, lamp_mmse        trained LAMP, scalar denoiser (M=1; at M>1 runs per antenna)
//   lamp_d                    trained distributed structure, shared scalar MMSE denoiser
//   lamp_c_st, lamp_c_mmse    trained centralized structure, vector denoiser
//   lamp_h / lamp_hU          trained hybrid structure, U antenna blocks (default U=2)
//   omp                       group-aware OMP baseline, cap 2*p_a*N
struct MethodSpec {
  std::string name;
  int hybrid_blocks = 2;
  std::string id() const {
    return name == "lamp_h" ? name + std::to_string(hybrid_blocks) : name;
  }
};

MethodSpec method_from_name(const std::string& s);
bool method_needs_training(const MethodSpec& m);

struct ExperimentSpec {
  std::string name = "exp";
  SystemConfig scenario;
  long train_count = 100000;
  long val_count = 5000;
  long test_count = 5000;
  std::vector<double> test_snrs{0, 4, 8, 12, 16};
  int iters = 10;
  TrainConfig train;
  std::vector<MethodSpec> methods;
  double fa_target = 0.1;
  std::vector<double> roc_fa_grid{0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.13,
                                  0.17, 0.22, 0.28, 0.35, 0.45, 0.55, 0.65, 0.8};
  std::string out_dir = "out";

  static ExperimentSpec preset(const std::string& name);
  static ExperimentSpec from_json(const nlohmann::json& j);
  // path to a json file, or "preset:paper" / "preset:desk"
  static ExperimentSpec load(const std::string& ref);
  nlohmann::json to_json() const;
  std::string hash() const;
  void validate() const;
};

}  // namespace gfamp
