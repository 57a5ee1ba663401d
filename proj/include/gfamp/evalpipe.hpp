#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gfamp/detection.hpp"
#include "gfamp/experiment.hpp"
#include "gfamp/state_evolution.hpp"
#include "gfamp/training.hpp"

// Orchestration layer: dataset/model caching under the experiment output directory,
// method runners, metric aggregation and CSV emission. The CLI subcommands and the
// acceptance suite both go through these entry points.

namespace gfamp {

namespace fs = std::filesystem;

fs::path exp_root(const ExperimentSpec& spec);
fs::path split_dir(const ExperimentSpec& spec, const std::string& split);
fs::path model_dir(const ExperimentSpec& spec, const MethodSpec& m);
fs::path results_dir(const ExperimentSpec& spec);

// pooled per-user records plus error sums for one (method, test set) run
struct MethodRun {
  std::vector<UserRecord> pool;
  double err_sq = 0, sig_sq = 0;  // refined estimate vs x0, samples with signal only
  double mse_sum = 0;             // raw estimate squared error, all samples
  long count = 0;
};

struct EvalSummary {
  std::string method;
  double snr_db = 0;
  MetricReport at_fa;          // at the threshold calibrated to spec.fa_target
  std::vector<RocPoint> roc;   // thresholds from spec.roc_fa_grid quantiles
};

struct SweepRow {
  std::string axis;
  double value = 0;
  std::string method;
  double threshold = 0, false_alarm = 0, missed_detection = 0, delay_error = 0;
  double nmse = 0;
};

// Generate (or reuse, when the cached config hash matches) every split of the spec.
void cmd_gen_data(const ExperimentSpec& spec, int verbose);

// Train every trainable method of the list (or reuse cached models).
void cmd_train(const ExperimentSpec& spec, const std::vector<MethodSpec>& methods,
               int verbose);

// Evaluate methods over every test SNR; optionally write roc.csv / metrics.csv.
std::vector<EvalSummary> cmd_eval(const ExperimentSpec& spec,
                                  const std::vector<MethodSpec>& methods,
                                  bool write_files, int verbose);

void write_roc_csv(const ExperimentSpec& spec, const std::vector<EvalSummary>& sums);
void write_metrics_csv(const ExperimentSpec& spec, const std::vector<EvalSummary>& sums);

// State-evolution table for the spec scenario; kind is "st" or "mmse" (scalar when
// M=1, vector otherwise). Optionally adds an empirical AMP column over mc_emp samples.
struct SeTable {
  SeResult se;
  std::vector<double> empirical_delta_sq;  // empty unless requested
};
SeTable cmd_se(const ExperimentSpec& spec, const std::string& kind, int mc,
               long mc_emp, bool write_files, int verbose);

// Retrain/evaluate along one axis ("tg", "m" or "snr"); writes sweep.csv when asked.
std::vector<SweepRow> cmd_sweep(const ExperimentSpec& spec, const std::string& axis,
                                const std::vector<double>& values,
                                const std::vector<MethodSpec>& methods,
                                bool write_files, int verbose);

// single method at a single SNR (acceptance entry point)
EvalSummary evaluate_method(const ExperimentSpec& spec, const MethodSpec& m,
                            double snr_db, int verbose);

// derived spec for one sweep point (exposed for the acceptance suite)
ExperimentSpec sweep_point(const ExperimentSpec& spec, const std::string& axis,
                           double value);

// training log of a cached model (written at training time as trainlog.json)
TrainLog load_trainlog(const ExperimentSpec& spec, const MethodSpec& m);

}  // namespace gfamp
