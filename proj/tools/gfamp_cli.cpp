// Command-line harness: dataset generation, training, evaluation, state evolution and
// parameter sweeps over the experiment spec (json file or preset:name reference).
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gfamp/evalpipe.hpp"
#include "gfamp/io.hpp"

namespace {

struct CommonArgs {
  std::string config = "preset:paper";
  std::string out_dir;
  std::string methods;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  int verbose = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config,
                  "experiment json file or preset:<paper|desk>");
  cmd->add_option("-o,--out", a.out_dir, "output root (overrides spec out_dir)");
  cmd->add_option("--methods", a.methods, "comma-separated method subset");
  cmd->add_option("--seed", a.seed, "override the scenario base seed")
      ->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--threads", a.threads,
                  "accepted for compatibility; execution is single-threaded");
  cmd->add_flag_function(
      "-q,--quiet", [&a](std::int64_t) { a.verbose = 0; }, "suppress progress output");
}

gfamp::ExperimentSpec load_spec(const CommonArgs& a) {
  gfamp::ExperimentSpec spec = gfamp::ExperimentSpec::load(a.config);
  if (a.seed_set) spec.scenario.base_seed = a.seed;
  if (!a.out_dir.empty()) spec.out_dir = a.out_dir;
  spec.validate();
  return spec;
}

std::vector<gfamp::MethodSpec> pick_methods(const gfamp::ExperimentSpec& spec,
                                            const CommonArgs& a) {
  if (a.methods.empty()) return spec.methods;
  std::vector<gfamp::MethodSpec> out;
  std::string cur;
  for (char ch : a.methods + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(gfamp::method_from_name(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (out.empty()) throw gfamp::ConfigError("empty method list");
  return out;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(std::stod(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (out.empty()) throw gfamp::ConfigError("empty value list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asynchronous grant-free access: AMP / LAMP harness"};
  app.require_subcommand(1);

  CommonArgs gen_a, train_a, eval_a, roc_a, se_a, sweep_a;
  CLI::App* gen = app.add_subcommand("gen-data", "generate and persist all splits");
  add_common(gen, gen_a);
  CLI::App* train = app.add_subcommand("train", "train the trainable methods");
  add_common(train, train_a);
  CLI::App* eval = app.add_subcommand("eval", "evaluate methods over the test SNRs");
  add_common(eval, eval_a);
  CLI::App* roc = app.add_subcommand("roc", "evaluate and emit the ROC table only");
  add_common(roc, roc_a);

  CLI::App* se = app.add_subcommand("se", "state-evolution table for the scenario");
  add_common(se, se_a);
  std::string se_kind = "mmse";
  int se_mc = 2000;
  long se_emp = 0;
  se->add_option("--kind", se_kind, "denoiser kind: st or mmse");
  se->add_option("--mc", se_mc, "Monte-Carlo draws per iteration");
  se->add_option("--empirical", se_emp,
                 "also run AMP on this many samples for an empirical column");

  CLI::App* sweep = app.add_subcommand("sweep", "retrain/evaluate along one axis");
  add_common(sweep, sweep_a);
  std::string axis = "tg";
  std::string values = "0,1,2,3";
  sweep->add_option("--axis", axis, "tg, m or snr");
  sweep->add_option("--values", values, "comma-separated axis values");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gfamp::cmd_gen_data(load_spec(gen_a), gen_a.verbose);
    } else if (train->parsed()) {
      const auto spec = load_spec(train_a);
      gfamp::cmd_train(spec, pick_methods(spec, train_a), train_a.verbose);
    } else if (eval->parsed()) {
      const auto spec = load_spec(eval_a);
      gfamp::cmd_eval(spec, pick_methods(spec, eval_a), true, eval_a.verbose);
      std::printf("wrote %s\n", (gfamp::results_dir(spec) / "metrics.csv").c_str());
    } else if (roc->parsed()) {
      const auto spec = load_spec(roc_a);
      const auto sums = gfamp::cmd_eval(spec, pick_methods(spec, roc_a), false, roc_a.verbose);
      gfamp::write_roc_csv(spec, sums);
      std::printf("wrote %s\n", (gfamp::results_dir(spec) / "roc.csv").c_str());
    } else if (se->parsed()) {
      const auto spec = load_spec(se_a);
      gfamp::cmd_se(spec, se_kind, se_mc, se_emp, true, se_a.verbose);
      std::printf("wrote %s\n", (gfamp::results_dir(spec) / "se.csv").c_str());
    } else if (sweep->parsed()) {
      const auto spec = load_spec(sweep_a);
      gfamp::cmd_sweep(spec, axis, parse_values(values), pick_methods(spec, sweep_a),
                       true, sweep_a.verbose);
      std::printf("wrote %s\n",
                  (gfamp::results_dir(spec) / ("sweep_" + axis + ".csv")).c_str());
    }
  } catch (const gfamp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gfamp::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const gfamp::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
