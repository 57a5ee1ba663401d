#include "gfamp/evalpipe.hpp"

#include <cmath>
#include <cstdio>

#include "gfamp/amp.hpp"
#include "gfamp/io.hpp"
#include "gfamp/omp.hpp"

namespace gfamp {

using nlohmann::json;

fs::path exp_root(const ExperimentSpec& spec) {
  return fs::path(spec.out_dir) / spec.name;
}
fs::path split_dir(const ExperimentSpec& spec, const std::string& split) {
  return exp_root(spec) / "data" / split;
}
fs::path model_dir(const ExperimentSpec& spec, const MethodSpec& m) {
  return exp_root(spec) / "models" / m.id();
}
fs::path results_dir(const ExperimentSpec& spec) { return exp_root(spec) / "results"; }

namespace {

std::string snr_tag(double snr_db) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", snr_db);
  return buf;
}

template <class F>
auto with_field(Field f, F&& fn) {
  if (f == Field::cplx) return fn(std::complex<float>{});
  return fn(float{});
}

// items the trained model depends on; test-side spec fields excluded
json model_lineage(const ExperimentSpec& spec, const MethodSpec& m) {
  json j;
  j["scenario"] = io::config_to_json(spec.scenario);
  j["train_count"] = spec.train_count;
  j["val_count"] = spec.val_count;
  j["iters"] = spec.iters;
  j["method"] = m.id();
  j["train"] = {{"learn_rate", spec.train.learn_rate}, {"batch", spec.train.batch},
                {"cadence", spec.train.cadence},       {"patience", spec.train.patience},
                {"max_steps", spec.train.max_steps},   {"seed", spec.train.seed},
                {"final_refine_W", spec.train.final_refine_W}};
  return j;
}

std::string model_hash(const ExperimentSpec& spec, const MethodSpec& m) {
  return io::fnv1a_hex(model_lineage(spec, m).dump());
}

json trainlog_to_json(const TrainLog& log) {
  json j;
  j["depth_val_mse"] = log.depth_val_mse;
  j["final_val_mse"] = log.final_val_mse;
  json ph = json::array();
  for (const PhaseRecord& p : log.phases) {
    json c = json::array();
    for (const auto& [s, v] : p.curve) c.push_back({s, v});
    ph.push_back({{"name", p.name},
                  {"steps", p.steps},
                  {"best_step", p.best_step},
                  {"val_start", p.val_start},
                  {"val_best", p.val_best},
                  {"curve", c}});
  }
  j["phases"] = ph;
  return j;
}

TrainLog trainlog_from_json(const json& j) {
  TrainLog log;
  log.depth_val_mse = j.at("depth_val_mse").get<std::vector<double>>();
  log.final_val_mse = j.at("final_val_mse");
  for (const json& pj : j.at("phases")) {
    PhaseRecord p;
    p.name = pj.at("name");
    p.steps = pj.at("steps");
    p.best_step = pj.at("best_step");
    p.val_start = pj.at("val_start");
    p.val_best = pj.at("val_best");
    for (const json& cj : pj.at("curve"))
      p.curve.push_back({cj[0].get<int>(), cj[1].get<double>()});
    log.phases.push_back(p);
  }
  return log;
}

template <class S>
Dataset<S> ensure_dataset(const ExperimentSpec& spec, const std::string& split,
                          double snr_db, long count, int verbose) {
  SystemConfig cfg = spec.scenario;
  cfg.snr_db = snr_db;
  const fs::path dir = split_dir(spec, split);
  if (fs::exists(dir / "manifest.json")) {
    const json man = io::read_manifest(dir);
    if (man.value("config_hash", "") == io::config_hash(cfg) &&
        man.value("count", -1L) == count)
      return io::load_dataset<S>(dir);
    if (verbose)
      std::fprintf(stderr, "[data] %s stale, regenerating\n", dir.string().c_str());
  }
  if (verbose)
    std::fprintf(stderr, "[data] generating %s (%ld samples)\n", dir.string().c_str(),
                 count);
  Dataset<S> ds = generate_dataset<S>(cfg, int(count), split);
  io::save_dataset(dir, ds, split);
  return ds;
}

// Model skeleton for a method name; untrained AMP methods share this path (their
// "model" is the matched-filter initialization, never trained).
template <class S>
LampModel<S> make_method_model(const ExperimentSpec& spec, const MethodSpec& m) {
  const SystemConfig& c = spec.scenario;
  const int M = c.num_antennas;
  const MatXd pilots = generate_pilots(c, c.base_seed);
  const MatXd smat = build_expanded_matrix(pilots, c.guard_len);
  LampStructure st;
  ShrinkKind kind;
  int blocks = m.hybrid_blocks;
  const std::string& n = m.name;
  if (n == "amp_st" || n == "lamp_st") {
    st = M == 1 ? LampStructure::smv : (n == "amp_st" ? LampStructure::cent : LampStructure::dist);
    kind = (st == LampStructure::cent) ? ShrinkKind::vector_st : ShrinkKind::scalar_st;
  } else if (n == "amp_mmse" || n == "lamp_mmse") {
    st = M == 1 ? LampStructure::smv : (n == "amp_mmse" ? LampStructure::cent : LampStructure::dist);
    kind = (st == LampStructure::cent) ? ShrinkKind::vector_mmse : ShrinkKind::group_mmse;
  } else if (n == "lamp_d") {
    st = M == 1 ? LampStructure::smv : LampStructure::dist;
    kind = ShrinkKind::group_mmse;
  } else if (n == "lamp_c_st") {
    st = LampStructure::cent;
    kind = ShrinkKind::vector_st;
  } else if (n == "lamp_c_mmse") {
    st = LampStructure::cent;
    kind = ShrinkKind::vector_mmse;
  } else if (n == "lamp_h") {
    st = LampStructure::hybrid;
    kind = ShrinkKind::vector_mmse;
  } else {
    throw ConfigError("method has no model: " + n);
  }
  ShrinkageParams proto = (kind == ShrinkKind::scalar_st || kind == ShrinkKind::vector_st)
                              ? ShrinkageParams::soft_threshold(kind)
                              : ShrinkageParams::mmse_oracle(kind, c);
  return make_lamp<S>(smat, st, spec.iters, M, c.group_size(), proto, blocks);
}

template <class S>
LampModel<S> ensure_model(const ExperimentSpec& spec, const MethodSpec& m, int verbose) {
  if (!method_needs_training(m)) return make_method_model<S>(spec, m);
  const fs::path dir = model_dir(spec, m);
  const std::string want = model_hash(spec, m);
  if (fs::exists(dir / "manifest.json")) {
    const json man = io::read_manifest(dir);
    if (man.contains("lineage") && man["lineage"].value("hash", "") == want)
      return io::load_model<S>(dir);
    if (verbose)
      std::fprintf(stderr, "[model] %s stale, retraining\n", dir.string().c_str());
  }
  Dataset<S> tr = ensure_dataset<S>(spec, "train", spec.scenario.snr_db,
                                    spec.train_count, verbose);
  Dataset<S> va = ensure_dataset<S>(spec, "val", spec.scenario.snr_db, spec.val_count,
                                    verbose);
  LampModel<S> model = make_method_model<S>(spec, m);
  TrainSet<S> ts = make_trainset(tr, model.width);
  TrainSet<S> vs = make_trainset(va, model.width);
  tr.samples.clear();
  tr.samples.shrink_to_fit();
  va.samples.clear();
  va.samples.shrink_to_fit();
  TrainConfig tc = spec.train;
  tc.verbose = verbose;
  if (verbose)
    std::fprintf(stderr, "[model] training %s (%ld blocks of width %d)\n",
                 m.id().c_str(), ts.count, ts.width);
  TrainLog log = train_lamp(model, ts, vs, tc);
  json lineage = model_lineage(spec, m);
  lineage["hash"] = want;
  io::save_model(dir, model, lineage);
  const std::string lj = trainlog_to_json(log).dump(2) + "\n";
  io::write_bytes(dir / "trainlog.json", lj.data(), lj.size());
  // per-phase validation curve, one row per evaluation
  auto csv = io::open_csv(dir / "trainlog.csv", "gfamp.trainlog.v1",
                          {{"method", m.id()}, {"model_hash", want}});
  csv << "phase,step,val_mse\n";
  for (const PhaseRecord& p : log.phases)
    for (const auto& [s, v] : p.curve) csv << p.name << "," << s << "," << v << "\n";
  return model;
}

template <class S>
MethodRun run_method(const ExperimentSpec& spec, const MethodSpec& m,
                     const LampModel<S>* model, const Dataset<S>& test) {
  MethodRun r;
  const int G = test.cfg.group_size();
  const int cap =
      std::max(1, int(std::lround(2.0 * test.cfg.active_prob * test.cfg.num_users)));
  for (const Sample<S>& s : test.samples) {
    Mat<S> xhat;
    if (m.name == "omp")
      xhat = omp_solve<S>(test.smat_s, s.y, G, cap).estimate;
    else
      xhat = lamp_forward(*model, s.y);
    Mat<S> refined = group_refine(xhat, G);
    pool_records(refined, s.truth, G, r.pool);
    r.mse_sum += (xhat - s.x0).squaredNorm();
    ++r.count;
    const double sig = s.x0.squaredNorm();
    if (sig > 0) {
      r.err_sq += (refined - s.x0).squaredNorm();
      r.sig_sq += sig;
    }
  }
  return r;
}

EvalSummary summarize(const ExperimentSpec& spec, const MethodSpec& m, double snr_db,
                      const MethodRun& run) {
  EvalSummary s;
  s.method = m.id();
  s.snr_db = snr_db;
  std::vector<double> thresholds;
  for (double eps : spec.roc_fa_grid)
    thresholds.push_back(calibrate_threshold(run.pool, eps));
  s.roc = roc_sweep(run.pool, thresholds);
  const double q = calibrate_threshold(run.pool, spec.fa_target);
  s.at_fa = metrics_at(run.pool, q);
  if (run.sig_sq > 0) s.at_fa.nmse = run.err_sq / run.sig_sq;
  if (run.count > 0) s.at_fa.mse = run.mse_sum / double(run.count);
  return s;
}

template <class S>
EvalSummary evaluate_method_t(const ExperimentSpec& spec, const MethodSpec& m,
                              double snr_db, int verbose) {
  LampModel<S> model;
  const bool has_model = m.name != "omp";
  if (has_model) model = ensure_model<S>(spec, m, verbose);
  Dataset<S> test = ensure_dataset<S>(spec, "test_snr" + snr_tag(snr_db), snr_db,
                                      spec.test_count, verbose);
  if (verbose)
    std::fprintf(stderr, "[eval] %s at %g dB (%zu samples)\n", m.id().c_str(), snr_db,
                 test.samples.size());
  MethodRun run = run_method<S>(spec, m, has_model ? &model : nullptr, test);
  return summarize(spec, m, snr_db, run);
}

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8g", *v);
  return buf;
}

std::vector<std::pair<std::string, std::string>> csv_meta(const ExperimentSpec& spec) {
  return {{"experiment", spec.name},
          {"config_hash", io::config_hash(spec.scenario)},
          {"spec_hash", spec.hash()},
          {"base_seed", std::to_string(spec.scenario.base_seed)}};
}

}  // namespace

void write_roc_csv(const ExperimentSpec& spec, const std::vector<EvalSummary>& sums) {
  auto roc = io::open_csv(results_dir(spec) / "roc.csv", "gfamp.roc.v1", csv_meta(spec));
  roc << "method,snr_db,threshold,false_alarm,missed_detection\n";
  for (const EvalSummary& s : sums)
    for (const RocPoint& p : s.roc)
      roc << s.method << "," << s.snr_db << "," << p.threshold << "," << p.false_alarm
          << "," << p.missed_detection << "\n";
}

void write_metrics_csv(const ExperimentSpec& spec, const std::vector<EvalSummary>& sums) {
  auto met =
      io::open_csv(results_dir(spec) / "metrics.csv", "gfamp.metrics.v1", csv_meta(spec));
  met << "method,snr_db,threshold,false_alarm,missed_detection,delay_error,nmse,mse,"
         "n_active,n_inactive\n";
  for (const EvalSummary& s : sums) {
    const MetricReport& r = s.at_fa;
    met << s.method << "," << s.snr_db << "," << r.threshold << ","
        << opt_str(r.false_alarm) << "," << opt_str(r.missed_detection) << ","
        << opt_str(r.delay_error) << "," << opt_str(r.nmse) << "," << opt_str(r.mse)
        << "," << r.n_active << "," << r.n_inactive << "\n";
  }
}

void cmd_gen_data(const ExperimentSpec& spec, int verbose) {
  with_field(spec.scenario.field, [&](auto tag) {
    using S = decltype(tag);
    ensure_dataset<S>(spec, "train", spec.scenario.snr_db, spec.train_count, verbose);
    ensure_dataset<S>(spec, "val", spec.scenario.snr_db, spec.val_count, verbose);
    for (double snr : spec.test_snrs)
      ensure_dataset<S>(spec, "test_snr" + snr_tag(snr), snr, spec.test_count, verbose);
    return 0;
  });
}

void cmd_train(const ExperimentSpec& spec, const std::vector<MethodSpec>& methods,
               int verbose) {
  with_field(spec.scenario.field, [&](auto tag) {
    using S = decltype(tag);
    for (const MethodSpec& m : methods)
      if (method_needs_training(m)) ensure_model<S>(spec, m, verbose);
    return 0;
  });
}

std::vector<EvalSummary> cmd_eval(const ExperimentSpec& spec,
                                  const std::vector<MethodSpec>& methods,
                                  bool write_files, int verbose) {
  std::vector<EvalSummary> sums;
  with_field(spec.scenario.field, [&](auto tag) {
    using S = decltype(tag);
    for (const MethodSpec& m : methods)
      for (double snr : spec.test_snrs)
        sums.push_back(evaluate_method_t<S>(spec, m, snr, verbose));
    return 0;
  });
  if (write_files) {
    write_roc_csv(spec, sums);
    write_metrics_csv(spec, sums);
  }
  return sums;
}

EvalSummary evaluate_method(const ExperimentSpec& spec, const MethodSpec& m,
                            double snr_db, int verbose) {
  EvalSummary out;
  with_field(spec.scenario.field, [&](auto tag) {
    using S = decltype(tag);
    out = evaluate_method_t<S>(spec, m, snr_db, verbose);
    return 0;
  });
  return out;
}

SeTable cmd_se(const ExperimentSpec& spec, const std::string& kind, int mc, long mc_emp,
               bool write_files, int verbose) {
  const SystemConfig& c = spec.scenario;
  const int M = c.num_antennas;
  ShrinkKind sk;
  if (kind == "st")
    sk = M == 1 ? ShrinkKind::scalar_st : ShrinkKind::vector_st;
  else if (kind == "mmse")
    sk = M == 1 ? ShrinkKind::group_mmse : ShrinkKind::vector_mmse;
  else
    throw ConfigError("se: kind must be st or mmse");
  ShrinkageParams p = (kind == "st") ? ShrinkageParams::soft_threshold(sk)
                                     : ShrinkageParams::mmse_oracle(sk, c);
  SeTable t;
  with_field(c.field, [&](auto tag) {
    using S = decltype(tag);
    GroupSampler<S> prior = make_group_prior<S>(c);
    t.se = state_evolution<S>(int(c.expanded_len()), int(c.expanded_dim()),
                              c.group_size(), M, p, c.noise_var(), spec.iters, mc,
                              prior, c.base_seed);
    if (mc_emp > 0) {
      Dataset<S> ds = generate_dataset<S>(c, int(mc_emp), "se_emp");
      std::vector<double> err(std::size_t(spec.iters), 0.0);
      IterOptions opt;
      for (const Sample<S>& s : ds.samples) {
        AmpTrace<S> tr = amp_mmv<S>(s.y, ds.smat_s, p, c.group_size(), spec.iters, opt);
        for (int i = 0; i < spec.iters; ++i)
          err[std::size_t(i)] += (tr.x[std::size_t(i)] - s.x0).squaredNorm();
      }
      for (int i = 0; i < spec.iters; ++i)
        t.empirical_delta_sq.push_back(c.noise_var() + err[std::size_t(i)] /
                                                           double(mc_emp) /
                                                           double(c.expanded_len()) / M);
    }
    return 0;
  });
  if (write_files) {
    auto csv = io::open_csv(results_dir(spec) / "se.csv", "gfamp.se.v1",
                            {{"experiment", spec.name},
                             {"config_hash", io::config_hash(c)},
                             {"kind", kind},
                             {"mc", std::to_string(mc)}});
    csv << "iter,delta_sq,stderr,mse_pred" << (mc_emp > 0 ? ",empirical_delta_sq" : "")
        << "\n";
    for (std::size_t i = 0; i < t.se.delta_sq.size(); ++i) {
      csv << (i + 1) << "," << t.se.delta_sq[i] << "," << t.se.stderr_delta_sq[i] << ","
          << t.se.mse_pred[i];
      if (mc_emp > 0) csv << "," << t.empirical_delta_sq[i];
      csv << "\n";
    }
  }
  if (verbose)
    std::fprintf(stderr, "[se] %zu iterations, delta0^2=%.6g\n", t.se.delta_sq.size(),
                 t.se.delta0_sq);
  return t;
}

ExperimentSpec sweep_point(const ExperimentSpec& spec, const std::string& axis,
                           double value) {
  ExperimentSpec p = spec;
  if (axis == "tg") {
    p.scenario.guard_len = int(value);
    p.scenario.max_delay = int(value);
    p.name = spec.name + "_tg" + snr_tag(value);
  } else if (axis == "m") {
    p.scenario.num_antennas = int(value);
    p.name = spec.name + "_m" + snr_tag(value);
  } else if (axis == "snr") {
    p.scenario.snr_db = value;
    p.test_snrs = {value};
    p.name = spec.name + "_snr" + snr_tag(value);
  } else {
    throw ConfigError("sweep: axis must be tg, m or snr");
  }
  p.validate();
  return p;
}

std::vector<SweepRow> cmd_sweep(const ExperimentSpec& spec, const std::string& axis,
                                const std::vector<double>& values,
                                const std::vector<MethodSpec>& methods,
                                bool write_files, int verbose) {
  std::vector<SweepRow> rows;
  for (double v : values) {
    const ExperimentSpec p = sweep_point(spec, axis, v);
    for (const MethodSpec& m : methods) {
      const EvalSummary s = evaluate_method(p, m, p.scenario.snr_db, verbose);
      SweepRow r;
      r.axis = axis;
      r.value = v;
      r.method = m.id();
      r.threshold = s.at_fa.threshold;
      r.false_alarm = s.at_fa.false_alarm.value_or(0);
      r.missed_detection = s.at_fa.missed_detection.value_or(0);
      r.delay_error = s.at_fa.delay_error.value_or(0);
      r.nmse = s.at_fa.nmse.value_or(0);
      rows.push_back(r);
    }
  }
  if (write_files) {
    auto csv = io::open_csv(results_dir(spec) / ("sweep_" + axis + ".csv"),
                            "gfamp.sweep.v1",
                            {{"experiment", spec.name}, {"spec_hash", spec.hash()}});
    csv << "axis,value,method,threshold,false_alarm,missed_detection,delay_error,nmse\n";
    for (const SweepRow& r : rows)
      csv << r.axis << "," << r.value << "," << r.method << "," << r.threshold << ","
          << r.false_alarm << "," << r.missed_detection << "," << r.delay_error << ","
          << r.nmse << "\n";
  }
  return rows;
}

TrainLog load_trainlog(const ExperimentSpec& spec, const MethodSpec& m) {
  const fs::path p = model_dir(spec, m) / "trainlog.json";
  if (!fs::exists(p)) throw IoError("no training log at " + p.string());
  std::vector<char> buf = io::read_bytes(p);
  json j = json::parse(buf.begin(), buf.end(), nullptr, false);
  if (j.is_discarded()) throw IoError("malformed training log at " + p.string());
  return trainlog_from_json(j);
}

}  // namespace gfamp
