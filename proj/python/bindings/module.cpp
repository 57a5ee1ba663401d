// Python bindings over the complex-field instantiation of the library. Real-field
// work stays on the C++/CLI side; configs with field=real raise ValueError here.
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gfamp/amp.hpp"
#include "gfamp/detection.hpp"
#include "gfamp/io.hpp"
#include "gfamp/lamp.hpp"
#include "gfamp/omp.hpp"
#include "gfamp/signal_model.hpp"
#include "gfamp/state_evolution.hpp"
#include "gfamp/training.hpp"

namespace py = pybind11;
using namespace gfamp;
using S = std::complex<float>;
using json = nlohmann::json;

namespace {

void require_complex(const SystemConfig& cfg) {
  if (cfg.field != Field::cplx)
    throw ConfigError("python bindings cover the complex field; use the CLI for real");
}

py::dict sample_dict(const Sample<S>& s) {
  py::dict d;
  d["y"] = s.y;
  d["x0"] = s.x0;
  d["active"] = s.truth.active;
  d["delay"] = s.truth.delay;
  d["channels"] = s.truth.channels;
  return d;
}

py::dict dataset_dict(const Dataset<S>& ds) {
  py::dict d;
  d["config"] = ds.cfg;
  d["pilots"] = ds.pilots;
  d["smat"] = ds.smat;
  py::list samples;
  for (const Sample<S>& s : ds.samples) samples.append(sample_dict(s));
  d["samples"] = samples;
  return d;
}

py::object opt_obj(const std::optional<double>& v) {
  if (!v) return py::none();
  return py::float_(*v);
}

py::dict metrics_dict(const MetricReport& r) {
  py::dict d;
  d["threshold"] = r.threshold;
  d["n_active"] = r.n_active;
  d["n_inactive"] = r.n_inactive;
  d["n_missed"] = r.n_missed;
  d["n_false_alarm"] = r.n_false_alarm;
  d["n_delay_err"] = r.n_delay_err;
  d["missed_detection"] = opt_obj(r.missed_detection);
  d["false_alarm"] = opt_obj(r.false_alarm);
  d["delay_error"] = opt_obj(r.delay_error);
  d["nmse"] = opt_obj(r.nmse);
  d["mse"] = opt_obj(r.mse);
  return d;
}

py::dict trainlog_dict(const TrainLog& log) {
  py::dict d;
  py::list phases;
  for (const PhaseRecord& p : log.phases) {
    py::dict pd;
    pd["name"] = p.name;
    pd["steps"] = p.steps;
    pd["best_step"] = p.best_step;
    pd["val_start"] = p.val_start;
    pd["val_best"] = p.val_best;
    pd["curve"] = p.curve;
    phases.append(pd);
  }
  d["phases"] = phases;
  d["depth_val_mse"] = log.depth_val_mse;
  d["final_val_mse"] = log.final_val_mse;
  return d;
}

TrainConfig train_config_from_dict(const py::dict& d) {
  TrainConfig tc;
  for (auto item : d) {
    const std::string k = py::cast<std::string>(item.first);
    if (k == "learn_rate") tc.learn_rate = py::cast<double>(item.second);
    else if (k == "batch") tc.batch = py::cast<int>(item.second);
    else if (k == "cadence") tc.cadence = py::cast<int>(item.second);
    else if (k == "patience") tc.patience = py::cast<int>(item.second);
    else if (k == "max_steps") tc.max_steps = py::cast<int>(item.second);
    else if (k == "seed") tc.seed = py::cast<std::uint64_t>(item.second);
    else if (k == "final_refine_W") tc.final_refine_W = py::cast<bool>(item.second);
    else if (k == "verbose") tc.verbose = py::cast<bool>(item.second);
    else if (k == "sigma_floor") tc.sigma_floor = py::cast<double>(item.second);
    else throw ConfigError("train: unknown option '" + k + "'");
  }
  return tc;
}

ShrinkKind kind_from_name(const std::string& s) {
  if (s == "scalar_st") return ShrinkKind::scalar_st;
  if (s == "group_mmse") return ShrinkKind::group_mmse;
  if (s == "vector_st") return ShrinkKind::vector_st;
  if (s == "vector_mmse") return ShrinkKind::vector_mmse;
  throw ConfigError("unknown shrinkage kind: " + s);
}

const char* kind_name(ShrinkKind k) {
  switch (k) {
    case ShrinkKind::scalar_st: return "scalar_st";
    case ShrinkKind::group_mmse: return "group_mmse";
    case ShrinkKind::vector_st: return "vector_st";
    case ShrinkKind::vector_mmse: return "vector_mmse";
  }
  return "?";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "joint activity/delay detection and channel estimation via AMP and LAMP";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::enum_<Field>(m, "Field")
      .value("real", Field::real)
      .value("cplx", Field::cplx);

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_readwrite("num_users", &SystemConfig::num_users)
      .def_readwrite("pilot_len", &SystemConfig::pilot_len)
      .def_readwrite("guard_len", &SystemConfig::guard_len)
      .def_readwrite("max_delay", &SystemConfig::max_delay)
      .def_readwrite("active_prob", &SystemConfig::active_prob)
      .def_readwrite("num_antennas", &SystemConfig::num_antennas)
      .def_readwrite("snr_db", &SystemConfig::snr_db)
      .def_readwrite("gain", &SystemConfig::gain)
      .def_readwrite("field", &SystemConfig::field)
      .def_readwrite("base_seed", &SystemConfig::base_seed)
      .def("validate", &SystemConfig::validate)
      .def("group_size", &SystemConfig::group_size)
      .def("expanded_len", &SystemConfig::expanded_len)
      .def("expanded_dim", &SystemConfig::expanded_dim)
      .def("noise_var", &SystemConfig::noise_var)
      .def("delay_active_prob", &SystemConfig::delay_active_prob)
      .def("to_json", [](const SystemConfig& c) { return io::config_to_json(c).dump(); })
      .def_static("from_json", [](const std::string& s) {
        json j = json::parse(s, nullptr, false);
        if (j.is_discarded()) throw ConfigError("malformed config json");
        return io::config_from_json(j);
      })
      .def("__repr__", [](const SystemConfig& c) {
        return "SystemConfig(" + io::config_to_json(c).dump() + ")";
      });

  py::class_<ShrinkageParams>(m, "ShrinkageParams")
      .def(py::init<>())
      .def_readwrite("kind", &ShrinkageParams::kind)
      .def_readwrite("theta", &ShrinkageParams::theta)
      .def_readwrite("theta1", &ShrinkageParams::theta1)
      .def_readwrite("theta2", &ShrinkageParams::theta2)
      .def_readwrite("theta3", &ShrinkageParams::theta3)
      .def_readwrite("theta4", &ShrinkageParams::theta4)
      .def_property_readonly("kind_name",
                             [](const ShrinkageParams& p) { return kind_name(p.kind); })
      .def("param_count", &ShrinkageParams::param_count)
      .def("get", &ShrinkageParams::get)
      .def("set", &ShrinkageParams::set)
      .def_static("soft_threshold",
                  [](const std::string& kind, double theta) {
                    return ShrinkageParams::soft_threshold(kind_from_name(kind), theta);
                  },
                  py::arg("kind"), py::arg("theta") = 1.14)
      .def_static("mmse_oracle", [](const std::string& kind, const SystemConfig& cfg) {
        return ShrinkageParams::mmse_oracle(kind_from_name(kind), cfg);
      });

  m.def("pilots",
        [](const SystemConfig& cfg, std::optional<std::uint64_t> seed) {
          return generate_pilots(cfg, seed.value_or(cfg.base_seed));
        },
        py::arg("config"), py::arg("seed") = py::none());
  m.def("expanded_matrix", &build_expanded_matrix, py::arg("pilots"),
        py::arg("guard_len"));

  m.def("gen_dataset",
        [](const SystemConfig& cfg, int count, const std::string& split,
           std::optional<std::string> save_to) {
          require_complex(cfg);
          Dataset<S> ds = generate_dataset<S>(cfg, count, split);
          if (save_to) io::save_dataset(*save_to, ds, split);
          return dataset_dict(ds);
        },
        py::arg("config"), py::arg("count"), py::arg("split") = "train",
        py::arg("save_to") = py::none());
  m.def("load_dataset",
        [](const std::string& dir) { return dataset_dict(io::load_dataset<S>(dir)); });

  m.def("amp",
        [](const Mat<S>& y, const MatXd& smat, const ShrinkageParams& p, int group_size,
           int iters, bool onsager, bool separable, double sigma_floor, bool keep_trace) {
          IterOptions opt;
          opt.onsager = onsager;
          opt.separable = separable;
          opt.sigma_floor = sigma_floor;
          AmpTrace<S> tr = amp_mmv<S>(y, smat.cast<S>(), p, group_size, iters, opt);
          py::dict d;
          d["x"] = tr.x.back();
          d["sigma"] = tr.sigma;
          if (keep_trace) {
            py::list xs;
            for (const Mat<S>& x : tr.x) xs.append(x);
            d["trace"] = xs;
          }
          return d;
        },
        py::arg("y"), py::arg("smat"), py::arg("params"), py::arg("group_size"),
        py::arg("iters"), py::arg("onsager") = true, py::arg("separable") = false,
        py::arg("sigma_floor") = 1e-12, py::arg("keep_trace") = false);

  py::class_<LampModel<S>>(m, "Model")
      .def_property_readonly("structure",
                             [](const LampModel<S>& mm) {
                               return std::string(lamp_structure_name(mm.structure));
                             })
      .def_readonly("depth", &LampModel<S>::depth)
      .def_readonly("antennas", &LampModel<S>::antennas)
      .def_readonly("width", &LampModel<S>::width)
      .def_readonly("group_size", &LampModel<S>::group_size)
      .def_property_readonly("W", [](const LampModel<S>& mm) { return mm.W; })
      .def_property_readonly("smat", [](const LampModel<S>& mm) { return mm.smat; })
      .def("layer",
           [](const LampModel<S>& mm, int i) {
             if (i < 0 || i >= mm.depth) throw ConfigError("layer index out of range");
             return mm.layers[std::size_t(i)];
           })
      .def("set_layer",
           [](LampModel<S>& mm, int i, const ShrinkageParams& p) {
             if (i < 0 || i >= mm.depth) throw ConfigError("layer index out of range");
             mm.layers[std::size_t(i)] = p;
             mm.validate();
           })
      .def("validate", &LampModel<S>::validate)
      .def("forward",
           [](const LampModel<S>& mm, const Mat<S>& y, int depth) {
             return lamp_forward(mm, y, depth);
           },
           py::arg("y"), py::arg("depth") = -1)
      .def("save",
           [](const LampModel<S>& mm, const std::string& dir,
              const std::string& lineage) {
             json lj = json::parse(lineage, nullptr, false);
             if (lj.is_discarded()) throw ConfigError("malformed lineage json");
             io::save_model(dir, mm, lj);
           },
           py::arg("dir"), py::arg("lineage") = "{}")
      .def_static("load",
                  [](const std::string& dir) { return io::load_model<S>(dir); })
      .def_static(
          "make",
          [](const MatXd& smat, const std::string& structure, int depth, int antennas,
             int group_size, const ShrinkageParams& proto, int hybrid_blocks) {
            return make_lamp<S>(smat, lamp_structure_from_name(structure), depth,
                                antennas, group_size, proto, hybrid_blocks);
          },
          py::arg("smat"), py::arg("structure"), py::arg("depth"), py::arg("antennas"),
          py::arg("group_size"), py::arg("params"), py::arg("hybrid_blocks") = 2);

  m.def("train",
        [](LampModel<S>& model, const SystemConfig& cfg, long train_count,
           long val_count, const py::dict& options) {
          require_complex(cfg);
          Dataset<S> tr = generate_dataset<S>(cfg, int(train_count), "train");
          Dataset<S> va = generate_dataset<S>(cfg, int(val_count), "val");
          TrainSet<S> ts = make_trainset(tr, model.width);
          TrainSet<S> vs = make_trainset(va, model.width);
          TrainLog log = train_lamp(model, ts, vs, train_config_from_dict(options));
          return trainlog_dict(log);
        },
        py::arg("model"), py::arg("config"), py::arg("train_count"),
        py::arg("val_count"), py::arg("options") = py::dict());

  m.def("group_refine",
        [](const Mat<S>& x, int group_size) { return group_refine(x, group_size); },
        py::arg("x"), py::arg("group_size"));

  m.def("detect",
        [](const Mat<S>& refined, int group_size, double threshold) {
          DetectionResult r = detect(refined, group_size, threshold);
          py::dict d;
          d["active"] = r.active;
          d["delay"] = r.delay;
          d["score"] = r.score;
          d["threshold"] = r.threshold;
          return d;
        },
        py::arg("refined"), py::arg("group_size"), py::arg("threshold"));

  py::class_<UserRecord>(m, "UserRecord")
      .def(py::init<>())
      .def_readwrite("truth_active", &UserRecord::truth_active)
      .def_readwrite("truth_delay", &UserRecord::truth_delay)
      .def_readwrite("est_delay", &UserRecord::est_delay)
      .def_readwrite("score", &UserRecord::score)
      .def("__repr__", [](const UserRecord& u) {
        return "UserRecord(truth_active=" + std::to_string(int(u.truth_active)) +
               ", truth_delay=" + std::to_string(u.truth_delay) +
               ", est_delay=" + std::to_string(u.est_delay) +
               ", score=" + std::to_string(u.score) + ")";
      });

  py::class_<RocPoint>(m, "RocPoint")
      .def(py::init<>())
      .def_readwrite("threshold", &RocPoint::threshold)
      .def_readwrite("false_alarm", &RocPoint::false_alarm)
      .def_readwrite("missed_detection", &RocPoint::missed_detection);

  m.def("pool_records",
        [](const Mat<S>& refined, const std::vector<std::uint8_t>& active,
           const std::vector<int>& delay, int group_size) {
          if (refined.rows() % group_size != 0 ||
              long(active.size()) != refined.rows() / group_size ||
              active.size() != delay.size())
            throw ConfigError("pool_records: truth size mismatch");
          GroundTruth<S> t;
          t.active = active;
          t.delay = delay;
          std::vector<UserRecord> pool;
          pool_records(refined, t, group_size, pool);
          return pool;
        },
        py::arg("refined"), py::arg("active"), py::arg("delay"), py::arg("group_size"));

  m.def("metrics_at",
        [](const std::vector<UserRecord>& pool, double threshold) {
          return metrics_dict(metrics_at(pool, threshold));
        },
        py::arg("pool"), py::arg("threshold"));
  m.def("calibrate_threshold", &calibrate_threshold, py::arg("pool"), py::arg("eps"));
  m.def("roc_sweep", &roc_sweep, py::arg("pool"), py::arg("thresholds"));
  m.def("roc_md_at_fa", &roc_md_at_fa, py::arg("roc"), py::arg("fa"));

  m.def("omp",
        [](const Mat<S>& y, const MatXd& smat, int group_size, int cap) {
          OmpResult<S> r = omp_solve<S>(smat.cast<S>(), y, group_size, cap);
          py::dict d;
          d["estimate"] = r.estimate;
          d["cols"] = r.cols;
          d["residual_norms"] = r.residual_norms;
          d["rank_deficient"] = r.rank_deficient;
          return d;
        },
        py::arg("y"), py::arg("smat"), py::arg("group_size"), py::arg("cap"));

  m.def("se",
        [](const SystemConfig& cfg, const std::string& kind, int iters, int mc) {
          require_complex(cfg);
          const int M = cfg.num_antennas;
          ShrinkKind sk;
          ShrinkageParams p;
          if (kind == "st") {
            sk = M == 1 ? ShrinkKind::scalar_st : ShrinkKind::vector_st;
            p = ShrinkageParams::soft_threshold(sk);
          } else if (kind == "mmse") {
            sk = M == 1 ? ShrinkKind::group_mmse : ShrinkKind::vector_mmse;
            p = ShrinkageParams::mmse_oracle(sk, cfg);
          } else {
            throw ConfigError("se: kind must be st or mmse");
          }
          GroupSampler<S> prior = make_group_prior<S>(cfg);
          SeResult r = state_evolution<S>(int(cfg.expanded_len()),
                                          int(cfg.expanded_dim()), cfg.group_size(), M,
                                          p, cfg.noise_var(), iters, mc, prior,
                                          cfg.base_seed);
          py::dict d;
          d["delta0_sq"] = r.delta0_sq;
          d["delta_sq"] = r.delta_sq;
          d["stderr_delta_sq"] = r.stderr_delta_sq;
          d["mse_pred"] = r.mse_pred;
          return d;
        },
        py::arg("config"), py::arg("kind") = "mmse", py::arg("iters") = 10,
        py::arg("mc") = 2000);
}
