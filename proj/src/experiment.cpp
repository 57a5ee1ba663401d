#include "gfamp/experiment.hpp"

#include <fstream>

#include "gfamp/io.hpp"

namespace gfamp {

using nlohmann::json;

static const char* kKnownMethods[] = {"amp_st",  "amp_mmse",  "lamp_st",
                                      "lamp_mmse", "lamp_d",  "lamp_c_st",
                                      "lamp_c_mmse", "omp"};

MethodSpec method_from_name(const std::string& s) {
  MethodSpec m;
  for (const char* k : kKnownMethods)
    if (s == k) {
      m.name = s;
      return m;
    }
  if (s.rfind("lamp_h", 0) == 0) {
    m.name = "lamp_h";
    const std::string suffix = s.substr(6);
    if (!suffix.empty()) {
      try {
        m.hybrid_blocks = std::stoi(suffix);
      } catch (...) {
        throw ConfigError("bad hybrid method name: " + s);
      }
      if (m.hybrid_blocks < 1) throw ConfigError("bad hybrid block count in: " + s);
    }
    return m;
  }
  throw ConfigError("unknown method: " + s);
}

bool method_needs_training(const MethodSpec& m) {
  return m.name.rfind("lamp", 0) == 0;
}

ExperimentSpec ExperimentSpec::preset(const std::string& name) {
  ExperimentSpec e;
  e.name = name;
  e.scenario = SystemConfig{};  // N=100 L=40 Tg=D=3 pa=0.1 M=1 0dB complex
  if (name == "paper") {
    e.train_count = 100000;
    e.val_count = 5000;
    e.test_count = 5000;
    e.test_snrs = {0, 4, 8, 12, 16};
  } else if (name == "desk") {
    e.scenario.num_users = 50;
    e.scenario.pilot_len = 20;
    e.train_count = 10000;
    e.val_count = 2000;
    e.test_count = 2000;
    e.test_snrs = {0};
    e.train.max_steps = 4000;
    e.train.patience = 12;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  for (const char* m : {"amp_st", "amp_mmse", "lamp_st", "lamp_mmse", "omp"})
    e.methods.push_back(method_from_name(m));
  return e;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec e = preset(j.value("preset", "paper"));
  if (j.contains("name")) e.name = j["name"];
  if (j.contains("scenario")) {
    json sc = io::config_to_json(e.scenario);
    for (auto& [k, v] : j["scenario"].items()) sc[k] = v;
    e.scenario = io::config_from_json(sc);
  }
  if (j.contains("train_count")) e.train_count = j["train_count"];
  if (j.contains("val_count")) e.val_count = j["val_count"];
  if (j.contains("test_count")) e.test_count = j["test_count"];
  if (j.contains("test_snrs")) e.test_snrs = j["test_snrs"].get<std::vector<double>>();
  if (j.contains("iters")) e.iters = j["iters"];
  if (j.contains("fa_target")) e.fa_target = j["fa_target"];
  if (j.contains("roc_fa_grid"))
    e.roc_fa_grid = j["roc_fa_grid"].get<std::vector<double>>();
  if (j.contains("out_dir")) e.out_dir = j["out_dir"];
  if (j.contains("methods")) {
    e.methods.clear();
    for (const json& mj : j["methods"])
      e.methods.push_back(method_from_name(mj.get<std::string>()));
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    if (t.contains("learn_rate")) e.train.learn_rate = t["learn_rate"];
    if (t.contains("batch")) e.train.batch = t["batch"];
    if (t.contains("cadence")) e.train.cadence = t["cadence"];
    if (t.contains("patience")) e.train.patience = t["patience"];
    if (t.contains("max_steps")) e.train.max_steps = t["max_steps"];
    if (t.contains("seed")) e.train.seed = t["seed"];
    if (t.contains("final_refine_W")) e.train.final_refine_W = t["final_refine_W"];
  }
  e.validate();
  return e;
}

ExperimentSpec ExperimentSpec::load(const std::string& ref) {
  if (ref.rfind("preset:", 0) == 0) return preset(ref.substr(7));
  std::ifstream f(ref);
  if (!f) throw IoError("cannot open experiment config: " + ref);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed experiment config: " + ref);
  return from_json(j);
}

json ExperimentSpec::to_json() const {
  json j;
  j["name"] = name;
  j["scenario"] = io::config_to_json(scenario);
  j["train_count"] = train_count;
  j["val_count"] = val_count;
  j["test_count"] = test_count;
  j["test_snrs"] = test_snrs;
  j["iters"] = iters;
  j["fa_target"] = fa_target;
  j["roc_fa_grid"] = roc_fa_grid;
  j["out_dir"] = out_dir;
  json ms = json::array();
  for (const MethodSpec& m : methods) ms.push_back(m.id());
  j["methods"] = ms;
  j["train"] = {{"learn_rate", train.learn_rate}, {"batch", train.batch},
                {"cadence", train.cadence},       {"patience", train.patience},
                {"max_steps", train.max_steps},   {"seed", train.seed},
                {"final_refine_W", train.final_refine_W}};
  return j;
}

std::string ExperimentSpec::hash() const { return io::fnv1a_hex(to_json().dump()); }

void ExperimentSpec::validate() const {
  scenario.validate();
  if (train_count < 1 || val_count < 1 || test_count < 1)
    throw ConfigError("experiment: split sizes must be positive");
  if (iters < 1) throw ConfigError("experiment: iters must be >= 1");
  if (!(fa_target > 0 && fa_target < 1))
    throw ConfigError("experiment: fa_target outside (0,1)");
  for (const MethodSpec& m : methods) {
    if (m.name == "lamp_h" && scenario.num_antennas % m.hybrid_blocks != 0)
      throw ConfigError("experiment: antennas not divisible by hybrid blocks");
  }
}

}  // namespace gfamp
