#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gfamp/config.hpp"
#include "gfamp/lamp.hpp"
#include "gfamp/signal_model.hpp"

// Directory container: manifest.json plus one raw .bin file per array.
// Arrays are row-major, little-endian, complex as interleaved (re, im) pairs.

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

namespace gfamp::io {

namespace fs = std::filesystem;
using nlohmann::json;

// --- low-level file helpers (io.cpp) ---
void write_bytes(const fs::path& path, const void* data, std::size_t n);
std::vector<char> read_bytes(const fs::path& path);
void write_manifest(const fs::path& dir, const json& manifest);
json read_manifest(const fs::path& dir);
std::string fnv1a_hex(const std::string& s);

json config_to_json(const SystemConfig& cfg);
SystemConfig config_from_json(const json& j);
// stable hash of the canonical config encoding, embedded in every artifact
std::string config_hash(const SystemConfig& cfg);

// csv with comment header lines: schema id, config hash, free-form meta
std::ofstream open_csv(const fs::path& path, const std::string& schema,
                       const std::vector<std::pair<std::string, std::string>>& meta);

// --- dtype mapping ---
template <class T>
struct dtype_of;
template <> struct dtype_of<float> { static constexpr const char* name = "f32"; };
template <> struct dtype_of<double> { static constexpr const char* name = "f64"; };
template <> struct dtype_of<std::complex<float>> { static constexpr const char* name = "c64"; };
template <> struct dtype_of<std::complex<double>> { static constexpr const char* name = "c128"; };
template <> struct dtype_of<std::uint8_t> { static constexpr const char* name = "u8"; };
template <> struct dtype_of<std::int32_t> { static constexpr const char* name = "i32"; };

// --- array save/load ---
template <class T>
json save_raw(const fs::path& dir, const std::string& name, const T* data, long rows,
              long cols) {
  const std::string file = name + ".bin";
  write_bytes(dir / file, data, sizeof(T) * std::size_t(rows) * std::size_t(cols));
  return json{{"dtype", dtype_of<T>::name}, {"shape", {rows, cols}}, {"file", file}};
}

template <class Derived>
json save_matrix(const fs::path& dir, const std::string& name,
                 const Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  // row-major on disk
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  return save_raw<T>(dir, name, rm.data(), m.rows(), m.cols());
}

inline void check_entry(const json& e, const std::string& name, const char* dtype) {
  if (!e.contains("dtype") || e["dtype"] != dtype)
    throw IoError("array '" + name + "': expected dtype " + dtype + ", got " +
                  e.value("dtype", "?"));
}

template <class T>
std::vector<T> load_raw(const fs::path& dir, const json& manifest,
                        const std::string& name, long* rows = nullptr,
                        long* cols = nullptr) {
  if (!manifest.contains("arrays") || !manifest["arrays"].contains(name))
    throw IoError("manifest of " + dir.string() + " lacks array '" + name + "'");
  const json& e = manifest["arrays"][name];
  check_entry(e, name, dtype_of<T>::name);
  const long r = e["shape"][0], c = e["shape"][1];
  std::vector<char> bytes = read_bytes(dir / e["file"].get<std::string>());
  if (bytes.size() != sizeof(T) * std::size_t(r) * std::size_t(c))
    throw IoError("array '" + name + "': size mismatch in " + dir.string());
  std::vector<T> out(std::size_t(r) * std::size_t(c));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  if (rows) *rows = r;
  if (cols) *cols = c;
  return out;
}

template <class T>
Mat<T> load_matrix(const fs::path& dir, const json& manifest, const std::string& name) {
  long r = 0, c = 0;
  std::vector<T> buf = load_raw<T>(dir, manifest, name, &r, &c);
  using RM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RM>(buf.data(), r, c);
}

// --- dataset container ---
template <class S>
void save_dataset(const fs::path& dir, const Dataset<S>& ds, const std::string& split_tag) {
  fs::create_directories(dir);
  const long count = long(ds.samples.size());
  const int N = ds.cfg.num_users, M = ds.cfg.num_antennas;
  const long Lt = ds.cfg.expanded_len();
  std::vector<std::uint8_t> active(std::size_t(count) * N);
  std::vector<std::int32_t> delay(std::size_t(count) * N);
  Mat<S> channels(count * N, M), y(count * Lt, M);
  for (long i = 0; i < count; ++i) {
    const auto& s = ds.samples[std::size_t(i)];
    for (int n = 0; n < N; ++n) {
      active[std::size_t(i * N + n)] = s.truth.active[std::size_t(n)];
      delay[std::size_t(i * N + n)] = s.truth.delay[std::size_t(n)];
    }
    channels.middleRows(i * N, N) = s.truth.channels;
    y.middleRows(i * Lt, Lt) = s.y;
  }
  json man;
  man["format"] = "gfamp.container.v1";
  man["kind"] = "dataset";
  man["split"] = split_tag;
  man["count"] = count;
  man["config"] = config_to_json(ds.cfg);
  man["config_hash"] = config_hash(ds.cfg);
  man["seed_lineage"] = {{"base_seed", ds.cfg.base_seed}, {"split", split_tag}};
  man["arrays"]["pilots"] = save_matrix(dir, "pilots", ds.pilots);
  man["arrays"]["smat"] = save_matrix(dir, "smat", ds.smat);
  man["arrays"]["active"] = save_raw<std::uint8_t>(dir, "active", active.data(), count, N);
  man["arrays"]["delay"] = save_raw<std::int32_t>(dir, "delay", delay.data(), count, N);
  man["arrays"]["channels"] = save_matrix(dir, "channels", channels);
  man["arrays"]["y"] = save_matrix(dir, "y", y);
  write_manifest(dir, man);
}

template <class S>
Dataset<S> load_dataset(const fs::path& dir) {
  const json man = read_manifest(dir);
  if (man.value("kind", "") != "dataset")
    throw IoError(dir.string() + ": not a dataset container");
  Dataset<S> ds;
  ds.cfg = config_from_json(man["config"]);
  if (ds.cfg.field != scalar_traits<S>::field)
    throw IoError(dir.string() + ": dataset field does not match requested scalar type");
  const long count = man["count"];
  const int N = ds.cfg.num_users, M = ds.cfg.num_antennas;
  const long Lt = ds.cfg.expanded_len();
  ds.pilots = load_matrix<double>(dir, man, "pilots");
  ds.smat = load_matrix<double>(dir, man, "smat");
  ds.smat_s = ds.smat.template cast<S>();
  std::vector<std::uint8_t> active = load_raw<std::uint8_t>(dir, man, "active");
  std::vector<std::int32_t> delay = load_raw<std::int32_t>(dir, man, "delay");
  Mat<S> channels = load_matrix<S>(dir, man, "channels");
  Mat<S> y = load_matrix<S>(dir, man, "y");
  ds.samples.resize(std::size_t(count));
  for (long i = 0; i < count; ++i) {
    auto& s = ds.samples[std::size_t(i)];
    s.truth.active.assign(active.begin() + i * N, active.begin() + (i + 1) * N);
    s.truth.delay.assign(delay.begin() + i * N, delay.begin() + (i + 1) * N);
    s.truth.channels = channels.middleRows(i * N, N);
    s.x0 = effective_channel<S>(ds.cfg, s.truth);
    s.y = y.middleRows(i * Lt, Lt);
  }
  return ds;
}

// --- model container ---
template <class S>
void save_model(const fs::path& dir, const LampModel<S>& m, const json& lineage) {
  fs::create_directories(dir);
  json man;
  man["format"] = "gfamp.container.v1";
  man["kind"] = "model";
  man["structure"] = lamp_structure_name(m.structure);
  man["depth"] = m.depth;
  man["antennas"] = m.antennas;
  man["width"] = m.width;
  man["group_size"] = m.group_size;
  man["field"] = field_name(scalar_traits<S>::field);
  man["lineage"] = lineage;
  json layers = json::array();
  for (const auto& p : m.layers) {
    json lj;
    lj["kind"] = shrink_kind_name(p.kind);
    if (p.is_mmse()) {
      lj["theta1"] = p.theta1;
      lj["theta2"] = p.theta2;
      lj["theta3"] = p.theta3;
      lj["theta4"] = p.theta4;
    } else {
      lj["theta"] = p.theta;
    }
    layers.push_back(lj);
  }
  man["layers"] = layers;
  man["arrays"]["smat"] = save_matrix(dir, "smat", m.smat);
  man["arrays"]["W"] = save_matrix(dir, "W", m.W);
  write_manifest(dir, man);
}

template <class S>
LampModel<S> load_model(const fs::path& dir) {
  const json man = read_manifest(dir);
  if (man.value("kind", "") != "model")
    throw IoError(dir.string() + ": not a model container");
  if (man.value("field", "") != field_name(scalar_traits<S>::field))
    throw IoError(dir.string() + ": model field does not match requested scalar type");
  LampModel<S> m;
  m.structure = lamp_structure_from_name(man["structure"].get<std::string>());
  m.depth = man["depth"];
  m.antennas = man["antennas"];
  m.width = man["width"];
  m.group_size = man["group_size"];
  m.smat = load_matrix<S>(dir, man, "smat");
  m.W = load_matrix<S>(dir, man, "W");
  for (const json& lj : man["layers"]) {
    ShrinkageParams p;
    p.kind = shrink_kind_from_name(lj["kind"].get<std::string>());
    if (p.is_mmse()) {
      p.theta1 = lj["theta1"];
      p.theta2 = lj["theta2"];
      p.theta3 = lj["theta3"];
      p.theta4 = lj["theta4"];
    } else {
      p.theta = lj["theta"];
    }
    m.layers.push_back(p);
  }
  m.validate();
  return m;
}

}  // namespace gfamp::io
