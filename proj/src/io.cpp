#include "gfamp/io.hpp"

#include <cstdio>

namespace gfamp::io {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(static_cast<const char*>(data), std::streamsize(n));
  if (!f) throw IoError("short write: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(n));
  f.read(buf.data(), n);
  if (!f) throw IoError("short read: " + path.string());
  return buf;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  const std::string text = manifest.dump(2) + "\n";
  write_bytes(dir / "manifest.json", text.data(), text.size());
}

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw IoError("no manifest at " + p.string());
  std::vector<char> buf = read_bytes(p);
  json j = json::parse(buf.begin(), buf.end(), nullptr, false);
  if (j.is_discarded()) throw IoError("malformed manifest at " + p.string());
  return j;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json config_to_json(const SystemConfig& cfg) {
  return json{{"num_users", cfg.num_users},
              {"pilot_len", cfg.pilot_len},
              {"guard_len", cfg.guard_len},
              {"max_delay", cfg.max_delay},
              {"active_prob", cfg.active_prob},
              {"num_antennas", cfg.num_antennas},
              {"snr_db", cfg.snr_db},
              {"gain", cfg.gain},
              {"field", field_name(cfg.field)},
              {"base_seed", cfg.base_seed}};
}

SystemConfig config_from_json(const json& j) {
  SystemConfig cfg;
  try {
    cfg.num_users = j.at("num_users");
    cfg.pilot_len = j.at("pilot_len");
    cfg.guard_len = j.at("guard_len");
    cfg.max_delay = j.at("max_delay");
    cfg.active_prob = j.at("active_prob");
    cfg.num_antennas = j.at("num_antennas");
    cfg.snr_db = j.at("snr_db");
    cfg.gain = j.at("gain");
    cfg.field = field_from_name(j.at("field").get<std::string>());
    cfg.base_seed = j.at("base_seed");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_hash(const SystemConfig& cfg) {
  return fnv1a_hex(config_to_json(cfg).dump());
}

std::ofstream open_csv(const fs::path& path, const std::string& schema,
                       const std::vector<std::pair<std::string, std::string>>& meta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << "# schema=" << schema << "\n";
  for (const auto& [k, v] : meta) f << "# " << k << "=" << v << "\n";
  return f;
}

}  // namespace gfamp::io
