#include "gfamp/config.hpp"

#include <cmath>
#include <string>

#include "gfamp/errors.hpp"

namespace gfamp {

double SystemConfig::noise_var() const {
  return gain / std::pow(10.0, snr_db / 10.0);
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (num_users < 1) fail("num_users must be >= 1");
  if (pilot_len < 1) fail("pilot_len must be >= 1");
  if (guard_len < 0) fail("guard_len must be >= 0");
  if (max_delay < 0) fail("max_delay must be >= 0");
  if (max_delay > guard_len) fail("max_delay exceeds guard_len");
  if (!(active_prob >= 0.0 && active_prob <= 1.0)) fail("active_prob outside [0, 1]");
  if (num_antennas < 1) fail("num_antennas must be >= 1");
  if (!(gain > 0.0)) fail("gain must be positive");
  if (!std::isfinite(snr_db)) fail("snr_db must be finite");
}

}  // namespace gfamp
