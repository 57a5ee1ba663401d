#pragma once
#include <cstdint>

#include "gfamp/field.hpp"

namespace gfamp {

// One random-access scenario: user population, pilot length, delay handling and noise level.
// Delays are integer symbol offsets in [0, max_delay]; the receiver provisions for up to
// guard_len taps, which fixes the expanded dictionary size.
struct SystemConfig {
  int num_users = 100;      // user population N
  int pilot_len = 40;       // pilot sequence length L
  int guard_len = 3;        // provisioned delay taps T_g (guard interval)
  int max_delay = 3;        // largest delay the traffic actually uses, <= guard_len
  double active_prob = 0.1; // per-user activity probability
  int num_antennas = 1;     // receive antennas M
  double snr_db = 0.0;
  double gain = 1.0;        // shared large-scale fading coefficient phi
  Field field = Field::cplx;
  std::uint64_t base_seed = 1;

  int group_size() const { return guard_len + 1; }
  int expanded_len() const { return pilot_len + guard_len; }
  int expanded_dim() const { return num_users * group_size(); }
  double delay_active_prob() const { return active_prob / group_size(); }
  double noise_var() const; // per complex (or real) symbol, from SNR and gain

  void validate() const; // throws ConfigError on inconsistent settings
};

}  // namespace gfamp
