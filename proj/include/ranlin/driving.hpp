#pragma once

#include <cstdint>
#include <vector>

#include "ranlin/common.hpp"

namespace ranlin {

enum class DrivingKind { identity, rotation, bernoulli };

// One point of the driving orbit. For rotation the phase in [0,1); for
// bernoulli the symbol at the current position of the shift.
struct DrivingState {
  DrivingKind kind = DrivingKind::identity;
  double phase = 0.0;
  int symbol = 0;
};

// Invertible driving system theta on the sample space, with a seeded sampler
// standing in for the invariant measure. States along an orbit are computed
// statelessly from (seed, index), so shifting the index by k is exactly
// theta^k.
struct DrivingSystem {
  DrivingKind kind = DrivingKind::identity;
  double angle = 0.0;               // rotation: fraction of a full turn, [0,1)
  int alphabet = 0;                 // bernoulli: number of symbols
  std::vector<double> probabilities;
  std::uint64_t seed = 0;

  DrivingState state(long n) const;
};

DrivingSystem make_driving(const DrivingSystem& spec);

// Window of the orbit (theta^n omega) for n in [-half_width, half_width],
// relative to an origin shift. Immutable; states are recomputed on demand and
// a materialized window is available for inspection.
struct OmegaOrbit {
  DrivingSystem driving;
  long origin = 0;
  long half_width = 0;

  DrivingState state(long n) const { return driving.state(origin + n); }
  OmegaOrbit shifted(long k) const { return OmegaOrbit{driving, origin + k, half_width}; }
  std::vector<DrivingState> materialize() const;
};

OmegaOrbit orbit(const DrivingSystem& driving, long half_width);

}  // namespace ranlin
