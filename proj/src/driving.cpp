#include "ranlin/driving.hpp"

#include <cmath>
#include <numeric>

namespace ranlin {

namespace {

double wrap01(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f -= 1.0;
  return f;
}

}  // namespace

DrivingState DrivingSystem::state(long n) const {
  DrivingState s;
  s.kind = kind;
  switch (kind) {
    case DrivingKind::identity:
      break;
    case DrivingKind::rotation: {
      const double phase0 =
          static_cast<double>(splitmix64(seed) >> 11) * 0x1.0p-53;
      // n * angle reduced mod 1 in extended precision to limit drift.
      const long double t = static_cast<long double>(n) * static_cast<long double>(angle);
      const long double frac = t - std::floor(t);
      s.phase = wrap01(phase0 + static_cast<double>(frac));
      break;
    }
    case DrivingKind::bernoulli: {
      const double u = uniform01(seed, static_cast<std::uint64_t>(n));
      double acc = 0.0;
      int sym = alphabet - 1;
      for (int a = 0; a < alphabet; ++a) {
        acc += probabilities[a];
        if (u < acc) { sym = a; break; }
      }
      s.symbol = sym;
      break;
    }
  }
  return s;
}

DrivingSystem make_driving(const DrivingSystem& spec) {
  switch (spec.kind) {
    case DrivingKind::identity:
      break;
    case DrivingKind::rotation:
      if (!(spec.angle >= 0.0 && spec.angle < 1.0))
        throw PreconditionError("make_driving: rotation angle outside [0,1)");
      break;
    case DrivingKind::bernoulli: {
      if (spec.alphabet < 1 ||
          static_cast<int>(spec.probabilities.size()) != spec.alphabet)
        throw PreconditionError("make_driving: bernoulli alphabet/probabilities mismatch");
      double sum = 0.0;
      for (double p : spec.probabilities) {
        if (p < 0.0) throw PreconditionError("make_driving: negative probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw PreconditionError("make_driving: probabilities do not sum to 1");
      break;
    }
  }
  return spec;
}

std::vector<DrivingState> OmegaOrbit::materialize() const {
  std::vector<DrivingState> out;
  out.reserve(2 * half_width + 1);
  for (long n = -half_width; n <= half_width; ++n) out.push_back(state(n));
  return out;
}

OmegaOrbit orbit(const DrivingSystem& driving, long half_width) {
  if (half_width < 1) throw PreconditionError("orbit: half width must be >= 1");
  return OmegaOrbit{driving, 0, half_width};
}

}  // namespace ranlin
