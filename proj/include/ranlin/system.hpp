#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ranlin/common.hpp"
#include "ranlin/cutoff.hpp"
#include "ranlin/driving.hpp"
#include "ranlin/nonlinearity.hpp"

namespace ranlin {

// Linear part Lambda(omega): a constant matrix or one matrix per bernoulli
// symbol.  Must be block diagonal with respect to the declared block dims and
// invertible.
struct LinearPart {
  bool constant = true;
  Mat matrix;
  std::vector<Mat> per_symbol;

  const Mat& operator()(const DrivingState& s) const {
    if (constant) return matrix;
    return per_symbol.at(static_cast<std::size_t>(s.symbol));
  }
};

// The random map F(omega, x) = Lambda(omega) x + f(omega, x) with fixed point
// 0, and its cut-off extension F~ = Lambda x + u(x) f(x) which agrees with F
// on the inner ball and is linear outside the outer ball.
struct RandomMapSystem {
  int d = 0;
  std::vector<int> block_dims;
  LinearPart linear;
  Nonlinearity nonlin = Nonlinearity::zero(0);
  DrivingSystem driving;
  double rho = 1.0;
  double alpha = 1.0;
  double M = 0.0;  // sup of derivative norms up to order 2 (measured if 0)
  double L = 0.0;  // Hessian Hoelder constant (measured if 0)
  bool extended = false;

  const Mat& lambda(const DrivingState& s) const { return linear(s); }

  // nonlinear part, with the cut-off folded in when extended
  Vec f_value(const Vec& x) const;
  Mat f_jacobian(const Vec& x) const;
  SymTensor f_hessian(const Vec& x) const;

  Vec evaluate(const DrivingState& s, const Vec& x) const;
  Mat jacobian(const DrivingState& s, const Vec& x) const;
  SymTensor hessian(const DrivingState& s, const Vec& x) const;

  // y with F(omega, y) = x, by damped Newton from the linear-part guess
  Vec invert(const DrivingState& s, const Vec& x, double tol = 1e-12,
             int max_iter = 100) const;

  RandomMapSystem extend() const;
  CutoffSpec cutoff_spec() const { return CutoffSpec{rho}; }
};

void validate_system(const RandomMapSystem& sys);

// Measured bound constants on a grid over the rho-ball: max over sampled
// points of ||f||/rho, ||Df||, ||D^2 f||.
double measure_M(const RandomMapSystem& sys, int grid_per_dim = 0);

// Cocycle iteration: returns (F(n, omega, x), DF(n, omega, x)).
std::pair<Vec, Mat> iterate(const RandomMapSystem& sys, const OmegaOrbit& orb,
                            long n, const Vec& x);
Vec iterate_point(const RandomMapSystem& sys, const OmegaOrbit& orb, long n,
                  const Vec& x);

// F(k, omega, x) for k in [lo, hi]; index 0 holds x itself.
std::vector<Vec> orbit_points(const RandomMapSystem& sys, const OmegaOrbit& orb,
                              long lo, long hi, const Vec& x);

}  // namespace ranlin
