#pragma once

#include <array>
#include <vector>

#include "ranlin/blocks.hpp"
#include "ranlin/common.hpp"
#include "ranlin/driving.hpp"
#include "ranlin/system.hpp"

namespace ranlin {

// Lyapunov spectrum of the linear cocycle at the fixed point: exponents in
// descending order with multiplicities, the count tau of positive ones, and
// the mapping from spectral order to the system's declared blocks.
struct Spectrum {
  std::vector<double> lambda;            // strictly decreasing
  std::vector<int> mult;
  int tau = 0;
  int d = 0;
  bool aligned = true;                   // spectral blocks match system blocks
  std::vector<int> sys_block_of;         // spectral block -> system block
  std::vector<std::vector<int>> coords;  // coordinates per spectral block

  int p() const { return static_cast<int>(lambda.size()); }
  double lambda_max() const;
  BlockStructure blocks() const;         // requires aligned
};

Spectrum lyapunov_exponents(const RandomMapSystem& sys, const DrivingSystem& driving,
                            long n_steps, long n_transient = 0);

// Spectrum assembled directly from given per-block exponents (for analysis
// entry points that bypass estimation).
Spectrum spectrum_from_exponents(const std::vector<double>& lambda,
                                 const std::vector<int>& mult);

// Constants derived from the spectrum alone.
struct ConstantsBudget {
  double eps = 0.0;
  double beta = 0.0;
  double beta_E = 0.0;
  double beta_N = 0.0;
  double beta_v = 0.0;
  double beta_alpha = 0.0;
  double sigma = 0.0;       // the exponent varsigma in (0,1)
  double lambda_max = 0.0;
};

ConstantsBudget constants_budget(const Spectrum& spec, double alpha);

// Oseledets splitting at one point: fiber bases per spectral block, the
// straightening basis matrix (columns near the standard block basis) and its
// inverse.
struct Splitting {
  Vec x;
  std::vector<Mat> fibers;  // d x d_j, orthonormal columns
  Mat basis;                // d x d, columns grouped by block
  Mat frame;                // basis^{-1}
};

Splitting oseledets_splitting(const RandomMapSystem& sys, const OmegaOrbit& orb,
                              const Vec& x, long horizon, const Spectrum& spec,
                              double cond_cap = 1e6);

// Frames and conjugated blocks along an orbit:
//   Lambda_bar(n) = basis(n+1)^{-1} DF(theta^n omega, z_n) basis(n).
struct FrameChain {
  long lo = 0, hi = 0;
  std::vector<Vec> z;          // base orbit points, index n - lo
  std::vector<Mat> basis;      // B(n)
  std::vector<Mat> frame;      // B(n)^{-1}
  std::vector<Mat> lambda_bar; // defined for n in [lo, hi-1]
  double off_block_residual = 0.0;

  const Vec& point(long n) const { return z.at(static_cast<std::size_t>(n - lo)); }
  const Mat& B(long n) const { return basis.at(static_cast<std::size_t>(n - lo)); }
  const Mat& Binv(long n) const { return frame.at(static_cast<std::size_t>(n - lo)); }
  const Mat& Lbar(long n) const { return lambda_bar.at(static_cast<std::size_t>(n - lo)); }
};

FrameChain block_diagonalize(const RandomMapSystem& sys, const OmegaOrbit& orb,
                             const Vec& x, const Spectrum& spec, long lo, long hi,
                             long horizon);

// Distance between subspaces given by (full column rank) basis matrices:
// symmetrized max over unit vectors of the distance to the other subspace.
double subspace_distance(const Mat& E, const Mat& F);

struct ResonanceReport {
  bool belitskii_ok = true;
  std::vector<std::array<int, 3>> violations;  // (i, kappa, j), 1-based
  bool bunching_ok = true;
  ConstantsBudget budget;
};

ResonanceReport resonance_report(const Spectrum& spec, double alpha = 1.0);

// Least-squares slope of log(value distance) against log(x distance).
double holder_estimate(const std::vector<std::pair<double, double>>& pairs);

}  // namespace ranlin
