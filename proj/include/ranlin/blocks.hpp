#pragma once

#include <vector>

#include "ranlin/common.hpp"
#include "ranlin/driving.hpp"
#include "ranlin/system.hpp"

namespace ranlin {

// Block data in spectral order: blocks sorted by Lyapunov exponent,
// descending, with the coordinate indices each block occupies in the
// system's own coordinates.
struct BlockStructure {
  std::vector<double> lambda;             // one exponent per block, descending
  std::vector<int> dims;
  std::vector<std::vector<int>> coords;   // coordinate indices per block
  int tau = 0;                            // number of positive exponents
  int d = 0;

  int p() const { return static_cast<int>(lambda.size()); }

  // coordinate sets of unions of blocks (0-based block indices)
  std::vector<int> coords_of(const std::vector<int>& block_ids) const;
  std::vector<int> coords_leq(int j) const;   // blocks 0..j
  std::vector<int> coords_geq(int j) const;   // blocks j..p-1
  std::vector<int> coords_unstable() const { return coords_leq(tau - 1); }
  std::vector<int> coords_stable() const { return coords_geq(tau); }
};

Vec embed_zero(const Vec& x, const std::vector<int>& idx);       // R^d -> R^d projection
Vec extract(const Vec& x, const std::vector<int>& idx);          // compact components
Vec insert(const Vec& xc, const std::vector<int>& idx, int d);   // compact -> embedded
Mat submatrix(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols);

// Cumulative products of the linear part restricted to a coordinate set,
// over an index window.  prod(m, at) = Lambda_S(m, theta^{at} omega), valid
// for either sign of m via the cocycle identity.
class BlockProducts {
 public:
  BlockProducts(const std::function<Mat(long)>& full_step, std::vector<int> coords,
                long lo, long hi);
  BlockProducts(const RandomMapSystem& sys, const OmegaOrbit& orb,
                std::vector<int> coords, long lo, long hi);

  Mat prod(long m, long at) const;
  const Mat& cumulative(long n) const { return C_.at(static_cast<std::size_t>(n - lo_)); }
  const Mat& cumulative_inv(long n) const { return Ci_.at(static_cast<std::size_t>(n - lo_)); }
  long lo() const { return lo_; }
  long hi() const { return hi_; }

 private:
  std::vector<int> coords_;
  long lo_, hi_;
  std::vector<Mat> C_, Ci_;   // C_[n - lo] = Lambda_S(n, omega)
};

}  // namespace ranlin
