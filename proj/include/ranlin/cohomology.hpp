#pragma once

#include <functional>
#include <map>
#include <memory>

#include "ranlin/blocks.hpp"
#include "ranlin/cocycle.hpp"
#include "ranlin/common.hpp"
#include "ranlin/foliation.hpp"
#include "ranlin/normalform.hpp"
#include "ranlin/spectrum.hpp"

namespace ranlin {

// Orbit-adapted norm on one spectral block,
//   |x|_{n,j} = sum_m |Lambda_j(m, theta^n) x| e^{-lambda_j m - eps |m|},
// truncated once the certified geometric tail drops below 1e-12 of the
// accumulated value.
class LyapunovNorm {
 public:
  LyapunovNorm(std::function<Mat(long)> block_step, double lambda_j, double eps,
               long max_half_width = 400000);

  double operator()(long n, const Vec& xj) const;
  double lambda() const { return lambda_; }

 private:
  std::function<Mat(long)> step_;
  double lambda_, eps_;
  long max_w_;
};

// A sequence function h(n, .): X_i -> X_j given by an evaluator.
using SeqFunc = std::function<Vec(long, const Vec&)>;

// One (i, j) component of the cohomological operator along the straightened
// cocycle:  T h (n, x) = h(n, x) - Lj(n)^{-1} h(n+1, Li(n) x).
struct CohomPair {
  const BlockProducts* Pi = nullptr;
  const BlockProducts* Pj = nullptr;
};

Vec apply_T(const CohomPair& P, const SeqFunc& h, long n, const Vec& xi);

enum class NeumannBranch {
  forward,              // sum_k (id - T)^k, arguments pushed forward
  backward,             // -sum_{k>=1} (id - T)^{-k}
  forward_terminating,  // forward sum of a compactly supported input
};

NeumannBranch choose_branch(double rate);  // rate = lambda_j - lambda_kappa - b lambda_i

Vec invert_T(const CohomPair& P, const SeqFunc& h, long n, const Vec& xi,
             NeumannBranch branch, double tol = 1e-12, long k_max = 400,
             long* k_used = nullptr);

// --- frame machinery ------------------------------------------------------

// Sampled graph of the block-i intermediate leaf through 0 of a cocycle, one
// chart per orbit index (shared when the driving is stationary); cubic
// Hermite interpolation between the Lyapunov-Perron samples.
class SampledLeafFamily {
 public:
  SampledLeafFamily(const MapCocycle& coc, const BlockStructure& bs, int block,
                    LpConfig lp_cfg, long lo, long hi, double radius, int n_grid,
                    bool stationary);

  Vec point(long m, double w) const;
  Vec dpoint(long m, double w) const;
  double radius() const { return radius_; }
  int coord() const { return coord_; }
  long lo() const { return lo_; }
  long hi() const { return hi_; }
  bool stationary() const { return stationary_; }

 private:
  int d_ = 0, coord_ = 0;
  long lo_ = 0, hi_ = 0;
  bool stationary_ = true;
  double radius_ = 0.0;
  std::vector<double> grid_;
  std::vector<std::vector<Vec>> z_, dz_;  // per index (or single), per grid point

  const std::vector<Vec>& zrow(long m) const;
  const std::vector<Vec>& dzrow(long m) const;
};

// One-sided linearization of the 1-d leaf dynamics
// Fbar_i(m, w) = pi_i Fbar(m, leaf(m, w)), and its inverse chart.
class BlockStraightening {
 public:
  BlockStraightening(const MapCocycle& bar, const SampledLeafFamily& leaf,
                     std::shared_ptr<BlockProducts> Pi, long lo, long hi,
                     double tol = 1e-12, int k_max = 200);

  double fbar_i(long m, double w) const;
  double fbar_i_inverse(long m, double target) const;
  double forward(long m, double w) const;   // phi_{i,*}(m, w)
  double inverse(long m, double y) const;
  const BlockProducts& products() const { return *Pi_; }

 private:
  const MapCocycle* bar_;
  const SampledLeafFamily* leaf_;
  std::shared_ptr<BlockProducts> Pi_;
  long lo_, hi_;
  double tol_;
  int k_max_;
  mutable std::map<std::pair<long, double>, double> fwd_memo_, inv_memo_;

  double forward_uncached(long m, double w) const;
};

struct FrameSolveConfig {
  double radius = 0.25;
  int n_grid = 129;          // uniform grid over [-radius, radius]
  long window = 40;
  long k_reach = 80;
  double tol = 1e-10;
  int max_iter = 40;
};

// eta and the frame vector field vbar(n, w) = Lambda_kappa(n) e + eta(n, w),
// parametrized by the graph coordinate w of the block-i leaf (equivalent to
// the straightened parametrization through the block chart, which is the
// identity to first order)
struct FrameSolution {
  int kappa = 0, iota = 0, block_i = 0;
  long lo = 0, hi = 0;
  std::vector<double> grid;             // signed grid in the graph coordinate
  std::vector<std::vector<Vec>> eta;    // eta[n - lo][g]
  std::vector<Vec> skappa;              // Lambda_kappa(n, anchor) e, embedded
  std::vector<double> ratios;
  std::vector<double> diffs;            // weighted sup differences per sweep
  int iterations = 0;
  double final_diff = 0.0;

  Vec eta_at(long n, double w) const;
  Vec vbar(long n, double w) const;
};

FrameSolution solve_stable_frame(const MapCocycle& bar, const BlockStructure& hbs,
                                 const ConstantsBudget& budget, int kappa, int iota,
                                 int block_i, const SampledLeafFamily& leaf,
                                 const FrameSolveConfig& cfg);

// Frame vectors v(theta^n omega, x) in the original coordinates, for points x
// on the block-i leaf through the anchor.
struct FrameAssembly {
  const FrameChain* chain = nullptr;
  const NormalFormChart* chart = nullptr;
  const SampledLeafFamily* leaf = nullptr;
  const FrameSolution* sol = nullptr;

  Vec vector_at(long n, const Vec& x) const;
};

// Canonical stable frame zeta_{kappa,iota}(omega, x), one unit vector per
// stable coordinate, read off the derivative of the stable leaf chart.
struct StableFrame {
  std::vector<Vec> zeta;        // in stable-coordinate order of bs
  std::vector<int> coords;      // the stable coordinates (kappa, iota) refer to
  double gram_det = 0.0;
};

StableFrame canonical_frame(const MapCocycle& coc, const BlockStructure& bs,
                            const Vec& x, LpConfig cfg = {});

// zeta reconstructed from a supplied local frame via the linear correction
// system (id + Delta) c = delta.
Vec reconstruct_zeta(const std::vector<Vec>& v_frame, const std::vector<int>& stable_coords,
                     int which, int d);

}  // namespace ranlin
