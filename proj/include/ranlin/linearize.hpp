#pragma once

#include <functional>
#include <memory>

#include "ranlin/blocks.hpp"
#include "ranlin/cocycle.hpp"
#include "ranlin/common.hpp"
#include "ranlin/foliation.hpp"
#include "ranlin/spectrum.hpp"

namespace ranlin {

// One-sided limit linearizer for a (compact-coordinate) block map sequence:
//   contraction:  psi(n, x) = lim_k Lambda(k, n)^{-1} F(k, n, x)
//   expansion:    psi(n, x) = lim_k Lambda(k, n-k)   F(-k, n, x)
// Convergence is certified by Cauchy differences.
class OneSidedLinearizer {
 public:
  OneSidedLinearizer(std::function<Vec(long, const Vec&)> map_fwd,
                     std::function<Vec(long, const Vec&)> map_inv,
                     std::shared_ptr<const BlockProducts> prods, bool expanding,
                     int k_max = 200, double tol = 1e-12);

  Vec forward(long n, const Vec& x, std::vector<double>* cauchy = nullptr) const;
  Vec inverse(long n, const Vec& y) const;
  bool expanding() const { return expanding_; }

 private:
  std::function<Vec(long, const Vec&)> fwd_, inv_;
  std::shared_ptr<const BlockProducts> prods_;
  bool expanding_;
  int k_max_;
  double tol_;
};

// phi(n, x) = x + pi_s p0(n, x, 0) + pi_u q0(n, x, 0), with the fixed-point
// inverse, and the decoupled block maps F_s, F_u (compact coordinates).
class Decoupler {
 public:
  Decoupler(const MapCocycle& coc, const BlockStructure& bs, LpConfig cfg);

  Vec forward(long n, const Vec& x) const;
  Vec inverse(long n, const Vec& z) const;
  Vec Fs(long n, const Vec& xs) const;       // compact stable in/out
  Vec Fu(long n, const Vec& xu) const;
  Vec Fs_inverse(long n, const Vec& ys) const;
  Vec Fu_inverse(long n, const Vec& yu) const;

  const std::vector<int>& stable_coords() const { return scoords_; }
  const std::vector<int>& unstable_coords() const { return ucoords_; }
  const BlockStructure& blocks() const { return bs_; }

 private:
  const MapCocycle* coc_;
  BlockStructure bs_;
  LpConfig cfg_;
  std::vector<int> scoords_, ucoords_;
};

// Phi(n, .) = psi(n, .) o phi(n, .) with psi = psi_s + psi_u blockwise.
class Conjugacy {
 public:
  Conjugacy(const MapCocycle& coc, const BlockStructure& bs, LpConfig cfg,
            int k_max = 200, double tol = 1e-12);

  Vec forward(long n, const Vec& x) const;
  Vec inverse(long n, const Vec& z) const;
  const Decoupler& decoupler() const { return dec_; }

 private:
  const MapCocycle* coc_;
  BlockStructure bs_;
  Decoupler dec_;
  OneSidedLinearizer psi_s_, psi_u_;
};

struct ConjugacyReport {
  double max_residual = 0.0;
  double dphi0_deviation = 0.0;
  double max_roundtrip = 0.0;
  int points = 0;
  std::vector<double> residuals;
};

ConjugacyReport verify_conjugacy(const Conjugacy& Phi, const MapCocycle& coc,
                                 const BlockStructure& bs, double radius,
                                 int n_points, int workers = 1,
                                 bool keep_residuals = false);

struct EscapeResult {
  bool infinite = false;
  long steps = 0;
};

// Least n with ||pi_u F(n, omega, x)|| >= 1/2 (sup norm); infinite when the
// decoupled unstable coordinate of x vanishes.
EscapeResult escape_time(const MapCocycle& coc, const BlockStructure& bs,
                         const Vec& x, long n_max,
                         const Decoupler* dec = nullptr,
                         double stable_tol = 1e-13);

// Closed-form escape bound from measured constants:
//   N = ln(K L lip^{1/sigma} / ||pi_u x||^{1/sigma}) / (lambda_tau - 3 eps).
double escape_bound(double lambda_tau, double eps, double K_meas, double L_meas,
                    double lip_meas, double sigma_hat, double pi_u_norm);

}  // namespace ranlin
