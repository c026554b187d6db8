#pragma once

#include <memory>

#include "ranlin/cocycle.hpp"
#include "ranlin/common.hpp"
#include "ranlin/spectrum.hpp"

namespace ranlin {

// The map sequence seen from the orbit of an anchor point: coordinates are
// straightened by the splitting frames so the linear part is block diagonal
// with contiguous spectral blocks,
//   Fhat(n, x) = B(n+1)^{-1} ( F(theta^n omega, B(n) x + z_n) - z_{n+1} ).
class HatCocycle : public MapCocycle {
 public:
  HatCocycle(const MapCocycle& base, FrameChain chain);

  int dim() const override;
  Mat linear(long n) const override;
  Vec eval(long n, const Vec& x) const override;
  Mat jac(long n, const Vec& x) const override;
  Vec invert(long n, const Vec& x) const override;

  // D^2 Fhat(n, 0), pushed through the frames
  SymTensor hessian0(long n) const;

  long lo() const { return chain_.lo; }
  long hi() const { return chain_.hi; }
  const FrameChain& chain() const { return chain_; }

 private:
  const MapCocycle* base_;
  FrameChain chain_;
};

// Block structure of the straightened coordinates: same exponents, blocks
// contiguous.
BlockStructure hat_blocks(const Spectrum& spec);

struct TripleInfo {
  int i = 0, kappa = 0, j = 0;   // 0-based spectral block indices
  int branch = 0;                // +1 forward series, -1 backward series
  long k_star = 0;               // terms accumulated
  double tail = 0.0;             // norm of the last term
  double norm = 0.0;             // coefficient norm at the anchor
  double residual = 0.0;         // homological defect at the anchor
  std::vector<double> term_norms;
};

// Orbit-indexed coefficients a(theta^n varpi) of the second order normal
// form, as full symmetric bilinear maps in the straightened coordinates.
struct NormalFormCoeffs {
  long lo = 0, hi = 0;
  std::vector<SymTensor> a;
  std::vector<TripleInfo> triples;

  const SymTensor& at(long n) const { return a.at(static_cast<std::size_t>(n - lo)); }
};

NormalFormCoeffs homological_coeffs(const HatCocycle& hat, const Spectrum& spec,
                                    double tol, long lo, long hi,
                                    long series_window);

// N(n, x) = x + u(x) a(n)[x, x] with a cut-off at radius rho_tilde, plus the
// Newton inverse.
class NormalFormChart {
 public:
  NormalFormChart(std::shared_ptr<const NormalFormCoeffs> coeffs, double rho_tilde);

  Vec forward(long n, const Vec& x) const;
  Mat forward_jac(long n, const Vec& x) const;
  Vec inverse(long n, const Vec& x, double tol = 1e-13) const;
  double rho_tilde() const { return rho_tilde_; }

 private:
  std::shared_ptr<const NormalFormCoeffs> coeffs_;
  double rho_tilde_;
};

// Fbar(n, .) = N(n+1) o Fhat(n, .) o N^{-1}(n, .)
class BarCocycle : public MapCocycle {
 public:
  BarCocycle(const HatCocycle& hat, NormalFormChart chart)
      : hat_(&hat), chart_(std::move(chart)) {}

  int dim() const override { return hat_->dim(); }
  Mat linear(long n) const override { return hat_->linear(n); }
  Vec eval(long n, const Vec& x) const override;
  Mat jac(long n, const Vec& x) const override;
  Vec invert(long n, const Vec& x) const override;

  const NormalFormChart& chart() const { return chart_; }
  const HatCocycle& hat() const { return *hat_; }

 private:
  const HatCocycle* hat_;
  NormalFormChart chart_;
};

// Measured cut-off radius for N per the shape delta / (K^4 M), with the
// constants measured on the given data.
double normal_form_radius(const HatCocycle& hat, const NormalFormCoeffs& coeffs,
                          double rho_system);

// Max norm of the mixed unstable x stable second derivative of the map at 0,
// by central finite differences of map values.
double mixed_second_derivative(const MapCocycle& coc, const BlockStructure& bs,
                               long n, double h);

}  // namespace ranlin
