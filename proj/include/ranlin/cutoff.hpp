#pragma once

#include "ranlin/common.hpp"

namespace ranlin {

// Smooth cut-off u built from the profile
//   g(s) = exp(1/((s-1/2)(s-1)))  on (1/2, 1),  0 elsewhere,
//   h(s) = int_s^inf g / int g,
// applied to squared coordinates with the radius entering through rho_hat =
// rho^2: u(x) = prod_i h(x_i^2 / rho_hat).  u == 1 whenever max|x_i| <=
// rho/sqrt(2) (in particular on the inner ball of radius rho/2) and u == 0
// exactly when max|x_i| >= rho.  The scaled derivatives satisfy
// rho^r ||D^r u|| <= C_u for r = 1,2,3 with the closed-form constant below.
struct CutoffSpec {
  double rho = 1.0;

  double inner_radius() const { return 0.5 * rho; }
  double outer_radius() const { return rho; }
};

// Closed-form constant of the construction (independent of rho).
double cutoff_Cu();

// Normalized profile pieces on the unit scale (sigma = s / rho^2).
double cutoff_g0(double sigma);
double cutoff_g0_d1(double sigma);
double cutoff_g0_d2(double sigma);
double cutoff_h0(double sigma);   // 1 for sigma <= 1/2, 0 for sigma >= 1

// Scalar h(s) with rho_hat = rho^2 and its first three derivatives in s.
double cutoff_h(double rho, double s);
double cutoff_h_d1(double rho, double s);
double cutoff_h_d2(double rho, double s);
double cutoff_h_d3(double rho, double s);

double cutoff_value(const CutoffSpec& spec, const Vec& x);
Vec cutoff_gradient(const CutoffSpec& spec, const Vec& x);
Mat cutoff_hessian(const CutoffSpec& spec, const Vec& x);
// Third derivative tensor, entry (i,j,k) flattened as T[i](j,k).
std::vector<Mat> cutoff_third(const CutoffSpec& spec, const Vec& x);

// Compactly supported exponential bump of the same family, normalized to
// peak value 1:  bump(t) = exp(16 + 1/((q-1/2)(q-1))) with q = t^2/width^2,
// supported on width/sqrt(2) < |t| < width.
double bump_value(double t, double width);
double bump_d1(double t, double width);
double bump_d2(double t, double width);

}  // namespace ranlin
