#pragma once

#include <string>
#include <vector>

#include "ranlin/common.hpp"

namespace ranlin {

// f_out += coeff * x_a * x_b
struct QuadTerm {
  int out = 0, a = 0, b = 0;
  double coeff = 0.0;
};

// f_out += coeff * prod_i x_i^exps[i], total degree >= 2
struct MonoTerm {
  int out = 0;
  std::vector<int> exps;
  double coeff = 0.0;
};

// Catalog nonlinearity f with f(0) = 0 and Df(0) = 0, with analytic first and
// second derivatives.  Entries: "zero", "quadratic", "bump_coupling"
// (f_out = amplitude * bump(x_in)), "polynomial".
class Nonlinearity {
 public:
  static Nonlinearity zero(int dim);
  static Nonlinearity quadratic(int dim, std::vector<QuadTerm> terms);
  static Nonlinearity bump_coupling(int dim, int out, int in, double amplitude,
                                    double width);
  static Nonlinearity polynomial(int dim, std::vector<MonoTerm> terms);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  bool is_zero() const { return name_ == "zero"; }

  Vec value(const Vec& x) const;
  Mat jacobian(const Vec& x) const;
  SymTensor hessian(const Vec& x) const;

  // parameters, exposed for serialization
  const std::vector<QuadTerm>& quad_terms() const { return quad_; }
  const std::vector<MonoTerm>& mono_terms() const { return mono_; }
  int bump_out() const { return bump_out_; }
  int bump_in() const { return bump_in_; }
  double bump_amplitude() const { return bump_amplitude_; }
  double bump_width() const { return bump_width_; }

 private:
  std::string name_ = "zero";
  int dim_ = 0;
  std::vector<QuadTerm> quad_;
  std::vector<MonoTerm> mono_;
  int bump_out_ = 0, bump_in_ = 0;
  double bump_amplitude_ = 0.0, bump_width_ = 1.0;
};

}  // namespace ranlin
