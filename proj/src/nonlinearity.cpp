#include "ranlin/nonlinearity.hpp"

#include <numeric>

#include "ranlin/cutoff.hpp"

namespace ranlin {

Nonlinearity Nonlinearity::zero(int dim) {
  Nonlinearity f;
  f.name_ = "zero";
  f.dim_ = dim;
  return f;
}

Nonlinearity Nonlinearity::quadratic(int dim, std::vector<QuadTerm> terms) {
  Nonlinearity f;
  f.name_ = "quadratic";
  f.dim_ = dim;
  for (const QuadTerm& t : terms)
    if (t.out < 0 || t.out >= dim || t.a < 0 || t.a >= dim || t.b < 0 || t.b >= dim)
      throw PreconditionError("quadratic nonlinearity: index out of range");
  f.quad_ = std::move(terms);
  return f;
}

Nonlinearity Nonlinearity::bump_coupling(int dim, int out, int in,
                                         double amplitude, double width) {
  Nonlinearity f;
  f.name_ = "bump_coupling";
  f.dim_ = dim;
  if (out < 0 || out >= dim || in < 0 || in >= dim)
    throw PreconditionError("bump_coupling: index out of range");
  if (width <= 0.0) throw PreconditionError("bump_coupling: width must be positive");
  f.bump_out_ = out;
  f.bump_in_ = in;
  f.bump_amplitude_ = amplitude;
  f.bump_width_ = width;
  return f;
}

Nonlinearity Nonlinearity::polynomial(int dim, std::vector<MonoTerm> terms) {
  Nonlinearity f;
  f.name_ = "polynomial";
  f.dim_ = dim;
  for (const MonoTerm& t : terms) {
    if (t.out < 0 || t.out >= dim || static_cast<int>(t.exps.size()) != dim)
      throw PreconditionError("polynomial nonlinearity: bad term shape");
    const int deg = std::accumulate(t.exps.begin(), t.exps.end(), 0);
    if (deg < 2)
      throw PreconditionError("polynomial nonlinearity: terms must have degree >= 2");
    for (int e : t.exps)
      if (e < 0) throw PreconditionError("polynomial nonlinearity: negative exponent");
  }
  f.mono_ = std::move(terms);
  return f;
}

namespace {

double mono_value(const MonoTerm& t, const Vec& x) {
  double v = t.coeff;
  for (int i = 0; i < static_cast<int>(t.exps.size()); ++i)
    for (int e = 0; e < t.exps[i]; ++e) v *= x[i];
  return v;
}

// d/dx_i of the monomial
double mono_d1(const MonoTerm& t, const Vec& x, int i) {
  if (t.exps[i] == 0) return 0.0;
  MonoTerm s = t;
  s.coeff *= t.exps[i];
  s.exps[i] -= 1;
  return mono_value(s, x);
}

double mono_d2(const MonoTerm& t, const Vec& x, int i, int j) {
  if (t.exps[i] == 0) return 0.0;
  MonoTerm s = t;
  s.coeff *= t.exps[i];
  s.exps[i] -= 1;
  return mono_d1(s, x, j);
}

}  // namespace

Vec Nonlinearity::value(const Vec& x) const {
  Vec v = Vec::Zero(dim_);
  for (const QuadTerm& t : quad_) v[t.out] += t.coeff * x[t.a] * x[t.b];
  for (const MonoTerm& t : mono_) v[t.out] += mono_value(t, x);
  if (name_ == "bump_coupling")
    v[bump_out_] += bump_amplitude_ * bump_value(x[bump_in_], bump_width_);
  return v;
}

Mat Nonlinearity::jacobian(const Vec& x) const {
  Mat J = Mat::Zero(dim_, dim_);
  for (const QuadTerm& t : quad_) {
    J(t.out, t.a) += t.coeff * x[t.b];
    J(t.out, t.b) += t.coeff * x[t.a];
  }
  for (const MonoTerm& t : mono_)
    for (int i = 0; i < dim_; ++i) J(t.out, i) += mono_d1(t, x, i);
  if (name_ == "bump_coupling")
    J(bump_out_, bump_in_) += bump_amplitude_ * bump_d1(x[bump_in_], bump_width_);
  return J;
}

SymTensor Nonlinearity::hessian(const Vec& x) const {
  SymTensor H(dim_, dim_);
  for (const QuadTerm& t : quad_) {
    H.comp[t.out](t.a, t.b) += t.coeff;
    H.comp[t.out](t.b, t.a) += t.coeff;
  }
  for (const MonoTerm& t : mono_)
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) H.comp[t.out](i, j) += mono_d2(t, x, i, j);
  if (name_ == "bump_coupling")
    H.comp[bump_out_](bump_in_, bump_in_) +=
        bump_amplitude_ * bump_d2(x[bump_in_], bump_width_);
  return H;
}

}  // namespace ranlin
