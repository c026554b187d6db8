#include "ranlin/cutoff.hpp"

#include <array>
#include <cmath>

namespace ranlin {

namespace {

// 16-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr int kGL = 16;
constexpr double kNodes[kGL] = {
    -0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
    -0.7554044083550030, -0.6178762444026438, -0.4580167776572274,
    -0.2816035507792589, -0.0950125098376374, 0.0950125098376374,
    0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
    0.7554044083550030,  0.8656312023878318,  0.9445750230732326,
    0.9894009349916499};
constexpr double kWeights[kGL] = {
    0.0271524594117541, 0.0622535239386479, 0.0951585116824928,
    0.1246289712555339, 0.1495959888165767, 0.1691565193950025,
    0.1826034150449236, 0.1894506104550685, 0.1894506104550685,
    0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
    0.1246289712555339, 0.0951585116824928, 0.0622535239386479,
    0.0271524594117541};

double gl16(double a, double b, double (*f)(double)) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < kGL; ++i) s += kWeights[i] * f(c + r * kNodes[i]);
  return r * s;
}

// Suffix integrals of g0 over a fine partition of [1/2, 1], evaluated by
// cubic Hermite interpolation (the integrand is the analytic derivative).
struct Profile {
  static constexpr int kCells = 2048;
  std::array<double, kCells + 1> edge;    // cell boundaries
  std::array<double, kCells + 1> suffix;  // int_{edge[k]}^{1} g0
  double total;
  double h;

  Profile() {
    h = 0.5 / kCells;
    for (int k = 0; k <= kCells; ++k)
      edge[k] = 0.5 + 0.5 * static_cast<double>(k) / kCells;
    suffix[kCells] = 0.0;
    for (int k = kCells - 1; k >= 0; --k)
      suffix[k] = suffix[k + 1] + gl16(edge[k], edge[k + 1], &cutoff_g0);
    total = suffix[0];
  }

  double eval(double sigma) const {
    if (sigma <= 0.5) return total;
    if (sigma >= 1.0) return 0.0;
    int k = static_cast<int>((sigma - 0.5) / h);
    k = std::min(k, kCells - 1);
    const double t = (sigma - edge[k]) / h;
    const double v0 = suffix[k], v1 = suffix[k + 1];
    const double d0 = -cutoff_g0(edge[k]), d1 = -cutoff_g0(edge[k + 1]);
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    const double h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t);
    const double h11 = t * t * (t - 1);
    return h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1;
  }
};

const Profile& profile() {
  static const Profile p;
  return p;
}

}  // namespace

double cutoff_g0(double sigma) {
  if (sigma <= 0.5 || sigma >= 1.0) return 0.0;
  return std::exp(1.0 / ((sigma - 0.5) * (sigma - 1.0)));
}

double cutoff_g0_d1(double sigma) {
  if (sigma <= 0.5 || sigma >= 1.0) return 0.0;
  const double P = (sigma - 0.5) * (sigma - 1.0);
  const double dP = 2.0 * sigma - 1.5;
  return cutoff_g0(sigma) * (-dP / (P * P));
}

double cutoff_g0_d2(double sigma) {
  if (sigma <= 0.5 || sigma >= 1.0) return 0.0;
  const double P = (sigma - 0.5) * (sigma - 1.0);
  const double dP = 2.0 * sigma - 1.5;
  const double E1 = -dP / (P * P);
  const double E2 = (2.0 * dP * dP - 2.0 * P) / (P * P * P);
  return cutoff_g0(sigma) * (E2 + E1 * E1);
}

double cutoff_h0(double sigma) {
  if (sigma <= 0.5) return 1.0;
  if (sigma >= 1.0) return 0.0;
  const Profile& p = profile();
  return p.eval(sigma) / p.total;
}

double cutoff_h(double rho, double s) { return cutoff_h0(s / (rho * rho)); }

double cutoff_h_d1(double rho, double s) {
  const double rh = rho * rho;
  return -cutoff_g0(s / rh) / (rh * profile().total);
}

double cutoff_h_d2(double rho, double s) {
  const double rh = rho * rho;
  return -cutoff_g0_d1(s / rh) / (rh * rh * profile().total);
}

double cutoff_h_d3(double rho, double s) {
  const double rh = rho * rho;
  return -cutoff_g0_d2(s / rh) / (rh * rh * rh * profile().total);
}

double cutoff_Cu() {
  const double Q = 1.0 / std::sqrt(1.0 / 16.0 - 1.0 / (std::log(2.0) + 16.0));
  const double B = 4.0 * std::exp(-4.0) + 4.5 * std::exp(-3.0) + 8.0 * std::exp(-2.0);
  return 6.0 * B * Q * std::exp(16.0);
}

namespace {

// Per-coordinate factors of u and their t-derivatives at t = x_i:
//   a = h(t^2), b = a', c = a'', e = a'''.
struct Factors {
  std::vector<double> a, b, c, e;
};

Factors factors(const CutoffSpec& spec, const Vec& x, int order) {
  const int d = static_cast<int>(x.size());
  Factors f;
  f.a.resize(d);
  if (order >= 1) f.b.resize(d);
  if (order >= 2) f.c.resize(d);
  if (order >= 3) f.e.resize(d);
  for (int i = 0; i < d; ++i) {
    const double t = x[i], s = t * t;
    f.a[i] = cutoff_h(spec.rho, s);
    if (order >= 1) f.b[i] = cutoff_h_d1(spec.rho, s) * 2.0 * t;
    if (order >= 2)
      f.c[i] = cutoff_h_d2(spec.rho, s) * 4.0 * s + 2.0 * cutoff_h_d1(spec.rho, s);
    if (order >= 3)
      f.e[i] = cutoff_h_d3(spec.rho, s) * 8.0 * s * t +
               cutoff_h_d2(spec.rho, s) * 12.0 * t;
  }
  return f;
}

double prod_except(const std::vector<double>& a, int skip1, int skip2 = -1,
                   int skip3 = -1) {
  double p = 1.0;
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    if (i != skip1 && i != skip2 && i != skip3) p *= a[i];
  return p;
}

}  // namespace

double cutoff_value(const CutoffSpec& spec, const Vec& x) {
  double u = 1.0;
  for (int i = 0; i < x.size(); ++i) u *= cutoff_h(spec.rho, x[i] * x[i]);
  return u;
}

Vec cutoff_gradient(const CutoffSpec& spec, const Vec& x) {
  const int d = static_cast<int>(x.size());
  const Factors f = factors(spec, x, 1);
  Vec g(d);
  for (int i = 0; i < d; ++i) g[i] = f.b[i] * prod_except(f.a, i);
  return g;
}

Mat cutoff_hessian(const CutoffSpec& spec, const Vec& x) {
  const int d = static_cast<int>(x.size());
  const Factors f = factors(spec, x, 2);
  Mat H(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = (i == j) ? f.c[i] * prod_except(f.a, i)
                                : f.b[i] * f.b[j] * prod_except(f.a, i, j);
      H(i, j) = v;
      H(j, i) = v;
    }
  return H;
}

std::vector<Mat> cutoff_third(const CutoffSpec& spec, const Vec& x) {
  const int d = static_cast<int>(x.size());
  const Factors f = factors(spec, x, 3);
  std::vector<Mat> T(d, Mat::Zero(d, d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double v;
        if (i == j && j == k) {
          v = f.e[i] * prod_except(f.a, i);
        } else if (i == j) {
          v = f.c[i] * f.b[k] * prod_except(f.a, i, k);
        } else if (i == k) {
          v = f.c[i] * f.b[j] * prod_except(f.a, i, j);
        } else if (j == k) {
          v = f.c[j] * f.b[i] * prod_except(f.a, i, j);
        } else {
          v = f.b[i] * f.b[j] * f.b[k] * prod_except(f.a, i, j, k);
        }
        T[i](j, k) = v;
      }
  return T;
}

double bump_value(double t, double width) {
  const double q = (t * t) / (width * width);
  if (q <= 0.5 || q >= 1.0) return 0.0;
  return std::exp(16.0 + 1.0 / ((q - 0.5) * (q - 1.0)));
}

double bump_d1(double t, double width) {
  const double w2 = width * width;
  const double q = (t * t) / w2;
  if (q <= 0.5 || q >= 1.0) return 0.0;
  const double P = (q - 0.5) * (q - 1.0);
  const double dP = 2.0 * q - 1.5;
  const double dE = -dP / (P * P);       // d/dq of 1/P
  return bump_value(t, width) * dE * (2.0 * t / w2);
}

double bump_d2(double t, double width) {
  const double w2 = width * width;
  const double q = (t * t) / w2;
  if (q <= 0.5 || q >= 1.0) return 0.0;
  const double P = (q - 0.5) * (q - 1.0);
  const double dP = 2.0 * q - 1.5;
  const double E1 = -dP / (P * P);
  const double E2 = (2.0 * dP * dP - 2.0 * P) / (P * P * P);
  const double B = bump_value(t, width);
  const double dq = 2.0 * t / w2;
  // d2/dt2 of exp(16 + E(q(t))): (E2 + E1^2) * (dq)^2 + E1 * q''.
  return B * ((E2 + E1 * E1) * dq * dq + E1 * (2.0 / w2));
}

}  // namespace ranlin
