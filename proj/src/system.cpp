#include "ranlin/system.hpp"

#include <cmath>

namespace ranlin {

Vec RandomMapSystem::f_value(const Vec& x) const {
  if (nonlin.is_zero()) return Vec::Zero(d);
  Vec f = nonlin.value(x);
  if (extended) f *= cutoff_value(cutoff_spec(), x);
  return f;
}

Mat RandomMapSystem::f_jacobian(const Vec& x) const {
  if (nonlin.is_zero()) return Mat::Zero(d, d);
  if (!extended) return nonlin.jacobian(x);
  const CutoffSpec cs = cutoff_spec();
  const double u = cutoff_value(cs, x);
  Mat J = Mat::Zero(d, d);
  if (u != 0.0) J = u * nonlin.jacobian(x);
  const Vec du = cutoff_gradient(cs, x);
  if (du.norm() != 0.0) J += nonlin.value(x) * du.transpose();
  return J;
}

SymTensor RandomMapSystem::f_hessian(const Vec& x) const {
  if (nonlin.is_zero() || !extended) {
    if (nonlin.is_zero()) return SymTensor(d, d);
    return nonlin.hessian(x);
  }
  const CutoffSpec cs = cutoff_spec();
  const double u = cutoff_value(cs, x);
  const Vec du = cutoff_gradient(cs, x);
  const Mat d2u = cutoff_hessian(cs, x);
  const Vec f = nonlin.value(x);
  const Mat Df = nonlin.jacobian(x);
  SymTensor H(d, d);
  SymTensor Hf = nonlin.hessian(x);
  for (int out = 0; out < d; ++out) {
    H.comp[out] = u * Hf.comp[out];
    const Vec row = Df.row(out).transpose();
    H.comp[out] += row * du.transpose() + du * row.transpose();
    H.comp[out] += f[out] * d2u;
  }
  return H;
}

Vec RandomMapSystem::evaluate(const DrivingState& s, const Vec& x) const {
  return lambda(s) * x + f_value(x);
}

Mat RandomMapSystem::jacobian(const DrivingState& s, const Vec& x) const {
  return lambda(s) + f_jacobian(x);
}

SymTensor RandomMapSystem::hessian(const DrivingState& s, const Vec& x) const {
  (void)s;
  return f_hessian(x);
}

Vec RandomMapSystem::invert(const DrivingState& s, const Vec& x, double tol,
                            int max_iter) const {
  const Mat& L = lambda(s);
  const double scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  Vec y = L.partialPivLu().solve(x);
  double rn = (evaluate(s, y) - x).norm();
  for (int it = 0; it < max_iter; ++it) {
    if (rn <= tol * scale) return y;
    const Vec r = evaluate(s, y) - x;
    const Vec step = jacobian(s, y).partialPivLu().solve(r);
    double damp = 1.0;
    for (int k = 0; k < 25; ++k) {
      const Vec cand = y - damp * step;
      const double rc = (evaluate(s, cand) - x).norm();
      if (rc < rn) {
        y = cand;
        rn = rc;
        break;
      }
      damp *= 0.5;
      if (k == 24) {
        if (rn <= 1e-9 * scale) return y;  // at the rounding floor already
        throw NumericError("invert: Newton iteration failed to converge");
      }
    }
  }
  if (rn <= tol * scale) return y;
  throw NumericError("invert: Newton iteration failed to converge");
}

RandomMapSystem RandomMapSystem::extend() const {
  RandomMapSystem e = *this;
  e.extended = true;
  return e;
}

void validate_system(const RandomMapSystem& sys) {
  int sum = 0;
  for (int b : sys.block_dims) {
    if (b <= 0) throw PreconditionError("system: block dims must be positive");
    sum += b;
  }
  if (sum != sys.d) throw PreconditionError("system: block dims must sum to dimension");
  if (sys.rho <= 0.0) throw PreconditionError("system: rho must be positive");
  if (!(sys.alpha > 0.0 && sys.alpha <= 1.0))
    throw PreconditionError("system: alpha must lie in (0, 1]");
  if (sys.nonlin.dim() != sys.d)
    throw PreconditionError("system: nonlinearity dimension mismatch");

  auto check_matrix = [&](const Mat& m) {
    if (m.rows() != sys.d || m.cols() != sys.d)
      throw PreconditionError("system: linear part has wrong shape");
    // block diagonality
    int r0 = 0;
    for (int bi = 0; bi < static_cast<int>(sys.block_dims.size()); ++bi) {
      const int nb = sys.block_dims[bi];
      for (int r = 0; r < sys.d; ++r)
        for (int c = r0; c < r0 + nb; ++c)
          if ((r < r0 || r >= r0 + nb) && m(r, c) != 0.0)
            throw PreconditionError("system: linear part is not block diagonal");
      r0 += nb;
    }
    if (std::abs(m.partialPivLu().determinant()) < 1e-300)
      throw PreconditionError("system: linear part is singular");
  };
  if (sys.linear.constant) {
    check_matrix(sys.linear.matrix);
  } else {
    if (sys.driving.kind != DrivingKind::bernoulli)
      throw PreconditionError("system: per-symbol linear part needs bernoulli driving");
    if (static_cast<int>(sys.linear.per_symbol.size()) != sys.driving.alphabet)
      throw PreconditionError("system: one matrix per symbol required");
    for (const Mat& m : sys.linear.per_symbol) check_matrix(m);
  }

  // fixed point and linearization at 0
  const Vec zero = Vec::Zero(sys.d);
  if (sys.nonlin.value(zero).norm() != 0.0)
    throw PreconditionError("system: nonlinearity must vanish at 0");
  if (sys.nonlin.jacobian(zero).norm() != 0.0)
    throw PreconditionError("system: nonlinearity derivative must vanish at 0");
}

double measure_M(const RandomMapSystem& sys, int grid_per_dim) {
  if (grid_per_dim <= 0) grid_per_dim = (sys.d <= 3) ? 21 : 7;
  double m = 0.0;
  const long total = static_cast<long>(std::pow(grid_per_dim, sys.d));
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    Vec x(sys.d);
    for (int i = 0; i < sys.d; ++i) {
      const int g = rem % grid_per_dim;
      rem /= grid_per_dim;
      x[i] = sys.rho * (2.0 * g / (grid_per_dim - 1.0) - 1.0);
    }
    m = std::max(m, sys.nonlin.value(x).norm() / sys.rho);
    m = std::max(m, sys.nonlin.jacobian(x).norm());
    m = std::max(m, sys.nonlin.hessian(x).norm());
  }
  return m;
}

std::pair<Vec, Mat> iterate(const RandomMapSystem& sys, const OmegaOrbit& orb,
                            long n, const Vec& x) {
  if (std::labs(n) > orb.half_width)
    throw PreconditionError("iterate: |n| exceeds orbit half width");
  Vec z = x;
  Mat J = Mat::Identity(sys.d, sys.d);
  if (n >= 0) {
    for (long k = 0; k < n; ++k) {
      const DrivingState s = orb.state(k);
      J = sys.jacobian(s, z) * J;
      z = sys.evaluate(s, z);
    }
  } else {
    for (long k = -1; k >= n; --k) {
      const DrivingState s = orb.state(k);
      z = sys.invert(s, z);
      J = sys.jacobian(s, z).partialPivLu().solve(J).eval();
    }
  }
  return {z, J};
}

Vec iterate_point(const RandomMapSystem& sys, const OmegaOrbit& orb, long n,
                  const Vec& x) {
  Vec z = x;
  if (n >= 0) {
    for (long k = 0; k < n; ++k) z = sys.evaluate(orb.state(k), z);
  } else {
    for (long k = -1; k >= n; --k) z = sys.invert(orb.state(k), z);
  }
  return z;
}

std::vector<Vec> orbit_points(const RandomMapSystem& sys, const OmegaOrbit& orb,
                              long lo, long hi, const Vec& x) {
  std::vector<Vec> pts(static_cast<std::size_t>(hi - lo + 1));
  auto at = [&](long k) -> Vec& { return pts[static_cast<std::size_t>(k - lo)]; };
  if (lo > 0 || hi < 0) throw PreconditionError("orbit_points: range must contain 0");
  at(0) = x;
  for (long k = 1; k <= hi; ++k) at(k) = sys.evaluate(orb.state(k - 1), at(k - 1));
  for (long k = -1; k >= lo; --k) at(k) = sys.invert(orb.state(k), at(k + 1));
  return pts;
}

}  // namespace ranlin
