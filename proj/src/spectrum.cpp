#include "ranlin/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ranlin {

namespace {

// One QR re-orthonormalization step: Z = Q R with positive diagonal of R;
// returns the log of the diagonal in `logdiag`.
Mat qr_step(const Mat& Z, Vec* logdiag) {
  Eigen::HouseholderQR<Mat> qr(Z);
  Mat Q = qr.householderQ() * Mat::Identity(Z.rows(), Z.cols());
  Mat R = Q.transpose() * Z;
  for (int i = 0; i < Z.cols(); ++i) {
    if (R(i, i) < 0.0) Q.col(i) *= -1.0;
    if (logdiag) (*logdiag)[i] = std::log(std::abs(R(i, i)));
  }
  return Q;
}

std::vector<double> qr_rates(const RandomMapSystem& sys, const DrivingSystem& driving,
                             const std::vector<int>& coords, long n_steps,
                             long n_transient, std::vector<double>* half_rates) {
  const int k = static_cast<int>(coords.size());
  Mat Q = Mat::Identity(k, k);
  Vec logdiag(k);
  for (long n = 0; n < n_transient; ++n)
    Q = qr_step(submatrix(sys.lambda(driving.state(n)), coords, coords) * Q, nullptr);
  Vec sums = Vec::Zero(k);
  Vec sums_half = Vec::Zero(k);
  for (long n = 0; n < n_steps; ++n) {
    const Mat A = submatrix(sys.lambda(driving.state(n_transient + n)), coords, coords);
    Q = qr_step(A * Q, &logdiag);
    sums += logdiag;
    if (n == n_steps / 2 - 1) sums_half = sums;
  }
  std::vector<double> rates(k);
  for (int i = 0; i < k; ++i) rates[i] = sums[i] / static_cast<double>(n_steps);
  if (half_rates) {
    half_rates->resize(k);
    for (int i = 0; i < k; ++i)
      (*half_rates)[i] = sums_half[i] / static_cast<double>(n_steps / 2);
  }
  return rates;
}

}  // namespace

double Spectrum::lambda_max() const {
  return std::max(2.0 * lambda.front(), -2.0 * lambda.back());
}

BlockStructure Spectrum::blocks() const {
  if (!aligned)
    throw PreconditionError("Spectrum::blocks: spectral blocks are not aligned "
                            "with the system's coordinate blocks");
  BlockStructure b;
  b.lambda = lambda;
  b.dims = mult;
  b.coords = coords;
  b.tau = tau;
  b.d = d;
  return b;
}

Spectrum lyapunov_exponents(const RandomMapSystem& sys, const DrivingSystem& driving,
                            long n_steps, long n_transient) {
  if (n_steps < 1000)
    throw PreconditionError("lyapunov_exponents: need at least 10^3 steps");
  std::vector<int> all(sys.d);
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> half;
  std::vector<double> rates = qr_rates(sys, driving, all, n_steps, n_transient, &half);

  for (int i = 0; i < sys.d; ++i)
    if (std::abs(rates[i] - half[i]) > 0.05)
      throw NumericError("lyapunov_exponents: running averages have not settled");
  for (double r : rates)
    if (std::abs(r) < 1e-2)
      throw NumericError("lyapunov_exponents: near-zero exponent, cocycle not hyperbolic");

  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double scale = 1.0;
  for (double r : sorted) scale = std::max(scale, std::abs(r));
  const double gap_thresh = 1e-6 * scale;

  Spectrum spec;
  spec.d = sys.d;
  std::vector<double> sumv;
  std::vector<int> cnt;
  for (double r : sorted) {
    if (!sumv.empty() && (sumv.back() / cnt.back() - r) <= gap_thresh) {
      sumv.back() += r;
      cnt.back() += 1;
    } else {
      sumv.push_back(r);
      cnt.push_back(1);
    }
  }
  for (std::size_t c = 0; c < sumv.size(); ++c) {
    spec.lambda.push_back(sumv[c] / cnt[c]);
    spec.mult.push_back(cnt[c]);
  }
  spec.tau = 0;
  for (double l : spec.lambda)
    if (l > 0.0) ++spec.tau;

  // Per system block rates establish the block -> spectral-cluster mapping.
  // When a declared block carries rates from several clusters the spectrum is
  // still valid but loses the coordinate alignment.
  spec.coords.assign(spec.lambda.size(), {});
  spec.sys_block_of.assign(spec.lambda.size(), -1);
  const double match_tol = 10 * gap_thresh + 1e-3 * scale;
  int c0 = 0;
  for (std::size_t b = 0; b < sys.block_dims.size() && spec.aligned; ++b) {
    std::vector<int> bc(sys.block_dims[b]);
    std::iota(bc.begin(), bc.end(), c0);
    c0 += sys.block_dims[b];
    const std::vector<double> br = qr_rates(sys, driving, bc, n_steps, n_transient, nullptr);
    const double mean = std::accumulate(br.begin(), br.end(), 0.0) / br.size();
    int best = 0;
    for (int c = 1; c < spec.p(); ++c)
      if (std::abs(spec.lambda[c] - mean) < std::abs(spec.lambda[best] - mean)) best = c;
    for (double r : br)
      if (std::abs(spec.lambda[best] - r) > match_tol) spec.aligned = false;
    if (!spec.aligned) break;
    spec.coords[best].insert(spec.coords[best].end(), bc.begin(), bc.end());
    if (spec.sys_block_of[best] < 0) spec.sys_block_of[best] = static_cast<int>(b);
  }
  if (spec.aligned)
    for (int c = 0; c < spec.p(); ++c)
      if (static_cast<int>(spec.coords[c].size()) != spec.mult[c]) spec.aligned = false;
  if (!spec.aligned) {
    spec.coords.assign(spec.lambda.size(), {});
    spec.sys_block_of.assign(spec.lambda.size(), -1);
  }
  return spec;
}

Spectrum spectrum_from_exponents(const std::vector<double>& lambda,
                                 const std::vector<int>& mult) {
  if (lambda.size() != mult.size() || lambda.empty())
    throw PreconditionError("spectrum_from_exponents: shape mismatch");
  Spectrum spec;
  spec.lambda = lambda;
  spec.mult = mult;
  int c0 = 0;
  for (std::size_t j = 0; j < lambda.size(); ++j) {
    if (j + 1 < lambda.size() && lambda[j] <= lambda[j + 1])
      throw PreconditionError("spectrum_from_exponents: exponents must decrease");
    std::vector<int> bc(mult[j]);
    std::iota(bc.begin(), bc.end(), c0);
    c0 += mult[j];
    spec.coords.push_back(bc);
    spec.sys_block_of.push_back(static_cast<int>(j));
    if (lambda[j] > 0.0) ++spec.tau;
  }
  spec.d = c0;
  return spec;
}

ConstantsBudget constants_budget(const Spectrum& spec, double alpha) {
  ConstantsBudget b;
  const auto& l = spec.lambda;
  const int p = spec.p();
  const int tau = spec.tau;
  b.lambda_max = spec.lambda_max();

  double gap_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j + 1 < p; ++j) gap_min = std::min(gap_min, l[j] - l[j + 1]);

  double defect_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < tau; ++i)
    for (int k = tau; k < p; ++k)
      for (int j = 0; j < p; ++j)
        defect_min = std::min(defect_min, std::abs(l[i] + l[k] - l[j]));

  const double hyp = std::min(l[tau - 1], -l[tau]);
  const double eps_bound =
      0.01 * std::min({1.0, gap_min / (2.0 * b.lambda_max) * hyp, defect_min});
  b.eps = 0.5 * eps_bound;

  b.beta = std::min(1.0, std::min(gap_min / b.lambda_max,
                                  defect_min / (2.0 * b.lambda_max)));

  double beta_E = std::numeric_limits<double>::infinity();
  for (int j = 0; j + 1 < p; ++j)
    beta_E = std::min(beta_E, (l[j] - l[j + 1] - 3.0 * b.eps) / (6.0 * b.lambda_max));
  b.beta_E = beta_E;

  double kd = std::numeric_limits<double>::infinity();
  for (int k = tau; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (l[k] != l[j]) kd = std::min(kd, std::abs(l[k] - l[j]) / l[0]);
  const double sigma_bound =
      0.1 * std::min({l[tau - 1] / b.lambda_max, -l[tau] / b.lambda_max, kd});
  b.sigma = 0.5 * sigma_bound;

  b.beta_N = std::min(b.eps / b.lambda_max, alpha);
  b.beta_v = std::min(b.beta_E, b.beta_N);
  b.beta_alpha = std::min(b.beta, b.beta_v);
  return b;
}

namespace {

Mat orthonormalize(const Mat& A) {
  Eigen::HouseholderQR<Mat> qr(A);
  return qr.householderQ() * Mat::Identity(A.rows(), A.cols());
}

// Intersection of the column spans, of expected dimension dim_out.
Mat span_intersection(const Mat& U, const Mat& W, int dim_out) {
  const int d = static_cast<int>(U.rows());
  Mat A(2 * d, d);
  A.topRows(d) = Mat::Identity(d, d) - U * U.transpose();
  A.bottomRows(d) = Mat::Identity(d, d) - W * W.transpose();
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();  // descending
  const double kept = sv[d - 1];
  const double excluded = (d - dim_out - 1 >= 0) ? sv[d - dim_out - 1] : 1.0;
  if (kept > 1e-4 || excluded < 1e-2)
    throw NumericError("oseledets_splitting: ill-conditioned subspace intersection");
  return orthonormalize(svd.matrixV().rightCols(dim_out));
}

}  // namespace

Splitting oseledets_splitting(const RandomMapSystem& sys, const OmegaOrbit& orb,
                              const Vec& x, long horizon, const Spectrum& spec,
                              double cond_cap) {
  const int d = sys.d;
  const int p = spec.p();
  const BlockStructure bs = spec.blocks();
  const long T = horizon;
  const std::vector<Vec> pts = orbit_points(sys, orb, -T, T, x);
  auto z = [&](long n) -> const Vec& { return pts[static_cast<std::size_t>(n + T)]; };

  // pseudo-unstable spans: forward push of the leading coordinate frame,
  // rescaled every step (the shift only conditions the numbers)
  std::vector<Mat> U(p);  // U[j]: span of blocks 0..j at x
  for (int j = 0; j + 1 < p; ++j) {
    const std::vector<int> idx = bs.coords_leq(j);
    Mat Q(d, static_cast<int>(idx.size()));
    Q.setZero();
    for (int c = 0; c < static_cast<int>(idx.size()); ++c) Q(idx[c], c) = 1.0;
    for (long n = -T; n < 0; ++n)
      Q = orthonormalize(sys.jacobian(orb.state(n), z(n)) * Q);
    U[j] = Q;
  }
  // pseudo-stable spans: backward pull of the trailing coordinate frame
  std::vector<Mat> W(p);  // W[j]: span of blocks j..p-1 at x
  for (int j = 1; j < p; ++j) {
    const std::vector<int> idx = bs.coords_geq(j);
    Mat Q(d, static_cast<int>(idx.size()));
    Q.setZero();
    for (int c = 0; c < static_cast<int>(idx.size()); ++c) Q(idx[c], c) = 1.0;
    for (long n = T; n >= 1; --n) {
      const Mat J = sys.jacobian(orb.state(n - 1), z(n - 1));
      Q = orthonormalize(J.partialPivLu().solve(Q));
    }
    W[j] = Q;
  }

  Splitting out;
  out.x = x;
  out.fibers.resize(p);
  for (int b = 0; b < p; ++b) {
    if (b == 0 && p == 1) {
      out.fibers[b] = Mat::Identity(d, d);
    } else if (b == 0) {
      out.fibers[b] = U[0];
    } else if (b == p - 1) {
      out.fibers[b] = W[p - 1];
    } else {
      out.fibers[b] = span_intersection(U[b], W[b], spec.mult[b]);
    }
  }

  out.basis = Mat::Zero(d, d);
  int col = 0;
  for (int b = 0; b < p; ++b) {
    const Mat& E = out.fibers[b];
    for (int c : spec.coords[b]) {
      Vec e = Vec::Zero(d);
      e[c] = 1.0;
      Vec v = E * (E.transpose() * e);
      const double nv = v.norm();
      if (nv < 1e-8)
        throw NumericError("oseledets_splitting: fiber projection degenerate");
      v /= nv;
      int arg = 0;
      for (int i = 1; i < d; ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
      if (v[arg] < 0.0) v = -v;
      out.basis.col(col++) = v;
    }
  }
  Eigen::JacobiSVD<Mat> svd(out.basis);
  const double cond = svd.singularValues()(0) / svd.singularValues()(d - 1);
  if (!(cond < cond_cap))
    throw NumericError("oseledets_splitting: frame condition cap exceeded");
  out.frame = out.basis.partialPivLu().inverse();
  return out;
}

FrameChain block_diagonalize(const RandomMapSystem& sys, const OmegaOrbit& orb,
                             const Vec& x, const Spectrum& spec, long lo, long hi,
                             long horizon) {
  FrameChain fc;
  fc.lo = lo;
  fc.hi = hi;
  const std::vector<Vec> pts = orbit_points(sys, orb, lo, hi, x);
  fc.z = pts;
  fc.basis.resize(pts.size());
  fc.frame.resize(pts.size());
  for (long n = lo; n <= hi; ++n) {
    const Splitting s =
        oseledets_splitting(sys, orb.shifted(n), fc.point(n), horizon, spec);
    fc.basis[static_cast<std::size_t>(n - lo)] = s.basis;
    fc.frame[static_cast<std::size_t>(n - lo)] = s.frame;
  }
  fc.lambda_bar.resize(pts.size() - 1);
  double resid = 0.0;
  for (long n = lo; n < hi; ++n) {
    const Mat J = sys.jacobian(orb.state(n), fc.point(n));
    Mat Lb = fc.Binv(n + 1) * J * fc.B(n);
    // off-block entries measured, then cleared to keep products exactly block
    // diagonal
    int r0 = 0;
    for (int b = 0; b < spec.p(); ++b) {
      const int nb = spec.mult[b];
      for (int r = r0; r < r0 + nb; ++r)
        for (int c = 0; c < spec.d; ++c)
          if (c < r0 || c >= r0 + nb) {
            resid = std::max(resid, std::abs(Lb(r, c)));
            Lb(r, c) = 0.0;
          }
      r0 += nb;
    }
    fc.lambda_bar[static_cast<std::size_t>(n - lo)] = Lb;
  }
  fc.off_block_residual = resid;
  return fc;
}

double subspace_distance(const Mat& E, const Mat& F) {
  if (E.rows() != F.rows())
    throw PreconditionError("subspace_distance: ambient dimension mismatch");
  auto rank_ok = [](const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(m.cols() - 1) > 1e-12 * svd.singularValues()(0);
  };
  if (!rank_ok(E) || !rank_ok(F))
    throw PreconditionError("subspace_distance: rank-deficient basis");
  const Mat U = orthonormalize(E);
  const Mat W = orthonormalize(F);
  const int dmb = static_cast<int>(E.rows());
  const Mat PU = Mat::Identity(dmb, dmb) - U * U.transpose();
  const Mat PW = Mat::Identity(dmb, dmb) - W * W.transpose();
  const double a = Eigen::JacobiSVD<Mat>(PW * U).singularValues()(0);
  const double b = Eigen::JacobiSVD<Mat>(PU * W).singularValues()(0);
  return std::max(a, b);
}

ResonanceReport resonance_report(const Spectrum& spec, double alpha) {
  ResonanceReport rep;
  const auto& l = spec.lambda;
  const int p = spec.p();
  const int tau = spec.tau;
  if (tau < 1 || tau >= p)
    throw PreconditionError("resonance_report: need both positive and negative exponents");
  const double tol = 1e-9;
  for (int i = 0; i < tau; ++i)
    for (int k = tau; k < p; ++k)
      for (int j = 0; j < p; ++j)
        if (std::abs(l[i] + l[k] - l[j]) <= tol) {
          rep.belitskii_ok = false;
          rep.violations.push_back({i + 1, k + 1, j + 1});
        }
  rep.bunching_ok = (l[0] - l[tau - 1] < -l[tau]) && (l[tau] - l[p - 1] < l[tau - 1]);
  rep.budget = constants_budget(spec, alpha);
  return rep;
}

double holder_estimate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 20)
    throw PreconditionError("holder_estimate: need at least 20 pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [dx, dv] : pairs) {
    if (!(dx > 0.0) || !(dv > 0.0))
      throw PreconditionError("holder_estimate: degenerate pairs");
    const double lx = std::log(dx), ly = std::log(dv);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(pairs.size());
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14)
    throw PreconditionError("holder_estimate: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace ranlin
