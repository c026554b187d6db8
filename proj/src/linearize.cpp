#include "ranlin/linearize.hpp"

#include <cmath>

namespace ranlin {

OneSidedLinearizer::OneSidedLinearizer(std::function<Vec(long, const Vec&)> map_fwd,
                                       std::function<Vec(long, const Vec&)> map_inv,
                                       std::shared_ptr<const BlockProducts> prods,
                                       bool expanding, int k_max, double tol)
    : fwd_(std::move(map_fwd)), inv_(std::move(map_inv)), prods_(std::move(prods)),
      expanding_(expanding), k_max_(k_max), tol_(tol) {}

Vec OneSidedLinearizer::forward(long n, const Vec& x,
                                std::vector<double>* cauchy) const {
  Vec orbit = x;
  Vec val = x;
  int flat = 0;
  for (int k = 1; k <= k_max_; ++k) {
    Vec next;
    if (expanding_) {
      if (n - k < prods_->lo())
        throw NumericError("one-sided limit: window exhausted");
      orbit = inv_(n - k, orbit);  // point at index n - k
      next = prods_->cumulative(n) * prods_->cumulative_inv(n - k) * orbit;
    } else {
      if (n + k > prods_->hi())
        throw NumericError("one-sided limit: window exhausted");
      orbit = fwd_(n + k - 1, orbit);  // point at index n + k
      next = prods_->cumulative(n) * prods_->cumulative_inv(n + k) * orbit;
    }
    const double diff = (next - val).lpNorm<Eigen::Infinity>();
    if (cauchy) cauchy->push_back(diff);
    val = next;
    if (diff <= tol_ * std::max(1.0, val.lpNorm<Eigen::Infinity>())) {
      if (++flat >= 3) return val;
    } else {
      flat = 0;
    }
  }
  throw NumericError("one-sided limit: not Cauchy within the step cap");
}

Vec OneSidedLinearizer::inverse(long n, const Vec& y) const {
  const int m = static_cast<int>(y.size());
  Vec x = y;
  for (int it = 0; it < 60; ++it) {
    const Vec r = forward(n, x) - y;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, y.lpNorm<Eigen::Infinity>()))
      return x;
    Mat J(m, m);
    const double h = 1e-7 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    for (int c = 0; c < m; ++c) {
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      J.col(c) = (forward(n, xp) - forward(n, xm)) / (2.0 * h);
    }
    x -= J.partialPivLu().solve(r);
  }
  throw NumericError("one-sided linearizer: inverse Newton failed");
}

Decoupler::Decoupler(const MapCocycle& coc, const BlockStructure& bs, LpConfig cfg)
    : coc_(&coc), bs_(bs), cfg_(cfg) {
  scoords_ = bs_.coords_stable();
  ucoords_ = bs_.coords_unstable();
}

Vec Decoupler::forward(long n, const Vec& x) const {
  ShiftedCocycle view(*coc_, n);
  LpSolver su(view, bs_, x, LpSide::unstable(bs_), cfg_);
  LpSolver ss(view, bs_, x, LpSide::stable(bs_), cfg_);
  const Vec p0 = su.solve(Vec::Zero(static_cast<int>(ucoords_.size()))).value0();
  const Vec q0 = ss.solve(Vec::Zero(static_cast<int>(scoords_.size()))).value0();
  return x + embed_zero(p0, scoords_) + embed_zero(q0, ucoords_);
}

Vec Decoupler::inverse(long n, const Vec& z) const {
  ShiftedCocycle view(*coc_, n);
  const Vec zs = embed_zero(z, scoords_);
  const Vec zu = embed_zero(z, ucoords_);
  LpSolver su(view, bs_, zs, LpSide::unstable(bs_), cfg_);  // p0(., pi_s z, .)
  LpSolver ss(view, bs_, zu, LpSide::stable(bs_), cfg_);    // q0(., pi_u z, .)
  Vec x = z;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    const Vec p0 = su.solve(extract(x, ucoords_)).value0();
    const Vec q0 = ss.solve(extract(x, scoords_)).value0();
    const Vec next = z + embed_zero(p0, scoords_) + embed_zero(q0, ucoords_);
    const double diff = (next - x).lpNorm<Eigen::Infinity>();
    x = next;
    if (diff <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) return x;
    if (it > 5 && diff > prev * 1.5)
      throw NumericError("decoupler: fixed-point inverse fails to contract");
    prev = diff;
  }
  throw NumericError("decoupler: fixed-point inverse did not converge");
}

Vec Decoupler::Fs(long n, const Vec& xs) const {
  return extract(coc_->eval(n, insert(xs, scoords_, bs_.d)), scoords_);
}

Vec Decoupler::Fu(long n, const Vec& xu) const {
  return extract(coc_->eval(n, insert(xu, ucoords_, bs_.d)), ucoords_);
}

namespace {

Vec newton_inverse_block(const std::function<Vec(const Vec&)>& f, const Vec& y) {
  const int m = static_cast<int>(y.size());
  Vec x = y;
  for (int it = 0; it < 80; ++it) {
    const Vec r = f(x) - y;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * std::max(1.0, y.lpNorm<Eigen::Infinity>()))
      return x;
    Mat J(m, m);
    const double h = 1e-7 * std::max(1.0, x.lpNorm<Eigen::Infinity>());
    for (int c = 0; c < m; ++c) {
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      J.col(c) = (f(xp) - f(xm)) / (2.0 * h);
    }
    x -= J.partialPivLu().solve(r);
  }
  throw NumericError("block inverse Newton failed");
}

}  // namespace

Vec Decoupler::Fs_inverse(long n, const Vec& ys) const {
  return newton_inverse_block([&](const Vec& x) { return Fs(n, x); }, ys);
}

Vec Decoupler::Fu_inverse(long n, const Vec& yu) const {
  return newton_inverse_block([&](const Vec& x) { return Fu(n, x); }, yu);
}

Conjugacy::Conjugacy(const MapCocycle& coc, const BlockStructure& bs, LpConfig cfg,
                     int k_max, double tol)
    : coc_(&coc), bs_(bs), dec_(coc, bs, cfg),
      psi_s_([this](long n, const Vec& x) { return dec_.Fs(n, x); },
             [this](long n, const Vec& y) { return dec_.Fs_inverse(n, y); },
             std::make_shared<BlockProducts>(
                 [&coc](long n) { return coc.linear(n); }, bs.coords_stable(),
                 -(k_max + 2), k_max + 2),
             false, k_max, tol),
      psi_u_([this](long n, const Vec& x) { return dec_.Fu(n, x); },
             [this](long n, const Vec& y) { return dec_.Fu_inverse(n, y); },
             std::make_shared<BlockProducts>(
                 [&coc](long n) { return coc.linear(n); }, bs.coords_unstable(),
                 -(k_max + 2), k_max + 2),
             true, k_max, tol) {}

Vec Conjugacy::forward(long n, const Vec& x) const {
  const Vec z = dec_.forward(n, x);
  const Vec ps = psi_s_.forward(n, extract(z, dec_.stable_coords()));
  const Vec pu = psi_u_.forward(n, extract(z, dec_.unstable_coords()));
  return insert(ps, dec_.stable_coords(), bs_.d) +
         insert(pu, dec_.unstable_coords(), bs_.d);
}

Vec Conjugacy::inverse(long n, const Vec& z) const {
  const Vec ws = psi_s_.inverse(n, extract(z, dec_.stable_coords()));
  const Vec wu = psi_u_.inverse(n, extract(z, dec_.unstable_coords()));
  const Vec w = insert(ws, dec_.stable_coords(), bs_.d) +
                insert(wu, dec_.unstable_coords(), bs_.d);
  return dec_.inverse(n, w);
}

ConjugacyReport verify_conjugacy(const Conjugacy& Phi, const MapCocycle& coc,
                                 const BlockStructure& bs, double radius,
                                 int n_points, int workers, bool keep_residuals) {
  ConjugacyReport rep;
  rep.points = n_points;
  const int d = bs.d;
  std::vector<double> residuals(static_cast<std::size_t>(n_points));
  std::vector<double> roundtrips(static_cast<std::size_t>(n_points));
  const Mat L0 = coc.linear(0);
  parallel_for(n_points, workers, [&](long i) {
    const Vec x = halton_point(static_cast<std::uint64_t>(i + 1), d, radius);
    const Vec lhs = Phi.forward(1, coc.eval(0, x));
    const Vec phix = Phi.forward(0, x);
    residuals[static_cast<std::size_t>(i)] =
        (lhs - L0 * phix).lpNorm<Eigen::Infinity>();
    roundtrips[static_cast<std::size_t>(i)] =
        (Phi.inverse(0, phix) - x).lpNorm<Eigen::Infinity>();
  });
  for (double r : residuals) rep.max_residual = std::max(rep.max_residual, r);
  for (double r : roundtrips) rep.max_roundtrip = std::max(rep.max_roundtrip, r);
  if (keep_residuals) rep.residuals = residuals;

  // DPhi(omega, 0) by central differences
  const double h = 1e-6 * std::max(1.0, radius);
  Mat D(d, d);
  for (int c = 0; c < d; ++c) {
    Vec xp = Vec::Zero(d), xm = Vec::Zero(d);
    xp[c] = h;
    xm[c] = -h;
    D.col(c) = (Phi.forward(0, xp) - Phi.forward(0, xm)) / (2.0 * h);
  }
  rep.dphi0_deviation = (D - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  return rep;
}

EscapeResult escape_time(const MapCocycle& coc, const BlockStructure& bs,
                         const Vec& x, long n_max, const Decoupler* dec,
                         double stable_tol) {
  const std::vector<int> ucoords = bs.coords_unstable();
  if (dec) {
    const Vec z = dec->forward(0, x);
    if (extract(z, ucoords).lpNorm<Eigen::Infinity>() < stable_tol)
      return {true, 0};
  }
  Vec z = x;
  for (long n = 0; n <= n_max; ++n) {
    if (extract(z, ucoords).lpNorm<Eigen::Infinity>() >= 0.5) return {false, n};
    z = coc.eval(n, z);
  }
  throw NumericError("escape_time: cap exceeded without escape");
}

double escape_bound(double lambda_tau, double eps, double K_meas, double L_meas,
                    double lip_meas, double sigma_hat, double pi_u_norm) {
  if (pi_u_norm <= 0.0) return std::numeric_limits<double>::infinity();
  const double num = K_meas * L_meas * std::pow(lip_meas / pi_u_norm, 1.0 / sigma_hat);
  return std::log(std::max(num, 1.0)) / (lambda_tau - 3.0 * eps);
}

}  // namespace ranlin
