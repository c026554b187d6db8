#include "ranlin/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ranlin {

LyapunovNorm::LyapunovNorm(std::function<Mat(long)> block_step, double lambda_j,
                           double eps, long max_half_width)
    : step_(std::move(block_step)), lambda_(lambda_j), eps_(eps), max_w_(max_half_width) {}

double LyapunovNorm::operator()(long n, const Vec& xj) const {
  const double x0 = xj.norm();
  if (x0 == 0.0) return 0.0;
  double acc = x0;  // m = 0 term
  for (int dir : {+1, -1}) {
    Vec v = xj / x0;
    double lognorm = std::log(x0);
    double prev = x0;
    double rhat = 0.0;
    bool done = false;
    for (long m = 1; m <= max_w_; ++m) {
      const long idx = (dir > 0) ? n + m - 1 : n - m;
      const Mat A = step_(idx);
      v = (dir > 0) ? Vec(A * v) : Vec(A.partialPivLu().solve(v));
      const double nv = v.norm();
      lognorm += std::log(nv);
      v /= nv;
      const double t = std::exp(lognorm - lambda_ * (dir * m) - eps_ * m);
      acc += t;
      rhat = std::max(0.5 * rhat, t / prev);
      prev = t;
      if (m > 5 && rhat < 1.0) {
        const double tail = t * rhat / (1.0 - rhat);
        if (tail < 0.5e-12 * acc) {
          done = true;
          break;
        }
      }
    }
    if (!done) throw NumericError("lyapunov_norm: tail bound violated");
  }
  return acc;
}

Vec apply_T(const CohomPair& P, const SeqFunc& h, long n, const Vec& xi) {
  const Mat Lj = P.Pj->cumulative(n + 1) * P.Pj->cumulative_inv(n);
  const Mat Li = P.Pi->cumulative(n + 1) * P.Pi->cumulative_inv(n);
  return h(n, xi) - Lj.partialPivLu().solve(h(n + 1, Li * xi));
}

NeumannBranch choose_branch(double rate) {
  return rate > 0.0 ? NeumannBranch::forward : NeumannBranch::backward;
}

Vec invert_T(const CohomPair& P, const SeqFunc& h, long n, const Vec& xi,
             NeumannBranch branch, double tol, long k_max, long* k_used) {
  Vec acc = Vec::Zero(P.Pj->cumulative(0).rows());
  int zeros = 0;
  double last = std::numeric_limits<double>::infinity();
  for (long k = (branch == NeumannBranch::backward) ? 1 : 0; k <= k_max; ++k) {
    Vec term;
    if (branch == NeumannBranch::backward) {
      const Mat prefJ = P.Pj->cumulative(n) * P.Pj->cumulative_inv(n - k);
      const Vec arg = P.Pi->cumulative(n - k) * P.Pi->cumulative_inv(n) * xi;
      term = -(prefJ * h(n - k, arg));
    } else {
      const Mat prefJ = P.Pj->cumulative(n) * P.Pj->cumulative_inv(n + k);
      const Vec arg = P.Pi->cumulative(n + k) * P.Pi->cumulative_inv(n) * xi;
      term = prefJ * h(n + k, arg);
    }
    acc += term;
    const double tn = term.lpNorm<Eigen::Infinity>();
    if (k_used) *k_used = k;
    if (branch == NeumannBranch::forward_terminating) {
      zeros = (tn == 0.0) ? zeros + 1 : 0;
      if (zeros >= 3) return acc;
    }
    if (tn <= tol * (1.0 + acc.lpNorm<Eigen::Infinity>()) && k >= 1) return acc;
    last = tn;
  }
  if (last <= 10.0 * tol) return acc;
  throw NumericError("invert_T: series truncation exhausted (resonance or wrong branch)");
}

// --- sampled leaf family ---------------------------------------------------

SampledLeafFamily::SampledLeafFamily(const MapCocycle& coc, const BlockStructure& bs,
                                     int block, LpConfig lp_cfg, long lo, long hi,
                                     double radius, int n_grid, bool stationary)
    : d_(coc.dim()), lo_(lo), hi_(hi), stationary_(stationary), radius_(radius) {
  if (bs.coords[block].size() != 1)
    throw PreconditionError("SampledLeafFamily: only 1-d unstable blocks are supported");
  coord_ = bs.coords[block][0];
  if (n_grid < 4) throw PreconditionError("SampledLeafFamily: grid too small");
  grid_.resize(n_grid);
  for (int g = 0; g < n_grid; ++g)
    grid_[g] = -radius + 2.0 * radius * g / (n_grid - 1);

  const long count = stationary_ ? 1 : (hi_ - lo_ + 1);
  z_.assign(count, {});
  dz_.assign(count, {});
  const Vec zero = Vec::Zero(d_);
  for (long c = 0; c < count; ++c) {
    const long m = stationary_ ? 0 : lo_ + c;
    ShiftedCocycle view(coc, m);
    IntermediateLeaf il(view, bs, zero, block, lp_cfg);
    auto& zr = z_[static_cast<std::size_t>(c)];
    auto& dzr = dz_[static_cast<std::size_t>(c)];
    zr.resize(grid_.size());
    dzr.resize(grid_.size());
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      Vec w(1);
      w[0] = grid_[g];
      zr[g] = il.chart(w);
      dzr[g] = il.chart_derivative(w).col(0);
    }
  }
}

const std::vector<Vec>& SampledLeafFamily::zrow(long m) const {
  if (stationary_) return z_[0];
  if (m < lo_ || m > hi_)
    throw PreconditionError("SampledLeafFamily: index outside sampled window");
  return z_[static_cast<std::size_t>(m - lo_)];
}

const std::vector<Vec>& SampledLeafFamily::dzrow(long m) const {
  if (stationary_) return dz_[0];
  if (m < lo_ || m > hi_)
    throw PreconditionError("SampledLeafFamily: index outside sampled window");
  return dz_[static_cast<std::size_t>(m - lo_)];
}

Vec SampledLeafFamily::point(long m, double w) const {
  const auto& zr = zrow(m);
  const auto& dzr = dzrow(m);
  const int n = static_cast<int>(grid_.size());
  if (w <= grid_.front()) return zr.front() + (w - grid_.front()) * dzr.front();
  if (w >= grid_.back()) return zr.back() + (w - grid_.back()) * dzr.back();
  int k = static_cast<int>((w - grid_.front()) / (grid_[1] - grid_[0]));
  k = std::min(std::max(k, 0), n - 2);
  const double hseg = grid_[k + 1] - grid_[k];
  const double t = (w - grid_[k]) / hseg;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  const double h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t);
  const double h11 = t * t * (t - 1);
  return h00 * zr[k] + h10 * hseg * dzr[k] + h01 * zr[k + 1] + h11 * hseg * dzr[k + 1];
}

Vec SampledLeafFamily::dpoint(long m, double w) const {
  const auto& zr = zrow(m);
  const auto& dzr = dzrow(m);
  const int n = static_cast<int>(grid_.size());
  if (w <= grid_.front()) return dzr.front();
  if (w >= grid_.back()) return dzr.back();
  int k = static_cast<int>((w - grid_.front()) / (grid_[1] - grid_[0]));
  k = std::min(std::max(k, 0), n - 2);
  const double hseg = grid_[k + 1] - grid_[k];
  const double t = (w - grid_[k]) / hseg;
  const double d00 = (6 * t * t - 6 * t) / hseg;
  const double d10 = 3 * t * t - 4 * t + 1;
  const double d01 = (6 * t - 6 * t * t) / hseg;
  const double d11 = 3 * t * t - 2 * t;
  return d00 * zr[k] + d10 * dzr[k] + d01 * zr[k + 1] + d11 * dzr[k + 1];
}

// --- block straightening ---------------------------------------------------

BlockStraightening::BlockStraightening(const MapCocycle& bar,
                                       const SampledLeafFamily& leaf,
                                       std::shared_ptr<BlockProducts> Pi, long lo,
                                       long hi, double tol, int k_max)
    : bar_(&bar), leaf_(&leaf), Pi_(std::move(Pi)), lo_(lo), hi_(hi), tol_(tol),
      k_max_(k_max) {}

double BlockStraightening::fbar_i(long m, double w) const {
  return bar_->eval(m, leaf_->point(m, w))[leaf_->coord()];
}

double BlockStraightening::fbar_i_inverse(long m, double target) const {
  const double lam = (Pi_->cumulative(m + 1) * Pi_->cumulative_inv(m))(0, 0);
  double w = target / lam;
  for (int it = 0; it < 60; ++it) {
    const double r = fbar_i(m, w) - target;
    if (std::abs(r) <= 1e-13 * std::max(1.0, std::abs(target))) return w;
    const double hstep = 1e-7 * std::max(1.0, std::abs(w));
    const double dr = (fbar_i(m, w + hstep) - fbar_i(m, w - hstep)) / (2.0 * hstep);
    if (dr == 0.0) throw NumericError("block straightening: flat leaf dynamics");
    w -= r / dr;
  }
  throw NumericError("block straightening: inverse Newton failed");
}

double BlockStraightening::forward(long m, double w) const {
  const auto key = std::make_pair(leaf_->stationary() ? 0L : m, w);
  auto it = fwd_memo_.find(key);
  if (it != fwd_memo_.end()) return it->second;
  const double val = forward_uncached(m, w);
  fwd_memo_.emplace(key, val);
  return val;
}

double BlockStraightening::forward_uncached(long m, double w) const {
  double cur = w;
  double prev = w;
  int flat = 0;
  for (int K = 1; K <= k_max_; ++K) {
    if (m - K < Pi_->lo())
      throw NumericError("block straightening: window exhausted");
    cur = fbar_i_inverse(m - K, cur);
    const double val =
        (Pi_->cumulative(m) * Pi_->cumulative_inv(m - K))(0, 0) * cur;
    if (std::abs(val - prev) <= tol_ * std::max(1.0, std::abs(val))) {
      if (++flat >= 3) return val;
    } else {
      flat = 0;
    }
    prev = val;
  }
  throw NumericError("block straightening: one-sided limit not Cauchy");
}

double BlockStraightening::inverse(long m, double y) const {
  const auto key = std::make_pair(leaf_->stationary() ? 0L : m, y);
  auto it = inv_memo_.find(key);
  if (it != inv_memo_.end()) return it->second;
  double w = y;
  for (int it2 = 0; it2 < 60; ++it2) {
    const double r = forward_uncached(m, w) - y;
    if (std::abs(r) <= 1e-12 * std::max(1.0, std::abs(y))) {
      inv_memo_.emplace(key, w);
      return w;
    }
    const double hstep = 1e-6 * std::max(1.0, std::abs(w));
    const double dr =
        (forward_uncached(m, w + hstep) - forward_uncached(m, w - hstep)) / (2.0 * hstep);
    if (dr == 0.0) throw NumericError("block straightening: flat conjugacy");
    w -= r / dr;
  }
  throw NumericError("block straightening: chart inversion failed");
}

// --- frame recursion -------------------------------------------------------

namespace {

// 4-point Lagrange interpolation (exact through cubic order), linear
// extension beyond the grid.  Stencils never straddle the origin: the
// interpolated functions may only be Hoelder there.
Vec grid_interp(const std::vector<double>& grid, const std::vector<Vec>& vals,
                double y, int d) {
  const int n = static_cast<int>(grid.size());
  if (n == 0) return Vec::Zero(d);
  if (y <= grid.front()) {
    const double t = (y - grid[0]) / (grid[1] - grid[0]);
    return vals[0] + t * (vals[1] - vals[0]);
  }
  if (y >= grid.back()) {
    const double t = (y - grid[n - 2]) / (grid[n - 1] - grid[n - 2]);
    return vals[n - 2] + t * (vals[n - 1] - vals[n - 2]);
  }
  int k = static_cast<int>(std::upper_bound(grid.begin(), grid.end(), y) -
                           grid.begin()) - 1;
  k = std::max(0, std::min(k, n - 2));
  int a = std::max(0, std::min(k - 1, n - 4));
  int c0 = static_cast<int>(std::lower_bound(grid.begin(), grid.end(), 0.0) -
                            grid.begin());
  if (c0 >= n) c0 = n - 1;
  if (c0 > 0 && std::abs(grid[c0 - 1]) < std::abs(grid[c0])) --c0;
  if (grid[c0] == 0.0) {
    if (y >= 0.0)
      a = std::max(a, std::min(c0, n - 4));
    else
      a = std::min(a, std::max(0, c0 - 3));
  }
  Vec out = Vec::Zero(d);
  for (int i = a; i < a + 4; ++i) {
    double L = 1.0;
    for (int j = a; j < a + 4; ++j)
      if (j != i) L *= (y - grid[j]) / (grid[i] - grid[j]);
    out += L * vals[i];
  }
  return out;
}

}  // namespace

Vec FrameSolution::eta_at(long n, double xi) const {
  if (n > hi) return Vec::Zero(static_cast<int>(skappa.front().size()));
  if (n < lo) throw PreconditionError("FrameSolution: index below window");
  return grid_interp(grid, eta[static_cast<std::size_t>(n - lo)], xi,
                     static_cast<int>(skappa.front().size()));
}

Vec FrameSolution::vbar(long n, double xi) const {
  return skappa.at(static_cast<std::size_t>(n - lo)) + eta_at(n, xi);
}

FrameSolution solve_stable_frame(const MapCocycle& bar, const BlockStructure& hbs,
                                 const ConstantsBudget& budget, int kappa, int iota,
                                 int block_i, const SampledLeafFamily& leaf,
                                 const FrameSolveConfig& cfg) {
  const int d = bar.dim();
  const int p = hbs.p();
  if (block_i >= hbs.tau)
    throw PreconditionError("solve_stable_frame: i must be an unstable block");
  if (kappa < hbs.tau)
    throw PreconditionError("solve_stable_frame: kappa must be a stable block");
  const int icoord = leaf.coord();
  const long W = cfg.window;
  const long k_back = 40;               // backward series depth (geometric)
  const long lo = -W - k_back, hi = W;  // materialized eta window
  const long prod_hi = W + cfg.k_reach + 2;
  const long prod_lo = lo - k_back - 2;

  auto step = [&bar](long n) { return bar.linear(n); };
  std::vector<std::unique_ptr<BlockProducts>> P(p);
  for (int b = 0; b < p; ++b)
    P[b] = std::make_unique<BlockProducts>(step, hbs.coords[b], prod_lo, prod_hi);

  // per-block series branch: forward sums terminate on the support of the
  // straightened nonlinearity; backward sums decay geometrically.  The sign
  // of lambda_j - lambda_kappa - sigma lambda_i picks the admissible one.
  std::vector<bool> fwd_branch(p);
  for (int j = 0; j < p; ++j)
    fwd_branch[j] = (hbs.lambda[j] - hbs.lambda[kappa] -
                     budget.sigma * hbs.lambda[block_i]) > 0.0;

  // the 1-d leaf dynamics in the graph coordinate
  auto fbar_i = [&](long m, double w) {
    return bar.eval(m, leaf.point(m, w))[icoord];
  };
  auto fbar_i_inv = [&](long m, double target) {
    const Mat L1 = P[block_i]->cumulative(m + 1) * P[block_i]->cumulative_inv(m);
    double w = target / L1(0, 0);
    for (int it = 0; it < 60; ++it) {
      const double r = fbar_i(m, w) - target;
      if (std::abs(r) <= 1e-14 * std::max(1.0, std::abs(target))) return w;
      const double hstep = 1e-7 * std::max(1.0, std::abs(w));
      const double dr = (fbar_i(m, w + hstep) - fbar_i(m, w - hstep)) / (2.0 * hstep);
      if (dr == 0.0) throw NumericError("solve_stable_frame: flat leaf dynamics");
      w -= r / dr;
    }
    throw NumericError("solve_stable_frame: leaf dynamics inversion failed");
  };

  // uniform grid in the graph coordinate
  std::vector<double> grid;
  for (int g = 0; g < cfg.n_grid; ++g)
    grid.push_back(-cfg.radius + 2.0 * cfg.radius * g / (cfg.n_grid - 1.0));
  const int G = static_cast<int>(grid.size());

  FrameSolution out;
  out.kappa = kappa;
  out.iota = iota;
  out.block_i = block_i;
  out.lo = lo;
  out.hi = hi;
  out.grid = grid;
  out.skappa.resize(static_cast<std::size_t>(hi - lo + 1));
  Vec e_iota = Vec::Zero(hbs.dims[kappa]);
  e_iota[iota] = 1.0;
  for (long n = lo; n <= hi; ++n)
    out.skappa[static_cast<std::size_t>(n - lo)] =
        insert(P[kappa]->cumulative(n) * e_iota, hbs.coords[kappa], d);
  auto s_at = [&](long m) {
    return insert(P[kappa]->cumulative(m) * e_iota, hbs.coords[kappa], d);
  };

  // series lattice along both paths; B matrices shared through a
  // stationarity-aware cache, prefactors cached per (n, k)
  struct Entry {
    long k;
    long m;
    double y;
    const Mat* B;
  };
  std::map<std::pair<long, double>, std::unique_ptr<Mat>> bcache;
  const bool stationary = leaf.stationary();
  auto b_at = [&](long m, double w) -> const Mat* {
    const auto key = std::make_pair(stationary ? 0L : m, w);
    auto it = bcache.find(key);
    if (it == bcache.end()) {
      const Vec z = leaf.point(m, w);
      const Mat Df = bar.jac(m, z) - bar.linear(m);
      std::unique_ptr<Mat> B;
      if (Df.lpNorm<Eigen::Infinity>() >= 1e-15)
        B = std::make_unique<Mat>(-bar.linear(m).partialPivLu().solve(Df));
      it = bcache.emplace(key, std::move(B)).first;
    }
    return it->second.get();
  };

  std::vector<std::vector<Mat>> pref_fwd(static_cast<std::size_t>(hi - lo + 1)),
      pref_back(static_cast<std::size_t>(hi - lo + 1));
  for (long n = lo; n <= hi; ++n) {
    auto& pf = pref_fwd[static_cast<std::size_t>(n - lo)];
    auto& pb = pref_back[static_cast<std::size_t>(n - lo)];
    pf.resize(static_cast<std::size_t>((cfg.k_reach + 1) * p));
    pb.resize(static_cast<std::size_t>((k_back + 1) * p));
    for (long k = 0; k <= cfg.k_reach; ++k)
      for (int j = 0; j < p; ++j)
        if (n + k + 1 <= prod_hi - 1)
          pf[static_cast<std::size_t>(k * p + j)] =
              P[j]->cumulative(n) * P[j]->cumulative_inv(n + k);
    for (long k = 0; k <= k_back; ++k)
      for (int j = 0; j < p; ++j)
        if (n - k - 1 >= prod_lo + 1)
          pb[static_cast<std::size_t>(k * p + j)] =
              P[j]->cumulative(n) * P[j]->cumulative_inv(n - k);
  }

  std::vector<std::vector<std::vector<Entry>>> fwd_lat(
      static_cast<std::size_t>(hi - lo + 1)),
      back_lat(static_cast<std::size_t>(hi - lo + 1));
  for (long n = lo; n <= hi; ++n) {
    auto& frow = fwd_lat[static_cast<std::size_t>(n - lo)];
    auto& brow = back_lat[static_cast<std::size_t>(n - lo)];
    frow.resize(static_cast<std::size_t>(G));
    brow.resize(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) {
      int zeros = 0;
      double w = grid[g];
      for (long k = 0; k <= cfg.k_reach; ++k) {
        const long m = n + k;
        if (m + 1 > prod_hi - 1) break;
        if (k > 0) w = fbar_i(m - 1, w);
        if (!std::isfinite(w) || std::abs(w) > 1e12) break;
        const Mat* B = b_at(m, w);
        if (!B) {
          if (++zeros >= 3) break;
          continue;
        }
        zeros = 0;
        frow[static_cast<std::size_t>(g)].push_back(Entry{k, m, w, B});
      }
      w = grid[g];
      for (long k = 1; k <= k_back; ++k) {
        const long m = n - k;
        if (m - 1 < prod_lo + 1) break;
        w = fbar_i_inv(m, w);
        const Mat* B = b_at(m, w);
        if (!B) break;  // contributions only shrink along the backward orbit
        brow[static_cast<std::size_t>(g)].push_back(Entry{k, m, w, B});
      }
    }
  }

  // recursion psi_{l} = T^{-1} B psi_{l-1}
  out.eta.assign(static_cast<std::size_t>(hi - lo + 1),
                 std::vector<Vec>(static_cast<std::size_t>(G), Vec::Zero(d)));
  auto psi_at = [&](const std::vector<std::vector<Vec>>& psi, long m,
                    double y) -> Vec {
    if (m > hi || m < lo) return Vec::Zero(d);
    return grid_interp(grid, psi[static_cast<std::size_t>(m - lo)], y, d);
  };
  auto weight = [&](long n, double xg) {
    const double ax = std::abs(xg);
    if (ax < 1e-9) return 0.0;  // eta(., 0) = 0 structurally
    const double wn = std::exp(-hbs.lambda[kappa] * static_cast<double>(n) -
                               10.0 * budget.eps * std::abs(static_cast<double>(n)));
    return wn * std::max(std::pow(ax, -(1.0 + budget.beta)),
                         std::pow(ax, -budget.sigma));
  };

  double prevN = 0.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    std::vector<std::vector<Vec>> next(
        static_cast<std::size_t>(hi - lo + 1),
        std::vector<Vec>(static_cast<std::size_t>(G), Vec::Zero(d)));
    for (long n = lo; n <= hi; ++n)
      for (int g = 0; g < G; ++g) {
        Vec acc = Vec::Zero(d);
        const auto& pf = pref_fwd[static_cast<std::size_t>(n - lo)];
        const auto& pb = pref_back[static_cast<std::size_t>(n - lo)];
        for (const Entry& e :
             fwd_lat[static_cast<std::size_t>(n - lo)][static_cast<std::size_t>(g)]) {
          const Vec val = (*e.B) * (s_at(e.m) + psi_at(out.eta, e.m, e.y));
          for (int j = 0; j < p; ++j)
            if (fwd_branch[j])
              acc += insert(pf[static_cast<std::size_t>(e.k * p + j)] *
                                extract(val, hbs.coords[j]),
                            hbs.coords[j], d);
        }
        for (const Entry& e :
             back_lat[static_cast<std::size_t>(n - lo)][static_cast<std::size_t>(g)]) {
          const Vec val = (*e.B) * (s_at(e.m) + psi_at(out.eta, e.m, e.y));
          for (int j = 0; j < p; ++j)
            if (!fwd_branch[j])
              acc -= insert(pb[static_cast<std::size_t>(e.k * p + j)] *
                                extract(val, hbs.coords[j]),
                            hbs.coords[j], d);
        }
        next[static_cast<std::size_t>(n - lo)][static_cast<std::size_t>(g)] = acc;
      }
    double Nl = 0.0, scale = 0.0;
    for (long n = -W; n <= W; ++n)
      for (int g = 0; g < G; ++g) {
        const std::size_t i1 = static_cast<std::size_t>(n - lo);
        const std::size_t i2 = static_cast<std::size_t>(g);
        const double wgt = weight(n, grid[g]);
        Nl = std::max(Nl, wgt * (next[i1][i2] - out.eta[i1][i2]).lpNorm<Eigen::Infinity>());
        scale = std::max(scale, wgt * next[i1][i2].lpNorm<Eigen::Infinity>());
      }
    out.eta.swap(next);
    out.iterations = it;
    out.final_diff = Nl;
    out.diffs.push_back(Nl);
    if (std::getenv("RANLIN_FRAME_TRACE"))
      std::fprintf(stderr, "iter %d  N = %.6e  scale = %.6e\n", it, Nl, scale);
    if (it >= 2 && prevN > 0.0) out.ratios.push_back(Nl / prevN);
    prevN = Nl;
    if (Nl <= cfg.tol * std::max(1.0, scale)) return out;
    if (out.ratios.size() >= 4) {
      bool all_bad = true;
      for (std::size_t r = out.ratios.size() - 4; r < out.ratios.size(); ++r)
        all_bad = all_bad && out.ratios[r] > 1.0;
      if (all_bad)
        throw NumericError(
            "solve_stable_frame: recursion not contracting (shrink the radius)");
    }
  }
  throw NumericError("solve_stable_frame: iteration limit exhausted");
}

Vec FrameAssembly::vector_at(long n, const Vec& x) const {
  const Vec hat = chain->Binv(n) * (x - chain->point(n));
  const Vec bar = chart->forward(n, hat);
  const double w = bar[leaf->coord()];
  const Vec vb = sol->vbar(n, w);
  const Mat DN = chart->forward_jac(n, hat);
  return chain->B(n) * DN.partialPivLu().solve(vb);
}

StableFrame canonical_frame(const MapCocycle& coc, const BlockStructure& bs,
                            const Vec& x, LpConfig cfg) {
  Leaf leaf(coc, bs, x, LpSide::stable(bs), cfg);
  const Vec ys = extract(x, leaf.graph_coords());
  const Mat D = leaf.chart_derivative(ys);
  StableFrame out;
  out.coords = leaf.graph_coords();
  const int m = static_cast<int>(out.coords.size());
  Mat Z(x.size(), m);
  for (int c = 0; c < m; ++c) {
    Vec z = D.col(c);
    const double nz = z.lpNorm<Eigen::Infinity>();
    if (nz < 1e-12) throw NumericError("canonical_frame: degenerate frame vector");
    z /= nz;
    Z.col(c) = z;
    out.zeta.push_back(z);
  }
  out.gram_det = (Z.transpose() * Z).determinant();
  if (std::abs(out.gram_det) < 1e-8)
    throw NumericError("canonical_frame: frame fails to span (Gram degeneracy)");
  return out;
}

Vec reconstruct_zeta(const std::vector<Vec>& v_frame,
                     const std::vector<int>& stable_coords, int which, int d) {
  const int m = static_cast<int>(stable_coords.size());
  Mat Delta = Mat::Zero(d, d);
  std::vector<Vec> delta(m);
  for (int k = 0; k < m; ++k) {
    Vec e = Vec::Zero(d);
    e[stable_coords[k]] = 1.0;
    delta[k] = v_frame[k] - e;
    Delta.col(stable_coords[k]) = delta[k];
  }
  const Vec c = (Mat::Identity(d, d) + Delta).partialPivLu().solve(delta[which]);
  Vec e = Vec::Zero(d);
  e[stable_coords[which]] = 1.0;
  Vec zt = e + delta[which];
  for (int k = 0; k < m; ++k) zt -= c[stable_coords[k]] * v_frame[k];
  const double denom = zt[stable_coords[which]];
  if (std::abs(denom) < 1e-8)
    throw NumericError("reconstruct_zeta: degenerate normalization");
  return zt / denom;
}

}  // namespace ranlin
