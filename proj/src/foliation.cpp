#include "ranlin/foliation.hpp"

#include <cmath>

namespace ranlin {

namespace {

std::vector<double> key_of(const Vec& y) {
  return std::vector<double>(y.data(), y.data() + y.size());
}

}  // namespace

LpSolver::LpSolver(const MapCocycle& coc, const BlockStructure& bs, Vec base,
                   LpSide side, LpConfig cfg)
    : coc_(&coc), bs_(bs), base_(std::move(base)), side_(side), cfg_(cfg) {
  const int p = bs_.p();
  if (side_.split < 0 || side_.split + 1 >= p)
    throw PreconditionError("LpSolver: split out of range");
  plus_ = bs_.coords_leq(side_.split);
  minus_ = bs_.coords_geq(side_.split + 1);
  gcoords_ = (side_.type == LpSide::forward) ? minus_ : plus_;
  ocoords_ = (side_.type == LpSide::forward) ? plus_ : minus_;

  const double l_hi = bs_.lambda[side_.split];
  const double l_lo = bs_.lambda[side_.split + 1];
  weight_ = std::isnan(cfg_.weight) ? 0.5 * (l_hi + l_lo) : cfg_.weight;
  if (!(weight_ > l_lo + 3.0 * cfg_.eps && weight_ < l_hi - 3.0 * cfg_.eps))
    throw PreconditionError("LpSolver: weight outside the admissible window");

  if (cfg_.horizon > 0) {
    N_ = cfg_.horizon;
  } else {
    const double r = std::min(l_hi - weight_, weight_ - l_lo);
    N_ = std::lround(std::ceil(-std::log(cfg_.tol) / r)) + 5;
    N_ = std::max<long>(20, std::min<long>(400, N_));
  }
  // geometric tail certificate for the truncation
  const double tail_rate = (side_.type == LpSide::forward)
                               ? (l_hi - weight_)
                               : (weight_ - l_lo);
  if (std::exp(-tail_rate * static_cast<double>(N_)) > std::sqrt(cfg_.tol))
    throw PreconditionError("LpSolver: horizon too small for the tail bound");

  zlo_ = (side_.type == LpSide::forward) ? 0 : -N_;
  const long zhi = (side_.type == LpSide::forward) ? N_ : 0;
  zpts_.resize(static_cast<std::size_t>(zhi - zlo_ + 1));
  zpts_[static_cast<std::size_t>(-zlo_)] = base_;
  for (long k = 1; k <= zhi; ++k)
    zpts_[static_cast<std::size_t>(k - zlo_)] =
        coc_->eval(k - 1, zpts_[static_cast<std::size_t>(k - 1 - zlo_)]);
  for (long k = -1; k >= zlo_; --k)
    zpts_[static_cast<std::size_t>(k - zlo_)] =
        coc_->invert(k, zpts_[static_cast<std::size_t>(k + 1 - zlo_)]);

  fz_.resize(zpts_.size());
  for (long k = zlo_; k <= zhi; ++k)
    fz_[static_cast<std::size_t>(k - zlo_)] =
        coc_->nonlinear(k, zpts_[static_cast<std::size_t>(k - zlo_)]);

  auto step = [this](long n) { return coc_->linear(n); };
  Pplus_ = std::make_unique<BlockProducts>(step, plus_, -(N_ + 1), N_ + 1);
  Pminus_ = std::make_unique<BlockProducts>(step, minus_, -(N_ + 1), N_ + 1);
}

const Vec& LpSolver::orbit_point(long n) const {
  return zpts_.at(static_cast<std::size_t>(n - zlo_));
}

LpSolution LpSolver::solve(const Vec& y_compact) const {
  const int d = coc_->dim();
  const long lo = (side_.type == LpSide::forward) ? 0 : -N_;
  const long hi = (side_.type == LpSide::forward) ? N_ : 0;
  const Vec yhat = y_compact - extract(base_, gcoords_);
  const BlockProducts& PG = (side_.type == LpSide::forward) ? *Pminus_ : *Pplus_;

  LpSolution sol;
  sol.lo = lo;
  sol.hi = hi;
  sol.weight = weight_;
  sol.seq.resize(static_cast<std::size_t>(hi - lo + 1));
  for (long n = lo; n <= hi; ++n)
    sol.seq[static_cast<std::size_t>(n - lo)] =
        insert(PG.cumulative(n) * yhat, gcoords_, d);

  auto weighted_sup = [&](const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double m = 0.0;
    for (long n = lo; n <= hi; ++n) {
      const std::size_t i = static_cast<std::size_t>(n - lo);
      m = std::max(m, std::exp(-weight_ * static_cast<double>(n)) *
                          (a[i] - b[i]).lpNorm<Eigen::Infinity>());
    }
    return m;
  };

  std::vector<Vec> xi_p(sol.seq.size()), xi_m(sol.seq.size());
  std::vector<Vec> next(sol.seq.size());
  double prev_diff = std::numeric_limits<double>::infinity();
  int grow = 0;
  for (int it = 1;; ++it) {
    if (it > cfg_.max_iter)
      throw NumericError("LpSolver: iteration limit exceeded");
    for (long k = lo; k <= hi; ++k) {
      const std::size_t i = static_cast<std::size_t>(k - lo);
      const Vec& z = orbit_point(k);
      const Vec df = coc_->nonlinear(k, z + sol.seq[i]) - fz_[static_cast<std::size_t>(k - zlo_)];
      xi_p[i] = extract(df, plus_);
      xi_m[i] = extract(df, minus_);
    }
    if (side_.type == LpSide::forward) {
      // prefix sums over the minus part, suffix sums over the plus part
      Vec S = Vec::Zero(static_cast<int>(minus_.size()));
      std::vector<Vec> Ssum(sol.seq.size());
      for (long n = lo; n <= hi; ++n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        S += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      Vec T = Vec::Zero(static_cast<int>(plus_.size()));
      std::vector<Vec> Tsum(sol.seq.size());
      for (long n = hi; n >= lo; --n) {
        T += Pplus_->cumulative_inv(n + 1) * xi_p[static_cast<std::size_t>(n - lo)];
        Tsum[static_cast<std::size_t>(n - lo)] = T;
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        next[i] = insert(Pminus_->cumulative(n) * (yhat + Ssum[i]), minus_, d) -
                  insert(Pplus_->cumulative(n) * Tsum[i], plus_, d);
      }
    } else {
      // suffix over the plus part (k in [n, -1]), prefix over the minus part
      Vec S = Vec::Zero(static_cast<int>(plus_.size()));
      std::vector<Vec> Ssum(sol.seq.size());
      for (long n = hi; n >= lo; --n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        if (n > lo)
          S += Pplus_->cumulative_inv(n) *
               xi_p[static_cast<std::size_t>(n - 1 - lo)];
      }
      Vec T = Vec::Zero(static_cast<int>(minus_.size()));
      std::vector<Vec> Tsum(sol.seq.size());
      for (long n = lo; n <= hi; ++n) {
        Tsum[static_cast<std::size_t>(n - lo)] = T;
        T += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        next[i] = insert(Pplus_->cumulative(n) * (yhat - Ssum[i]), plus_, d) +
                  insert(Pminus_->cumulative(n) * Tsum[i], minus_, d);
      }
    }
    const double diff = weighted_sup(next, sol.seq);
    sol.seq.swap(next);
    sol.iterations = it;
    double scale = 1.0;
    for (long n = lo; n <= hi; ++n)
      scale = std::max(scale, std::exp(-weight_ * static_cast<double>(n)) *
                                  sol.at(n).lpNorm<Eigen::Infinity>());
    if (diff <= cfg_.tol * scale) break;
    if (it > 3 && diff > 1.2 * prev_diff) {
      if (++grow >= 3)
        throw NumericError(
            "LpSolver: contraction failure (perturbation too large for the radius)");
    } else {
      grow = 0;
    }
    prev_diff = diff;
  }

  // re-substitution defect of the accepted solution
  {
    for (long k = lo; k <= hi; ++k) {
      const std::size_t i = static_cast<std::size_t>(k - lo);
      const Vec& z = orbit_point(k);
      const Vec df = coc_->nonlinear(k, z + sol.seq[i]) - fz_[static_cast<std::size_t>(k - zlo_)];
      xi_p[i] = extract(df, plus_);
      xi_m[i] = extract(df, minus_);
    }
    std::vector<Vec> rhs(sol.seq.size());
    if (side_.type == LpSide::forward) {
      Vec S = Vec::Zero(static_cast<int>(minus_.size()));
      std::vector<Vec> Ssum(sol.seq.size());
      for (long n = lo; n <= hi; ++n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        S += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      Vec T = Vec::Zero(static_cast<int>(plus_.size()));
      std::vector<Vec> Tsum(sol.seq.size());
      for (long n = hi; n >= lo; --n) {
        T += Pplus_->cumulative_inv(n + 1) * xi_p[static_cast<std::size_t>(n - lo)];
        Tsum[static_cast<std::size_t>(n - lo)] = T;
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        rhs[i] = insert(Pminus_->cumulative(n) * (yhat + Ssum[i]), minus_, d) -
                 insert(Pplus_->cumulative(n) * Tsum[i], plus_, d);
      }
    } else {
      Vec S = Vec::Zero(static_cast<int>(plus_.size()));
      std::vector<Vec> Ssum(sol.seq.size());
      for (long n = hi; n >= lo; --n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        if (n > lo)
          S += Pplus_->cumulative_inv(n) * xi_p[static_cast<std::size_t>(n - 1 - lo)];
      }
      Vec T = Vec::Zero(static_cast<int>(minus_.size()));
      std::vector<Vec> Tsum(sol.seq.size());
      for (long n = lo; n <= hi; ++n) {
        Tsum[static_cast<std::size_t>(n - lo)] = T;
        T += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        rhs[i] = insert(Pplus_->cumulative(n) * (yhat - Ssum[i]), plus_, d) +
                 insert(Pminus_->cumulative(n) * Tsum[i], minus_, d);
      }
    }
    sol.residual = weighted_sup(rhs, sol.seq);
  }
  return sol;
}

std::vector<Mat> LpSolver::solve_derivative(const LpSolution& sol) const {
  const int d = coc_->dim();
  const int m = static_cast<int>(gcoords_.size());
  const long lo = sol.lo, hi = sol.hi;
  const BlockProducts& PG = (side_.type == LpSide::forward) ? *Pminus_ : *Pplus_;

  auto embed_rows = [&](const Mat& compact, const std::vector<int>& idx) {
    Mat out = Mat::Zero(d, compact.cols());
    for (int r = 0; r < static_cast<int>(idx.size()); ++r)
      out.row(idx[r]) = compact.row(r);
    return out;
  };
  auto extract_rows = [&](const Mat& full, const std::vector<int>& idx) {
    Mat out(static_cast<int>(idx.size()), full.cols());
    for (int r = 0; r < static_cast<int>(idx.size()); ++r)
      out.row(r) = full.row(idx[r]);
    return out;
  };

  std::vector<Mat> D(sol.seq.size());
  for (long n = lo; n <= hi; ++n)
    D[static_cast<std::size_t>(n - lo)] = embed_rows(PG.cumulative(n), gcoords_);

  std::vector<Mat> jp(sol.seq.size());
  for (long k = lo; k <= hi; ++k)
    jp[static_cast<std::size_t>(k - lo)] =
        coc_->nonlinear_jac(k, orbit_point(k) + sol.at(k));

  for (int it = 0; it < cfg_.max_iter; ++it) {
    std::vector<Mat> next(D.size());
    std::vector<Mat> xi_p(D.size()), xi_m(D.size());
    for (long k = lo; k <= hi; ++k) {
      const std::size_t i = static_cast<std::size_t>(k - lo);
      const Mat dxi = jp[i] * D[i];
      xi_p[i] = extract_rows(dxi, plus_);
      xi_m[i] = extract_rows(dxi, minus_);
    }
    if (side_.type == LpSide::forward) {
      Mat S = Mat::Zero(static_cast<int>(minus_.size()), m);
      std::vector<Mat> Ssum(D.size());
      for (long n = lo; n <= hi; ++n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        S += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      Mat T = Mat::Zero(static_cast<int>(plus_.size()), m);
      std::vector<Mat> Tsum(D.size());
      for (long n = hi; n >= lo; --n) {
        T += Pplus_->cumulative_inv(n + 1) * xi_p[static_cast<std::size_t>(n - lo)];
        Tsum[static_cast<std::size_t>(n - lo)] = T;
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        next[i] = embed_rows(PG.cumulative(n), gcoords_) +
                  embed_rows(Pminus_->cumulative(n) * Ssum[i], minus_) -
                  embed_rows(Pplus_->cumulative(n) * Tsum[i], plus_);
      }
    } else {
      Mat S = Mat::Zero(static_cast<int>(plus_.size()), m);
      std::vector<Mat> Ssum(D.size());
      for (long n = hi; n >= lo; --n) {
        Ssum[static_cast<std::size_t>(n - lo)] = S;
        if (n > lo)
          S += Pplus_->cumulative_inv(n) * xi_p[static_cast<std::size_t>(n - 1 - lo)];
      }
      Mat T = Mat::Zero(static_cast<int>(minus_.size()), m);
      std::vector<Mat> Tsum(D.size());
      for (long n = lo; n <= hi; ++n) {
        Tsum[static_cast<std::size_t>(n - lo)] = T;
        T += Pminus_->cumulative_inv(n + 1) * xi_m[static_cast<std::size_t>(n - lo)];
      }
      for (long n = lo; n <= hi; ++n) {
        const std::size_t i = static_cast<std::size_t>(n - lo);
        next[i] = embed_rows(Pplus_->cumulative(n), gcoords_) -
                  embed_rows(Pplus_->cumulative(n) * Ssum[i], plus_) +
                  embed_rows(Pminus_->cumulative(n) * Tsum[i], minus_);
      }
    }
    double diff = 0.0;
    for (long n = lo; n <= hi; ++n) {
      const std::size_t i = static_cast<std::size_t>(n - lo);
      diff = std::max(diff, std::exp(-weight_ * static_cast<double>(n)) *
                                (next[i] - D[i]).cwiseAbs().maxCoeff());
    }
    D.swap(next);
    if (diff <= cfg_.tol) return D;
  }
  throw NumericError("LpSolver: derivative iteration did not converge");
}

Leaf::Leaf(const MapCocycle& coc, const BlockStructure& bs, Vec base, LpSide side,
           LpConfig cfg)
    : solver_(coc, bs, std::move(base), side, cfg) {}

const LpSolution& Leaf::solution(const Vec& y_compact) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto key = key_of(y_compact);
  auto it = memo_.find(key);
  if (it == memo_.end()) it = memo_.emplace(key, solver_.solve(y_compact)).first;
  return it->second;
}

const std::vector<Mat>& Leaf::dseq(const Vec& y_compact) const {
  const LpSolution& sol = solution(y_compact);
  std::lock_guard<std::mutex> lock(mu_);
  auto key = key_of(y_compact);
  auto it = dmemo_.find(key);
  if (it == dmemo_.end())
    it = dmemo_.emplace(key, solver_.solve_derivative(sol)).first;
  return it->second;
}

Vec Leaf::chart(const Vec& y_compact) const {
  return solver_.base() + solution(y_compact).value0();
}

Mat Leaf::graph_derivative(const Vec& y_compact) const {
  const std::vector<Mat>& D = dseq(y_compact);
  return D[static_cast<std::size_t>(-solution(y_compact).lo)];
}

Mat Leaf::chart_derivative(const Vec& y_compact) const {
  return graph_derivative(y_compact);
}

Vec Leaf::base_graph() const { return extract(solver_.base(), solver_.graph_coords()); }

Leaf leaf_chart(const MapCocycle& coc, const BlockStructure& bs, const Vec& x,
                LpSide side, LpConfig cfg) {
  return Leaf(coc, bs, x, side, cfg);
}

IntermediateLeaf::IntermediateLeaf(const MapCocycle& coc, const BlockStructure& bs,
                                   Vec base, int block, LpConfig cfg)
    : coc_(&coc), bs_(bs), base_(std::move(base)), block_(block) {
  if (block_ < 0 || block_ >= bs_.p())
    throw PreconditionError("IntermediateLeaf: block out of range");
  jcoords_ = bs_.coords[block_];
  if (block_ < bs_.p() - 1)
    up_.emplace(coc, bs_, base_, LpSide::pseudo_unstable(block_), cfg);
  if (block_ > 0)
    down_.emplace(coc, bs_, base_, LpSide::pseudo_stable(block_ - 1), cfg);
}

std::pair<Vec, Mat> IntermediateLeaf::solve_point(const Vec& yj) const {
  const int d = coc_->dim();
  const int dj = static_cast<int>(jcoords_.size());
  if (!down_) {
    // first block: the leaf is the pseudo-unstable chart itself
    const Vec z = up_->chart(yj);
    return {z, up_->chart_derivative(yj)};
  }
  if (!up_) {
    const Vec z = down_->chart(yj);
    return {z, down_->chart_derivative(yj)};
  }
  const std::vector<int> up_miss = bs_.coords_geq(block_ + 1);
  const std::vector<int> down_miss = bs_.coords_leq(block_ - 1);

  Vec z = base_;
  for (int i = 0; i < dj; ++i) z[jcoords_[i]] = yj[i];
  Mat J(d, d);
  for (int it = 0; it < 40; ++it) {
    const Vec yu = extract(z, up_->graph_coords());
    const Vec yd = extract(z, down_->graph_coords());
    const Vec ru = extract(z - up_->chart(yu), up_miss);
    const Vec rd = extract(z - down_->chart(yd), down_miss);
    Vec r(d);
    int row = 0;
    for (int i = 0; i < dj; ++i) r[row++] = z[jcoords_[i]] - yj[i];
    for (int i = 0; i < static_cast<int>(up_miss.size()); ++i) r[row++] = ru[i];
    for (int i = 0; i < static_cast<int>(down_miss.size()); ++i) r[row++] = rd[i];

    // Jacobian rows
    J.setZero();
    row = 0;
    for (int i = 0; i < dj; ++i) J(row++, jcoords_[i]) = 1.0;
    const Mat Du = up_->chart_derivative(yu);
    for (int i = 0; i < static_cast<int>(up_miss.size()); ++i, ++row) {
      J(row, up_miss[i]) = 1.0;
      for (int c = 0; c < static_cast<int>(up_->graph_coords().size()); ++c)
        J(row, up_->graph_coords()[c]) -= Du(up_miss[i], c);
    }
    const Mat Dd = down_->chart_derivative(yd);
    for (int i = 0; i < static_cast<int>(down_miss.size()); ++i, ++row) {
      J(row, down_miss[i]) = 1.0;
      for (int c = 0; c < static_cast<int>(down_->graph_coords().size()); ++c)
        J(row, down_->graph_coords()[c]) -= Dd(down_miss[i], c);
    }

    if (r.lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) {
      Mat rhs = Mat::Zero(d, dj);
      for (int i = 0; i < dj; ++i) rhs(i, i) = 1.0;
      return {z, J.partialPivLu().solve(rhs)};
    }
    const Vec step = J.partialPivLu().solve(r);
    if (!step.allFinite())
      throw NumericError("intermediate_leaf: transversality lost");
    z -= step;
  }
  throw NumericError("intermediate_leaf: intersection Newton failed");
}

Vec IntermediateLeaf::chart(const Vec& yj_compact) const {
  return solve_point(yj_compact).first;
}

Mat IntermediateLeaf::chart_derivative(const Vec& yj_compact) const {
  return solve_point(yj_compact).second;
}

double invariance_residual(const Leaf& leaf, const MapCocycle& coc,
                           const BlockStructure& bs, LpSide side, LpConfig cfg,
                           int samples, double sample_radius) {
  const Vec base_img = coc.eval(0, leaf.base());
  ShiftedCocycle shifted(coc, 1);
  Leaf img(shifted, bs, base_img, side, cfg);
  const int m = static_cast<int>(leaf.graph_coords().size());
  const Vec yb = leaf.base_graph();
  double worst = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const Vec y = yb + halton_point(i, m, sample_radius);
    const Vec z = leaf.chart(y);
    const Vec w = coc.eval(0, z);
    const Vec wy = extract(w, img.graph_coords());
    worst = std::max(worst, (w - img.chart(wy)).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace ranlin
