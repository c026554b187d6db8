#include "ranlin/normalform.hpp"

#include <cmath>

#include "ranlin/cutoff.hpp"

namespace ranlin {

HatCocycle::HatCocycle(const MapCocycle& base, FrameChain chain)
    : base_(&base), chain_(std::move(chain)) {}

int HatCocycle::dim() const { return static_cast<int>(chain_.basis.front().rows()); }

Mat HatCocycle::linear(long n) const { return chain_.Lbar(n); }

Vec HatCocycle::eval(long n, const Vec& x) const {
  const Vec w = base_->eval(n, chain_.B(n) * x + chain_.point(n));
  return chain_.Binv(n + 1) * (w - chain_.point(n + 1));
}

Mat HatCocycle::jac(long n, const Vec& x) const {
  return chain_.Binv(n + 1) * base_->jac(n, chain_.B(n) * x + chain_.point(n)) *
         chain_.B(n);
}

Vec HatCocycle::invert(long n, const Vec& x) const {
  const Vec w = base_->invert(n, chain_.B(n + 1) * x + chain_.point(n + 1));
  return chain_.Binv(n) * (w - chain_.point(n));
}

SymTensor HatCocycle::hessian0(long n) const {
  // This needs the base cocycle to expose Hessians; only the system cocycle
  // does.
  const auto* sc = dynamic_cast<const SystemCocycle*>(base_);
  if (!sc) throw PreconditionError("HatCocycle::hessian0: base has no Hessian");
  const SymTensor H =
      sc->system().hessian(sc->orbit().state(n), chain_.point(n));
  const int d = dim();
  const Mat& B = chain_.B(n);
  const Mat& Pn1 = chain_.Binv(n + 1);
  SymTensor out(d, d);
  for (int o = 0; o < d; ++o) {
    Mat acc = Mat::Zero(d, d);
    for (int w = 0; w < d; ++w) acc += Pn1(o, w) * H.comp[w];
    out.comp[o] = B.transpose() * acc * B;
  }
  return out;
}

BlockStructure hat_blocks(const Spectrum& spec) {
  BlockStructure b;
  b.lambda = spec.lambda;
  b.dims = spec.mult;
  b.tau = spec.tau;
  b.d = spec.d;
  int c = 0;
  for (int j = 0; j < spec.p(); ++j) {
    std::vector<int> idx(spec.mult[j]);
    for (int k = 0; k < spec.mult[j]; ++k) idx[k] = c++;
    b.coords.push_back(idx);
  }
  return b;
}

namespace {

// one bilinear block tensor: t[o](a,b), o in block j, a in block i, b in k
using BlockTensor = std::vector<Mat>;

double bt_norm(const BlockTensor& t) {
  double s = 0.0;
  for (const Mat& m : t) s += m.squaredNorm();
  return std::sqrt(s);
}

// compose: out[o](a,b) = sum_{o'} Aj(o,o') [ Ai^T c[o'] Ak ](a,b)
BlockTensor bt_compose(const Mat& Aj, const BlockTensor& c, const Mat& Ai,
                       const Mat& Ak) {
  const int dj = static_cast<int>(Aj.rows());
  BlockTensor out(dj);
  for (int o = 0; o < dj; ++o) {
    Mat acc = Mat::Zero(c.front().rows(), c.front().cols());
    for (int w = 0; w < static_cast<int>(c.size()); ++w) acc += Aj(o, w) * c[w];
    out[o] = Ai.transpose() * acc * Ak;
  }
  return out;
}

}  // namespace

NormalFormCoeffs homological_coeffs(const HatCocycle& hat, const Spectrum& spec,
                                    double tol, long lo, long hi,
                                    long series_window) {
  const BlockStructure bs = hat_blocks(spec);
  const int p = spec.p();
  const int tau = spec.tau;
  const int d = spec.d;
  const long W = series_window;
  if (hat.lo() > lo - W || hat.hi() < hi + W + 1)
    throw PreconditionError("homological_coeffs: frame window too small");

  // resonance precondition
  for (int i = 0; i < tau; ++i)
    for (int k = tau; k < p; ++k)
      for (int j = 0; j < p; ++j)
        if (std::abs(spec.lambda[i] + spec.lambda[k] - spec.lambda[j]) <= 1e-9)
          throw PreconditionError("homological_coeffs: resonant triple present");

  // block products of the straightened linear part over the full window
  auto step = [&hat](long n) { return hat.linear(n); };
  std::vector<BlockProducts> P;
  P.reserve(p);
  for (int b = 0; b < p; ++b)
    P.emplace_back(step, bs.coords[b], lo - W, hi + W);

  // source tensors c_{i,kappa,j}(n) = -1/2 d^2_{x_i x_kappa} (pi_j Fhat)(n, 0)
  std::vector<SymTensor> H(static_cast<std::size_t>(hi + W - (lo - W) + 1));
  for (long n = lo - W; n <= hi + W - 1; ++n)
    H[static_cast<std::size_t>(n - (lo - W))] = hat.hessian0(n);
  auto source = [&](long n, int i, int k, int j) {
    const SymTensor& Hn = H.at(static_cast<std::size_t>(n - (lo - W)));
    BlockTensor c(spec.mult[j]);
    for (int o = 0; o < spec.mult[j]; ++o) {
      c[o] = Mat(spec.mult[i], spec.mult[k]);
      for (int a = 0; a < spec.mult[i]; ++a)
        for (int b = 0; b < spec.mult[k]; ++b)
          c[o](a, b) = -0.5 * Hn.comp[bs.coords[j][o]](bs.coords[i][a], bs.coords[k][b]);
    }
    return c;
  };

  NormalFormCoeffs out;
  out.lo = lo;
  out.hi = hi;
  out.a.assign(static_cast<std::size_t>(hi - lo + 1), SymTensor(d, d));

  auto solve_triple = [&](int i, int k, int j, long n, TripleInfo* info) {
    const double gap = spec.lambda[i] + spec.lambda[k] - spec.lambda[j];
    const int branch = (gap > 0.0) ? +1 : -1;
    BlockTensor acc(spec.mult[j], Mat::Zero(spec.mult[i], spec.mult[k]));
    double last = 0.0;
    long used = 0;
    int growing = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (long m = 1; m <= 200; ++m) {
      if (n - m < lo - W || n + m > hi + W)
        throw NumericError("homological_coeffs: series window exhausted");
      BlockTensor term;
      if (branch > 0) {
        const Mat Aj = P[j].cumulative(n) * P[j].cumulative_inv(n - m + 1);
        const Mat Ai = P[i].cumulative(n - m) * P[i].cumulative_inv(n);
        const Mat Ak = P[k].cumulative(n - m) * P[k].cumulative_inv(n);
        term = bt_compose(Aj, source(n - m, i, k, j), Ai, Ak);
      } else {
        const Mat Aj = P[j].cumulative(n) * P[j].cumulative_inv(n + m);
        const Mat Ai = P[i].cumulative(n + m - 1) * P[i].cumulative_inv(n);
        const Mat Ak = P[k].cumulative(n + m - 1) * P[k].cumulative_inv(n);
        term = bt_compose(Aj, source(n + m - 1, i, k, j), Ai, Ak);
        for (Mat& t : term) t = -t;
      }
      const double tn = bt_norm(term);
      for (int o = 0; o < spec.mult[j]; ++o) acc[o] += term[o];
      if (info && info->term_norms.size() < 200) info->term_norms.push_back(tn);
      last = tn;
      used = m;
      if (tn < 1e-14 || tn < 1e-12 * std::max(1.0, bt_norm(acc))) break;
      if (m > 5 && tn > prev * 1.05) {
        if (++growing >= 5)
          throw NumericError("homological_coeffs: series terms grow (branch check failed)");
      } else {
        growing = 0;
      }
      prev = tn;
      if (m == 200 && tn > 10.0 * tol)
        throw NumericError("homological_coeffs: term cap reached before tolerance");
    }
    if (info) {
      info->i = i;
      info->kappa = k;
      info->j = j;
      info->branch = branch;
      info->k_star = used;
      info->tail = last;
      info->norm = bt_norm(acc);
    }
    return acc;
  };

  for (int i = 0; i < tau; ++i)
    for (int k = tau; k < p; ++k)
      for (int j = 0; j < p; ++j) {
        TripleInfo info;
        std::vector<BlockTensor> field(static_cast<std::size_t>(hi - lo + 1));
        for (long n = lo; n <= hi; ++n)
          field[static_cast<std::size_t>(n - lo)] =
              solve_triple(i, k, j, n, (n == 0) ? &info : nullptr);

        // homological defect at the anchor (needs n = 0 and n = 1 in range)
        if (lo <= 0 && hi >= 1) {
          const Mat L1i = P[i].cumulative(1) * P[i].cumulative_inv(0);
          const Mat L1k = P[k].cumulative(1) * P[k].cumulative_inv(0);
          const Mat L1j = P[j].cumulative(1) * P[j].cumulative_inv(0);
          const BlockTensor& a0 = field[static_cast<std::size_t>(-lo)];
          const BlockTensor& a1 = field[static_cast<std::size_t>(1 - lo)];
          const BlockTensor c0 = source(0, i, k, j);
          const BlockTensor lhs1 =
              bt_compose(Mat::Identity(spec.mult[j], spec.mult[j]), a1, L1i, L1k);
          BlockTensor defect(spec.mult[j]);
          for (int o = 0; o < spec.mult[j]; ++o) {
            Mat la = Mat::Zero(spec.mult[i], spec.mult[k]);
            for (int w = 0; w < spec.mult[j]; ++w) la += L1j(o, w) * a0[w];
            defect[o] = lhs1[o] - la - c0[o];
          }
          info.residual = bt_norm(defect);
        }
        out.triples.push_back(info);

        // fold into the symmetric bilinear field
        for (long n = lo; n <= hi; ++n) {
          SymTensor& A = out.a[static_cast<std::size_t>(n - lo)];
          const BlockTensor& t = field[static_cast<std::size_t>(n - lo)];
          for (int o = 0; o < spec.mult[j]; ++o)
            for (int a = 0; a < spec.mult[i]; ++a)
              for (int b = 0; b < spec.mult[k]; ++b) {
                A.comp[bs.coords[j][o]](bs.coords[i][a], bs.coords[k][b]) += t[o](a, b);
                A.comp[bs.coords[j][o]](bs.coords[k][b], bs.coords[i][a]) += t[o](a, b);
              }
        }
      }
  return out;
}

NormalFormChart::NormalFormChart(std::shared_ptr<const NormalFormCoeffs> coeffs,
                                 double rho_tilde)
    : coeffs_(std::move(coeffs)), rho_tilde_(rho_tilde) {}

Vec NormalFormChart::forward(long n, const Vec& x) const {
  const CutoffSpec cs{rho_tilde_};
  const double u = cutoff_value(cs, x);
  if (u == 0.0) return x;
  const SymTensor& a = coeffs_->at(n);
  return x + u * a.apply(x, x);
}

Mat NormalFormChart::forward_jac(long n, const Vec& x) const {
  const int d = static_cast<int>(x.size());
  const CutoffSpec cs{rho_tilde_};
  const double u = cutoff_value(cs, x);
  Mat J = Mat::Identity(d, d);
  if (u == 0.0) return J;
  const SymTensor& a = coeffs_->at(n);
  const Vec q = a.apply(x, x);
  const Vec du = cutoff_gradient(cs, x);
  for (int o = 0; o < d; ++o) {
    J.row(o) += u * 2.0 * (a.comp[o] * x).transpose();
    J.row(o) += q[o] * du.transpose();
  }
  return J;
}

Vec NormalFormChart::inverse(long n, const Vec& x, double tol) const {
  Vec y = x;
  for (int it = 0; it < 100; ++it) {
    const Vec r = forward(n, y) - x;
    if (r.lpNorm<Eigen::Infinity>() <= tol) return y;
    y -= forward_jac(n, y).partialPivLu().solve(r);
  }
  throw NumericError("NormalFormChart: inverse Newton failed near the cut-off boundary");
}

Vec BarCocycle::eval(long n, const Vec& x) const {
  const Vec y = chart_.inverse(n, x);
  return chart_.forward(n + 1, hat_->eval(n, y));
}

Mat BarCocycle::jac(long n, const Vec& x) const {
  const Vec y = chart_.inverse(n, x);
  const Vec w = hat_->eval(n, y);
  const Mat DNy = chart_.forward_jac(n, y);
  return chart_.forward_jac(n + 1, w) * hat_->jac(n, y) *
         DNy.partialPivLu().inverse();
}

Vec BarCocycle::invert(long n, const Vec& x) const {
  const Vec w = chart_.inverse(n + 1, x);
  const Vec y = hat_->invert(n, w);
  return chart_.forward(n, y);
}

double normal_form_radius(const HatCocycle& hat, const NormalFormCoeffs& coeffs,
                          double rho_system) {
  double a_max = 0.0;
  for (const SymTensor& a : coeffs.a) a_max = std::max(a_max, a.norm());
  if (a_max < 1e-14) return rho_system;

  // measured stand-ins: cut-off slope constant on a 1-d scan, frame deviation
  double cu_meas = 0.0;
  {
    const CutoffSpec cs{1.0};
    for (int i = 0; i <= 400; ++i) {
      Vec x(1);
      x[0] = i / 400.0;
      cu_meas = std::max(cu_meas, cutoff_gradient(cs, x).lpNorm<Eigen::Infinity>());
    }
  }
  double K = 1.0;
  for (const Mat& B : hat.chain().basis) {
    Eigen::JacobiSVD<Mat> svd(B);
    K = std::max(K, svd.singularValues()(0) /
                        svd.singularValues()(B.cols() - 1));
  }
  double delta = 0.0;
  for (long n = hat.lo(); n < hat.hi(); ++n) {
    Vec x = Vec::Zero(hat.dim());
    delta = std::max(delta, (hat.jac(n, x) - hat.linear(n)).norm());
  }
  delta = std::max(delta, 0.25);  // keep the chart usable for trivial systems
  const double r = delta / ((3.0 * cu_meas + 1.0) * a_max * K * K * K * K);
  return std::min(rho_system, std::max(1e-3 * rho_system, r));
}

double mixed_second_derivative(const MapCocycle& coc, const BlockStructure& bs,
                               long n, double h) {
  const int d = coc.dim();
  double worst = 0.0;
  for (int a : bs.coords_unstable())
    for (int b : bs.coords_stable()) {
      Vec pp = Vec::Zero(d), pm = Vec::Zero(d), mp = Vec::Zero(d), mm = Vec::Zero(d);
      pp[a] = h;  pp[b] = h;
      pm[a] = h;  pm[b] = -h;
      mp[a] = -h; mp[b] = h;
      mm[a] = -h; mm[b] = -h;
      const Vec fd = (coc.eval(n, pp) - coc.eval(n, pm) - coc.eval(n, mp) +
                      coc.eval(n, mm)) /
                     (4.0 * h * h);
      worst = std::max(worst, fd.lpNorm<Eigen::Infinity>());
    }
  return worst;
}

}  // namespace ranlin
