#include <doctest.h>

#include <memory>
#include <random>

#include "oracles.hpp"
#include "ranlin/cohomology.hpp"
#include "ranlin/io.hpp"
#include "ranlin/linearize.hpp"
#include "ranlin/normalform.hpp"
#include "ranlin/spectrum.hpp"

using namespace ranlin;

namespace {

RandomMapSystem load(const char* name) {
  return parse_system_file(std::string(RANLIN_DATA_DIR) + "/" + name);
}

// scalar constant-step products
std::shared_ptr<BlockProducts> scalar_products(double r, long w) {
  Mat m(1, 1);
  m << r;
  return std::make_shared<BlockProducts>([m](long) { return m; },
                                         std::vector<int>{0}, -w, w);
}

// The full frame pipeline at the fixed-point anchor of an identity-driving
// system: frames -> hat -> normal form -> bar -> leaf -> straightening.
struct FramePipeline {
  RandomMapSystem sys;
  Spectrum spec;
  ConstantsBudget budget;
  OmegaOrbit orb;
  std::unique_ptr<SystemCocycle> coc;
  std::unique_ptr<HatCocycle> hat;
  std::shared_ptr<NormalFormCoeffs> coeffs;
  std::unique_ptr<NormalFormChart> chart;
  std::unique_ptr<BarCocycle> bar;
  BlockStructure hbs;
  std::unique_ptr<SampledLeafFamily> leaf;
  std::shared_ptr<BlockProducts> Pi;
  std::unique_ptr<BlockStraightening> straight;

  FramePipeline(const char* name, int block_i, long W, double leaf_radius) {
    sys = load(name);
    spec = lyapunov_exponents(sys, sys.driving, 5000);
    budget = constants_budget(spec, sys.alpha);
    sys = sys.extend();
    const long chain_w = W + 220;
    orb = orbit(sys.driving, chain_w + 400);
    coc = std::make_unique<SystemCocycle>(sys, orb);
    FrameChain chain =
        block_diagonalize(sys, orb, Vec::Zero(sys.d), spec, -chain_w, chain_w, 60);
    hat = std::make_unique<HatCocycle>(*coc, std::move(chain));
    coeffs = std::make_shared<NormalFormCoeffs>(
        homological_coeffs(*hat, spec, 1e-12, -(W + 90), W + 90, 120));
    chart = std::make_unique<NormalFormChart>(coeffs,
                                              normal_form_radius(*hat, *coeffs, sys.rho));
    bar = std::make_unique<BarCocycle>(*hat, *chart);
    hbs = hat_blocks(spec);
    LpConfig lp;
    lp.eps = budget.eps;
    leaf = std::make_unique<SampledLeafFamily>(*bar, hbs, block_i, lp, -(W + 85),
                                               W + 85, leaf_radius, 257, true);
    auto step = [this](long n) { return bar->linear(n); };
    Pi = std::make_shared<BlockProducts>(step, hbs.coords[block_i], -(W + 220),
                                         W + 220);
    straight = std::make_unique<BlockStraightening>(*bar, *leaf, Pi, -(W + 85),
                                                    W + 85);
  }
};

}  // namespace

TEST_SUITE_BEGIN("cohomology");

TEST_CASE("lyapunov norm: geometric series oracle for constant blocks") {
  const double lam = std::log(2.0);
  const double eps = 3e-3;
  Mat step(1, 1);
  step << std::exp(lam);
  LyapunovNorm norm([step](long) { return step; }, lam, eps);
  Vec x(1);
  x << 0.7;
  const double expect = 0.7 * (1.0 + std::exp(-eps)) / (1.0 - std::exp(-eps));
  CHECK(norm(0, x) == doctest::Approx(expect).epsilon(1e-11));
  CHECK(norm(5, x) == doctest::Approx(expect).epsilon(1e-11));

  Vec zero = Vec::Zero(1);
  CHECK(norm(0, zero) == 0.0);
}

TEST_CASE("lyapunov norm: sandwich and one-step sharp estimates") {
  // a genuinely varying block: rotation-driven scalar modulation around ln2
  const double lam = std::log(2.0);
  const double eps = 0.05;
  auto step = [lam](long n) {
    Mat m(1, 1);
    m << std::exp(lam + 0.02 * std::sin(0.7 * n));
    return m;
  };
  LyapunovNorm norm(step, lam, eps);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    Vec x = oracles::random_point(rng, 1, 2.0);
    if (x.norm() < 1e-6) continue;
    const long n = static_cast<long>(i) - 10;
    const double nx = norm(n, x);
    CHECK(nx >= x.norm());  // the m = 0 term alone
    // one-step sharp estimate
    const double next = norm(n + 1, step(n) * x);
    CHECK(next <= std::exp(lam + eps) * nx * (1.0 + 1e-12));
    CHECK(next >= std::exp(lam - eps) * nx * (1.0 - 1e-12));
  }
}

TEST_CASE("cohomological operator: monomial resolvent oracle, quadratic weight") {
  // deterministic scalars r_i = 2 (unstable), r_j = 1/2, h(x) = x^2:
  // eta(x) = -x^2 / 7, and T eta = h exactly.
  auto Pi = scalar_products(2.0, 500);
  auto Pj = scalar_products(0.5, 500);
  CohomPair P{Pi.get(), Pj.get()};
  SeqFunc h = [](long, const Vec& x) {
    Vec v(1);
    v << x[0] * x[0];
    return v;
  };
  const double rate = std::log(0.5) - 2.0 * std::log(2.0);  // lambda_kappa = 0
  CHECK(choose_branch(rate) == NeumannBranch::backward);
  for (double x : {0.3, -0.4, 1.0, 0.05}) {
    Vec xv(1);
    xv << x;
    const Vec eta = invert_T(P, h, 0, xv, choose_branch(rate), 1e-14);
    CHECK(eta[0] == doctest::Approx(-x * x / 7.0).epsilon(1e-10));
    // check eta(x) - r_j^{-1} eta(r_i x) = x^2 exactly
    SeqFunc eta_fn = [&](long n, const Vec& y) {
      return invert_T(P, h, n, y, NeumannBranch::backward, 1e-14);
    };
    const Vec back = apply_T(P, eta_fn, 0, xv);
    CHECK(back[0] == doctest::Approx(x * x).epsilon(1e-12));
  }
}

TEST_CASE("cohomological operator: monomial resolvent oracle, small weight") {
  // same blocks, h(x) = x^s with s = 0.25: the resolvent gives
  // eta = -(q/(1-q)) x^s with q = r_j r_i^{-s}; T eta = h checks exactly.
  const double s = 0.25;
  auto Pi = scalar_products(2.0, 500);
  auto Pj = scalar_products(0.5, 500);
  CohomPair P{Pi.get(), Pj.get()};
  SeqFunc h = [s](long, const Vec& x) {
    Vec v(1);
    v << std::pow(x[0], s);
    return v;
  };
  const double q = 0.5 * std::pow(2.0, -s);
  const double rate = std::log(0.5) - s * std::log(2.0);
  CHECK(choose_branch(rate) == NeumannBranch::backward);
  for (double x : {0.2, 0.7, 1.3}) {
    Vec xv(1);
    xv << x;
    const Vec eta = invert_T(P, h, 0, xv, choose_branch(rate), 1e-14);
    CHECK(eta[0] == doctest::Approx(-q / (1.0 - q) * std::pow(x, s)).epsilon(1e-10));
    SeqFunc eta_fn = [&](long n, const Vec& y) {
      return invert_T(P, h, n, y, NeumannBranch::backward, 1e-14);
    };
    CHECK(apply_T(P, eta_fn, 0, xv)[0] == doctest::Approx(std::pow(x, s)).epsilon(1e-12));
  }
}

TEST_CASE("T T^{-1} = id in both weighted norms") {
  // weighted residual of T(T^{-1} h) - h measured in the Upsilon norms built
  // from Lyapunov norms, for both the (1+beta)- and the sigma-weight
  const double li = std::log(2.0), lj = -std::log(2.0);
  auto Pi = scalar_products(std::exp(li), 600);
  auto Pj = scalar_products(std::exp(lj), 600);
  CohomPair P{Pi.get(), Pj.get()};
  Mat mi(1, 1), mj(1, 1);
  mi << std::exp(li);
  mj << std::exp(lj);
  const double eps = 4e-3;
  LyapunovNorm Ni([mi](long) { return mi; }, li, eps);
  LyapunovNorm Nj([mj](long) { return mj; }, lj, eps);

  for (double b : {2.0, 0.25}) {
    SeqFunc h = [b](long, const Vec& x) {
      Vec v(1);
      v << std::pow(std::abs(x[0]), b);
      return v;
    };
    SeqFunc eta_fn = [&](long n, const Vec& y) {
      return invert_T(P, h, n, y, NeumannBranch::backward, 1e-14);
    };
    double worst = 0.0;
    for (long n = -6; n <= 6; n += 3)
      for (double x : {0.1, 0.4, 0.9}) {
        Vec xv(1);
        xv << x;
        const Vec r = apply_T(P, eta_fn, n, xv) - h(n, xv);
        Vec rx(1);
        rx << r[0];
        worst = std::max(worst,
                         std::exp(-10.0 * eps * std::abs(double(n))) * Nj(n, rx) /
                             std::pow(Ni(n, xv), b));
      }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("operator inversion reports non-convergence on a resonant pair") {
  // r_i = 2, r_j = 4, weight b = 2: r_j = r_i^2 exactly, neither series falls
  auto Pi = scalar_products(2.0, 500);
  auto Pj = scalar_products(4.0, 500);
  CohomPair P{Pi.get(), Pj.get()};
  SeqFunc h = [](long, const Vec& x) {
    Vec v(1);
    v << x[0] * x[0];
    return v;
  };
  Vec xv(1);
  xv << 0.5;
  CHECK_THROWS_AS((void)invert_T(P, h, 0, xv, NeumannBranch::backward, 1e-14, 200),
                  NumericError);
}

TEST_CASE("zero input gives zero inverse") {
  auto Pi = scalar_products(2.0, 500);
  auto Pj = scalar_products(0.5, 500);
  CohomPair P{Pi.get(), Pj.get()};
  SeqFunc h = [](long, const Vec&) { return Vec::Zero(1); };
  Vec xv(1);
  xv << 0.3;
  CHECK(invert_T(P, h, 0, xv, NeumannBranch::backward, 1e-14).norm() == 0.0);
  CHECK(invert_T(P, h, 0, xv, NeumannBranch::forward_terminating, 1e-14).norm() == 0.0);
}

TEST_CASE("block straightening conjugates the leaf dynamics to the linear block") {
  FramePipeline pl("saddle2d.json", 0, 8, 1.4);
  const double lam = std::exp(pl.hbs.lambda[0]);
  for (double w : {0.05, 0.2, -0.15}) {
    const double lhs = lam * pl.straight->forward(0, w);
    const double fw = pl.bar->eval(0, pl.leaf->point(0, w))[pl.leaf->coord()];
    const double rhs = pl.straight->forward(1, fw);
    CHECK(std::abs(lhs - rhs) < 1e-8);
    // round trip of the chart
    CHECK(std::abs(pl.straight->inverse(0, pl.straight->forward(0, w)) - w) < 1e-10);
  }
}

TEST_CASE("frame recursion: trivial on linear systems") {
  FramePipeline pl("linear2d.json", 0, 16, 0.4);
  FrameSolveConfig cfg;
  cfg.window = 16;
  cfg.radius = 0.4;
  const FrameSolution sol =
      solve_stable_frame(*pl.bar, pl.hbs, pl.budget, 1, 0, 0, *pl.leaf, cfg);
  CHECK(sol.iterations <= 2);
  for (long n = -16; n <= 16; n += 4) {
    CHECK(sol.eta_at(n, 0.2).norm() < 1e-14);
    // vbar is the pure kappa-block propagation of the unit vector
    const Vec vb = sol.vbar(n, 0.2);
    CHECK(vb[1] == doctest::Approx(std::pow(0.5, double(n))).epsilon(1e-12));
    CHECK(std::abs(vb[0]) < 1e-14);
  }
}

TEST_CASE("frame recursion on the saddle: contraction, tangency, growth") {
  FramePipeline pl("saddle2d.json", 0, 24, 1.4);
  FrameSolveConfig cfg;
  cfg.window = 24;
  cfg.radius = 1.35;   // must cover the support of the straightened nonlinearity
  cfg.n_grid = 1081;
  cfg.tol = 1e-10;
  const FrameSolution sol =
      solve_stable_frame(*pl.bar, pl.hbs, pl.budget, 1, 0, 0, *pl.leaf, cfg);
  CHECK(sol.iterations <= 30);
  for (double r : sol.ratios) CHECK(r <= 0.55);
  CHECK(sol.final_diff <= 1e-10 * 10);

  // tangency: ||vbar(0, x) - vbar(0, 0)|| / |x| -> 0 as |x| -> 0
  const Vec v0 = sol.vbar(0, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double x : {0.2, 0.05, 0.0125, 0.003125}) {
    const double ratio = (sol.vbar(0, x) - v0).lpNorm<Eigen::Infinity>() / x;
    CHECK(ratio <= prev * 1.05 + 1e-12);
    prev = ratio;
  }
  CHECK(prev < 0.1);

  // windowed growth bound (5.16)-style, measured constant stays finite
  const double lk = pl.hbs.lambda[1];
  double growth = 0.0;
  for (long n = -24; n <= 24; ++n)
    for (double x : {0.05, 0.15, 0.28}) {
      const double num = (sol.vbar(n, x) - sol.vbar(n, 0.0)).lpNorm<Eigen::Infinity>();
      growth = std::max(growth, std::exp(-lk * n - 12.0 * pl.budget.eps * std::abs(n)) *
                                    num / std::pow(x, pl.budget.sigma));
    }
  CHECK(growth < 50.0);
}

TEST_CASE("cohomological identity for reconstructed frame vectors") {
  FramePipeline pl("saddle2d.json", 0, 24, 1.4);
  FrameSolveConfig cfg;
  cfg.window = 24;
  cfg.radius = 1.35;
  cfg.n_grid = 1081;
  cfg.tol = 1e-11;
  const FrameSolution sol =
      solve_stable_frame(*pl.bar, pl.hbs, pl.budget, 1, 0, 0, *pl.leaf, cfg);
  FrameAssembly fa{&pl.hat->chain(), pl.chart.get(), pl.leaf.get(), &sol};

  // points on the unstable leaf through 0 (system coordinates)
  double worst = 0.0;
  for (double w : {0.05, 0.1, 0.2, -0.15}) {
    const Vec zbar = pl.leaf->point(0, w);
    // map bar -> hat -> system coordinates
    const Vec zhat = pl.chart->inverse(0, zbar);
    const Vec x = pl.hat->chain().B(0) * zhat + pl.hat->chain().point(0);
    const Vec v = fa.vector_at(0, x);
    const Vec Fx = pl.coc->eval(0, x);
    const Vec v_next = fa.vector_at(1, Fx);
    const Vec push = pl.coc->jac(0, x) * v;
    worst = std::max(worst, (push - v_next).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-7);

  // membership: forward pushes stay bounded under the rescaled growth test
  {
    const Vec zbar = pl.leaf->point(0, pl.straight->inverse(0, 0.15));
    const Vec zhat = pl.chart->inverse(0, zbar);
    const Vec x = pl.hat->chain().B(0) * zhat + pl.hat->chain().point(0);
    Vec v = fa.vector_at(0, x);
    Vec z = x;
    const double lk = pl.hbs.lambda[1];
    const double margin = 16.0 * pl.budget.eps + 2.0 * pl.budget.lambda_max * pl.budget.sigma;
    for (long n = 0; n <= 8; ++n) {
      CHECK(v.lpNorm<Eigen::Infinity>() <= 10.0 * std::exp((lk + margin) * n));
      v = pl.coc->jac(n, z) * v;
      z = pl.coc->eval(n, z);
    }
  }
}

TEST_CASE("canonical frame: trivial cases and the spanning check") {
  // linear system: zeta = standard stable basis
  {
    RandomMapSystem sys = load("linear2d.json");
    const Spectrum spec = lyapunov_exponents(sys, sys.driving, 2000);
    sys = sys.extend();
    const OmegaOrbit orb = orbit(sys.driving, 400);
    SystemCocycle coc(sys, orb);
    LpConfig lp;
    lp.eps = constants_budget(spec, 1.0).eps;
    const StableFrame f = canonical_frame(coc, spec.blocks(), Vec::Zero(2), lp);
    REQUIRE(f.zeta.size() == 1);
    CHECK(f.coords[0] == 1);
    CHECK(std::abs(f.zeta[0][1] - 1.0) < 1e-13);
    CHECK(std::abs(f.zeta[0][0]) < 1e-13);
    CHECK(std::abs(f.gram_det) > 0.5);
  }
  // bump system at 0: standard stable basis
  {
    RandomMapSystem sys = load("example19.json");
    const Spectrum spec = lyapunov_exponents(sys, sys.driving, 2000);
    sys = sys.extend();
    const OmegaOrbit orb = orbit(sys.driving, 400);
    SystemCocycle coc(sys, orb);
    LpConfig lp;
    lp.eps = constants_budget(spec, 1.0).eps;
    const StableFrame f = canonical_frame(coc, spec.blocks(), Vec::Zero(3), lp);
    REQUIRE(f.zeta.size() == 1);
    CHECK(f.coords[0] == 0);
    CHECK(std::abs(f.zeta[0][0] - 1.0) < 1e-12);
  }
}

TEST_CASE("canonical frame agrees with the correction-system reconstruction") {
  // dual construction on the saddle: v-frame vectors from the recursion vs
  // the direct stable-leaf derivative formula, on points of the unstable leaf
  FramePipeline pl("saddle2d.json", 0, 24, 1.4);
  FrameSolveConfig cfg;
  cfg.window = 24;
  cfg.radius = 1.35;
  cfg.n_grid = 1081;
  cfg.tol = 1e-11;
  const FrameSolution sol =
      solve_stable_frame(*pl.bar, pl.hbs, pl.budget, 1, 0, 0, *pl.leaf, cfg);
  FrameAssembly fa{&pl.hat->chain(), pl.chart.get(), pl.leaf.get(), &sol};
  LpConfig lp;
  lp.eps = pl.budget.eps;
  const BlockStructure bs = pl.spec.blocks();

  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double w = -0.25 + 0.5 * (i + 0.5) / 20.0;
    const Vec zbar = pl.leaf->point(0, w);
    const Vec zhat = pl.chart->inverse(0, zbar);
    const Vec x = pl.hat->chain().B(0) * zhat + pl.hat->chain().point(0);

    // reconstruction from the local frame via (id + Delta) c = delta
    std::vector<Vec> vframe{fa.vector_at(0, x)};
    const Vec rec = reconstruct_zeta(vframe, {1}, 0, 2);

    // direct formula
    const StableFrame direct = canonical_frame(*pl.coc, bs, x, lp);
    // normalize the reconstruction the same way (sup norm, sign of coord)
    Vec a = rec / rec.lpNorm<Eigen::Infinity>();
    Vec b = direct.zeta[0];
    if (a[1] * b[1] < 0.0) a = -a;
    worst = std::max(worst, (a - b).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("canonical frame is differentiable along leaf directions") {
  // finite-difference directional derivatives of zeta settle under grid
  // refinement with a rate at least 0.9 beta_alpha (smooth catalog case)
  RandomMapSystem sys = load("saddle2d.json");
  const Spectrum spec = lyapunov_exponents(sys, sys.driving, 2000);
  const ConstantsBudget budget = constants_budget(spec, sys.alpha);
  sys = sys.extend();
  const OmegaOrbit orb = orbit(sys.driving, 400);
  SystemCocycle coc(sys, orb);
  LpConfig lp;
  lp.eps = budget.eps;
  const BlockStructure bs = spec.blocks();

  Vec x(2);
  x << 0.12, -0.08;
  auto zeta = [&](const Vec& at) {
    return canonical_frame(coc, bs, at, lp).zeta[0];
  };
  for (int dir_coord : {0, 1}) {  // unstable and stable leaf directions
    Vec dir = Vec::Zero(2);
    dir[dir_coord] = 1.0;
    std::vector<std::pair<double, double>> pairs;
    const Vec z0 = zeta(x);
    Vec prev_fd;
    for (int k = 0; k < 7; ++k) {
      const double h = 0.05 * std::pow(2.0, -k);
      const Vec fd = (zeta(x + h * dir) - z0) / h;
      if (k > 0) {
        const double delta = (fd - prev_fd).lpNorm<Eigen::Infinity>();
        if (delta > 1e-13) pairs.emplace_back(h, delta);
      }
      prev_fd = fd;
    }
    REQUIRE(pairs.size() >= 4);
    // differences between successive refinements shrink at a Hoelder rate
    for (std::size_t k = 1; k < pairs.size(); ++k)
      CHECK(pairs[k].second < pairs[k - 1].second);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [h, d] : pairs) {
      sx += std::log(h);
      sy += std::log(d);
      sxx += std::log(h) * std::log(h);
      sxy += std::log(h) * std::log(d);
    }
    const double n = static_cast<double>(pairs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 0.9 * budget.beta_alpha);
  }
}

TEST_SUITE_END();
