#include <doctest.h>

#include <memory>
#include <random>

#include "oracles.hpp"
#include "ranlin/io.hpp"
#include "ranlin/normalform.hpp"
#include "ranlin/spectrum.hpp"

using namespace ranlin;

namespace {

RandomMapSystem load(const char* name) {
  return parse_system_file(std::string(RANLIN_DATA_DIR) + "/" + name);
}

struct NfSetup {
  RandomMapSystem sys;
  Spectrum spec;
  ConstantsBudget budget;
  OmegaOrbit orb;
  std::unique_ptr<SystemCocycle> coc;
  std::unique_ptr<HatCocycle> hat;
};

NfSetup make(const char* name, const Vec& anchor, long chain_width) {
  NfSetup s;
  s.sys = load(name);
  s.spec = lyapunov_exponents(s.sys, s.sys.driving, 5000);
  s.budget = constants_budget(s.spec, s.sys.alpha);
  s.sys = s.sys.extend();
  s.orb = orbit(s.sys.driving, chain_width + 500);
  s.coc = std::make_unique<SystemCocycle>(s.sys, s.orb);
  FrameChain chain =
      block_diagonalize(s.sys, s.orb, anchor, s.spec, -chain_width, chain_width, 60);
  s.hat = std::make_unique<HatCocycle>(*s.coc, std::move(chain));
  return s;
}

// constant scalar three-block cocycle r_i, r_kappa, r_j with unit source
struct ScalarSetup {
  RandomMapSystem sys;
  Spectrum spec;
  OmegaOrbit orb;
};

ScalarSetup scalar_blocks(double ri, double rk, double rj) {
  ScalarSetup s;
  s.sys.d = 3;
  s.sys.block_dims = {1, 1, 1};
  s.sys.linear.constant = true;
  Mat m = Mat::Zero(3, 3);
  m(0, 0) = ri;
  m(1, 1) = rk;
  m(2, 2) = rj;
  s.sys.linear.matrix = m;
  s.sys.nonlin = Nonlinearity::zero(3);
  s.sys.rho = 1.0;
  s.sys.alpha = 1.0;
  s.sys.driving = make_driving(DrivingSystem{});
  validate_system(s.sys);
  s.spec = lyapunov_exponents(s.sys, s.sys.driving, 2000);
  s.orb = orbit(s.sys.driving, 1000);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("normalform");

TEST_CASE("hat map: identity frames at the fixed point, vanishing at 0") {
  NfSetup s = make("example19.json", Vec::Zero(3), 12);
  // P = id since Df(omega, 0) = 0 and the blocks are coordinate aligned
  for (long n = -5; n <= 5; ++n) {
    Mat Bsys = Mat::Zero(3, 3);
    int col = 0;
    for (int j = 0; j < s.spec.p(); ++j)
      for (int c : s.spec.coords[j]) Bsys.col(c) = s.hat->chain().B(n).col(col++);
    CHECK((Bsys - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }
  const Vec zero = Vec::Zero(3);
  for (long n = -3; n <= 3; ++n) {
    CHECK(s.hat->eval(n, zero).lpNorm<Eigen::Infinity>() < 1e-14);
    const Mat J = s.hat->jac(n, zero);
    const Mat L = s.hat->linear(n);
    CHECK((J - L).cwiseAbs().maxCoeff() < 1e-10);
    // block diagonal with the spectral blocks on the diagonal
    CHECK(L(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(L(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(L(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("hat map off-block residual along an orbit of a coupled system") {
  RandomMapSystem raw = load("example19.json");
  NfSetup s = make("example19.json", [] {
    Vec x(3);
    x << 0.05, 0.42, -0.03;
    return x;
  }(), 12);
  double worst = 0.0;
  for (long n = 0; n < 10; ++n) {
    const Mat J = s.hat->jac(n, Vec::Zero(3));
    const Mat L = s.hat->linear(n);
    worst = std::max(worst, (J - L).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
  (void)raw;
}

TEST_CASE("homological coefficients vanish for the linear system") {
  NfSetup s = make("linear2d.json", Vec::Zero(2), 84);
  const NormalFormCoeffs c = homological_coeffs(*s.hat, s.spec, 1e-12, 0, 1, 80);
  for (const SymTensor& a : c.a) CHECK(a.norm() < 1e-14);
  for (const TripleInfo& t : c.triples) CHECK(t.residual < 1e-13);
}

TEST_CASE("scalar Sylvester oracle, backward branch") {
  // r_i = 2 (unstable), r_kappa = 1/2, r_j = 3: a = c / (r_i r_kappa - r_j)
  ScalarSetup s = scalar_blocks(2.0, 0.5, 3.0);
  // order sorted: lambda = (ln3, ln2, -ln2): spectral blocks j=0 (r=3),
  // i=1 (r=2), kappa=2 (r=1/2)
  SystemCocycle coc(s.sys, s.orb);
  FrameChain chain = block_diagonalize(s.sys, s.orb, Vec::Zero(3), s.spec, -302, 302, 50);
  HatCocycle hat(coc, chain);

  // plant the source c = 1 by hand: solve the triple recursion directly
  // through the series evaluator on a cocycle with a known Hessian is not
  // possible for a linear map, so check the series against the closed form
  // using a quadratic system built to give c_{i,kappa,j} = 1.
  //   f_j = -1 * x_i x_kappa  =>  c = -1/2 * d2(pi_j F) = ... = 1
  RandomMapSystem quad = s.sys;
  // in system coordinates: i -> coord 0 (r=2), kappa -> coord 1 (r=1/2),
  // j -> coord 2 (r=3)
  quad.nonlin = Nonlinearity::quadratic(3, {{2, 0, 1, -2.0}});
  quad.M = measure_M(quad);
  quad = quad.extend();
  SystemCocycle qcoc(quad, s.orb);
  FrameChain qchain = block_diagonalize(quad, s.orb, Vec::Zero(3), s.spec, -302, 302, 50);
  HatCocycle qhat(qcoc, qchain);
  const NormalFormCoeffs c = homological_coeffs(qhat, s.spec, 1e-12, 0, 1, 300);

  const double expected = 1.0 / (2.0 * 0.5 - 3.0);  // -1/2
  // find the triple (i=block of ln2, kappa=block of -ln2, j=block of ln3)
  bool found = false;
  for (const TripleInfo& t : c.triples) {
    if (t.i == 1 && t.kappa == 2 && t.j == 0) {
      found = true;
      CHECK(t.branch == -1);  // lambda_i + lambda_kappa < lambda_j
      CHECK(t.norm == doctest::Approx(std::abs(expected)).epsilon(1e-10));
      CHECK(t.residual < 1e-11);  // 10 x series tolerance
      // geometric decay of the term norms at the predicted rate
      for (std::size_t k = 3; k + 1 < t.term_norms.size() && t.term_norms[k + 1] > 1e-300;
           ++k)
        CHECK(t.term_norms[k + 1] / t.term_norms[k] ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    } else {
      CHECK(t.norm < 1e-12);
    }
  }
  CHECK(found);
  // the assembled symmetric tensor carries the coefficient in hat coordinates
  // (hat coords: block 0 = r3, block 1 = r2, block 2 = r1/2)
  CHECK(c.at(0).comp[0](1, 2) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(c.at(0).comp[0](2, 1) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("scalar Sylvester oracle, forward branch") {
  // r_i = 2, r_kappa = 1/2, r_j = 1/5: a = c / (r_i r_kappa - r_j) = 1 / (1 - 1/5)
  // (r_j = 1/4 of the same family hits a resonance in a *different* triple,
  // 2 * 1/4 = 1/2, which the solver rightly aborts on; checked separately)
  ScalarSetup s = scalar_blocks(2.0, 0.5, 0.2);
  RandomMapSystem quad = s.sys;
  quad.nonlin = Nonlinearity::quadratic(3, {{2, 0, 1, -2.0}});
  quad.M = measure_M(quad);
  quad = quad.extend();
  SystemCocycle qcoc(quad, s.orb);
  FrameChain qchain = block_diagonalize(quad, s.orb, Vec::Zero(3), s.spec, -302, 302, 50);
  HatCocycle qhat(qcoc, qchain);
  const NormalFormCoeffs c = homological_coeffs(qhat, s.spec, 1e-12, 0, 1, 300);

  bool found = false;
  for (const TripleInfo& t : c.triples)
    if (t.i == 0 && t.kappa == 1 && t.j == 2) {
      found = true;
      CHECK(t.branch == +1);  // lambda_i + lambda_kappa > lambda_j
      CHECK(t.norm == doctest::Approx(1.0 / (1.0 - 0.2)).epsilon(1e-10));
      CHECK(t.residual < 1e-11);  // 10 x series tolerance
      for (std::size_t k = 3; k + 1 < t.term_norms.size() && t.term_norms[k + 1] > 1e-300;
           ++k)
        CHECK(t.term_norms[k + 1] / t.term_norms[k] ==
              doctest::Approx(0.2).epsilon(1e-8));
    }
  CHECK(found);
}

TEST_CASE("resonant spectra abort the coefficient solve") {
  // blocks (2, 1/2, 1/4): the triple 2 * 1/4 = 1/2 is resonant
  ScalarSetup s = scalar_blocks(2.0, 0.5, 0.25);
  SystemCocycle coc(s.sys, s.orb);
  FrameChain chain = block_diagonalize(s.sys, s.orb, Vec::Zero(3), s.spec, -30, 30, 50);
  HatCocycle hat(coc, chain);
  CHECK_THROWS_AS(homological_coeffs(hat, s.spec, 1e-12, 0, 1, 20), PreconditionError);
}

TEST_CASE("normal form kills the mixed unstable-stable second derivative") {
  NfSetup s = make("quad2d.json", Vec::Zero(2), 86);
  const BlockStructure hbs = hat_blocks(s.spec);
  const double before = mixed_second_derivative(*s.hat, hbs, 0, 1e-4);
  CHECK(before == doctest::Approx(1.0).epsilon(1e-4));  // the planted coupling

  const NormalFormCoeffs c = homological_coeffs(*s.hat, s.spec, 1e-12, -1, 2, 80);
  for (const TripleInfo& t : c.triples) CHECK(t.residual < 1e-11);  // 10 x series tolerance
  auto shared = std::make_shared<NormalFormCoeffs>(c);
  const double rt = normal_form_radius(*s.hat, c, s.sys.rho);
  NormalFormChart chart(shared, rt);
  BarCocycle bar(*s.hat, chart);

  CHECK(bar.eval(0, Vec::Zero(2)).lpNorm<Eigen::Infinity>() < 1e-13);
  const Mat J0 = bar.jac(0, Vec::Zero(2));
  CHECK((J0 - s.hat->linear(0)).cwiseAbs().maxCoeff() < 1e-9);

  const double h = std::min(1e-4, rt / 64.0);
  const double after = mixed_second_derivative(bar, hbs, 0, h);
  CHECK(after < 1e-7);
}

TEST_CASE("chart round trip and derivative bound") {
  NfSetup s = make("quad2d.json", Vec::Zero(2), 86);
  const NormalFormCoeffs c = homological_coeffs(*s.hat, s.spec, 1e-12, 0, 1, 80);
  auto shared = std::make_shared<NormalFormCoeffs>(c);
  const double rt = normal_form_radius(*s.hat, c, s.sys.rho);
  NormalFormChart chart(shared, rt);
  std::mt19937_64 rng(17);
  double worst = 0.0, dev = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Vec x = oracles::random_point(rng, 2, rt);
    const Vec y = chart.inverse(0, chart.forward(0, x));
    worst = std::max(worst, (y - x).lpNorm<Eigen::Infinity>());
    dev = std::max(dev, (chart.forward_jac(0, x) - Mat::Identity(2, 2)).norm());
  }
  CHECK(worst < 1e-10);
  CHECK(dev < 0.5);  // DN stays near the identity on the chart ball
  CHECK(chart.forward(0, Vec::Zero(2)).norm() == 0.0);
  CHECK((chart.forward_jac(0, Vec::Zero(2)) - Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("coefficients for a two-dimensional rotation block") {
  // 2x2 rotation-dilation unstable block coupled into a stable line; the
  // homological defect vanishes even though the block matrices do not commute
  RandomMapSystem sys;
  sys.d = 3;
  sys.block_dims = {2, 1};
  sys.linear.constant = true;
  Mat m = Mat::Zero(3, 3);
  m(0, 1) = -2.0;
  m(1, 0) = 2.0;
  m(2, 2) = 0.5;
  sys.linear.matrix = m;
  sys.nonlin = Nonlinearity::quadratic(3, {{2, 0, 2, 0.4}, {2, 1, 2, -0.3}});
  sys.rho = 1.0;
  sys.alpha = 1.0;
  sys.driving = make_driving(DrivingSystem{});
  validate_system(sys);
  sys.M = measure_M(sys);
  sys = sys.extend();

  const Spectrum spec = lyapunov_exponents(sys, sys.driving, 4000);
  const OmegaOrbit orb = orbit(sys.driving, 600);
  SystemCocycle coc(sys, orb);
  FrameChain chain = block_diagonalize(sys, orb, Vec::Zero(3), spec, -102, 102, 60);
  HatCocycle hat(coc, chain);
  const NormalFormCoeffs c = homological_coeffs(hat, spec, 1e-12, 0, 1, 96);
  bool nontrivial = false;
  for (const TripleInfo& t : c.triples) {
    CHECK(t.residual < 1e-11);  // 10 x series tolerance
    nontrivial = nontrivial || t.norm > 1e-6;
  }
  CHECK(nontrivial);

  // the transformed map loses its mixed unstable-stable second derivative
  auto shared = std::make_shared<NormalFormCoeffs>(c);
  NormalFormChart chart(shared, normal_form_radius(hat, c, sys.rho));
  BarCocycle bar(hat, chart);
  const BlockStructure hbs = hat_blocks(spec);
  const double before = mixed_second_derivative(hat, hbs, 0, 1e-4);
  const double after =
      mixed_second_derivative(bar, hbs, 0, std::min(1e-4, chart.rho_tilde() / 64.0));
  CHECK(before > 0.2);
  CHECK(after < 1e-7);
}

TEST_CASE("coefficients are Hoelder in the anchor point") {
  // smooth 2-d benchmark: empirical exponent of anchor -> a(omega, anchor)
  // must be at least 0.9 * beta_N (trivially satisfied by the smooth case;
  // distances must be genuinely nonzero)
  RandomMapSystem raw = load("quad2d.json");
  const Spectrum spec = lyapunov_exponents(raw, raw.driving, 5000);
  const ConstantsBudget budget = constants_budget(spec, raw.alpha);
  RandomMapSystem sys = raw.extend();
  const OmegaOrbit orb = orbit(sys.driving, 800);
  SystemCocycle coc(sys, orb);

  auto coeff_at = [&](const Vec& anchor) {
    FrameChain chain = block_diagonalize(sys, orb, anchor, spec, -84, 84, 60);
    HatCocycle hat(coc, chain);
    return homological_coeffs(hat, spec, 1e-12, 0, 1, 80).at(0);
  };

  Vec base(2);
  base << 0.02, 0.015;
  const SymTensor a0 = coeff_at(base);
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 24; ++i) {
    const double step = std::pow(10.0, -1.8 - 1.5 * i / 23.0);
    Vec anchor = base;
    anchor[0] += step;
    const SymTensor a1 = coeff_at(anchor);
    double dist = 0.0;
    for (int o = 0; o < 2; ++o)
      dist = std::max(dist, (a1.comp[o] - a0.comp[o]).cwiseAbs().maxCoeff());
    if (dist > 1e-14) pairs.emplace_back(step, dist);
  }
  REQUIRE(pairs.size() >= 20);
  CHECK(holder_estimate(pairs) >= 0.9 * budget.beta_N);
}

TEST_SUITE_END();
