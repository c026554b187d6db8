#include "ranlin/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "ranlin/cohomology.hpp"
#include "ranlin/foliation.hpp"
#include "ranlin/linearize.hpp"
#include "ranlin/normalform.hpp"
#include "ranlin/spectrum.hpp"

namespace ranlin {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "ranlin 0.1.0";

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw PreconditionError("system file: " + path + ": " + msg);
}

Mat parse_matrix(const json& j, int d, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) fail(path, "expected a d x d matrix");
  Mat m(d, d);
  for (int r = 0; r < d; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != d)
      fail(path, "row has wrong length");
    for (int c = 0; c < d; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

RandomMapSystem parse_system_json(const json& j) {
  RandomMapSystem sys;
  if (!j.contains("dimension")) fail("dimension", "missing");
  sys.d = j["dimension"].get<int>();
  if (sys.d < 1 || sys.d > 16) fail("dimension", "out of range");
  if (!j.contains("blocks")) fail("blocks", "missing");
  for (const auto& b : j["blocks"]) sys.block_dims.push_back(b.get<int>());

  if (!j.contains("driving")) fail("driving", "missing");
  const json& jd = j["driving"];
  const std::string kind = jd.value("kind", "identity");
  DrivingSystem drv;
  if (kind == "identity") {
    drv.kind = DrivingKind::identity;
  } else if (kind == "rotation") {
    drv.kind = DrivingKind::rotation;
    drv.angle = jd.value("angle", 0.0);
  } else if (kind == "bernoulli") {
    drv.kind = DrivingKind::bernoulli;
    drv.alphabet = jd.value("alphabet", 0);
    if (jd.contains("probabilities"))
      for (const auto& p : jd["probabilities"]) drv.probabilities.push_back(p.get<double>());
  } else {
    fail("driving.kind", "unknown kind '" + kind + "'");
  }
  drv.seed = jd.value("seed", 0ULL);
  sys.driving = make_driving(drv);

  if (!j.contains("linear_part")) fail("linear_part", "missing");
  const json& jl = j["linear_part"];
  if (jl.contains("constant")) {
    sys.linear.constant = true;
    sys.linear.matrix = parse_matrix(jl["constant"], sys.d, "linear_part.constant");
  } else if (jl.contains("per_symbol")) {
    sys.linear.constant = false;
    for (std::size_t s = 0; s < jl["per_symbol"].size(); ++s)
      sys.linear.per_symbol.push_back(parse_matrix(
          jl["per_symbol"][s], sys.d,
          "linear_part.per_symbol[" + std::to_string(s) + "]"));
  } else {
    fail("linear_part", "need 'constant' or 'per_symbol'");
  }

  const json& jn = j.contains("nonlinearity") ? j["nonlinearity"] : json{{"name", "zero"}};
  const std::string name = jn.value("name", "zero");
  if (name == "zero") {
    sys.nonlin = Nonlinearity::zero(sys.d);
  } else if (name == "quadratic") {
    std::vector<QuadTerm> terms;
    for (const auto& t : jn["terms"])
      terms.push_back({t.at("out").get<int>(), t.at("a").get<int>(),
                       t.at("b").get<int>(), t.at("coeff").get<double>()});
    sys.nonlin = Nonlinearity::quadratic(sys.d, terms);
  } else if (name == "bump_coupling") {
    sys.nonlin = Nonlinearity::bump_coupling(
        sys.d, jn.at("out").get<int>(), jn.at("in").get<int>(),
        jn.at("amplitude").get<double>(), jn.at("width").get<double>());
  } else if (name == "polynomial") {
    std::vector<MonoTerm> terms;
    for (const auto& t : jn["terms"]) {
      MonoTerm m;
      m.out = t.at("out").get<int>();
      for (const auto& e : t.at("exps")) m.exps.push_back(e.get<int>());
      m.coeff = t.at("coeff").get<double>();
      terms.push_back(m);
    }
    sys.nonlin = Nonlinearity::polynomial(sys.d, terms);
  } else {
    fail("nonlinearity.name", "unknown catalog entry '" + name + "'");
  }

  sys.rho = j.value("rho", 1.0);
  sys.alpha = j.value("alpha", 1.0);
  validate_system(sys);
  sys.M = measure_M(sys);
  return sys;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("system file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Outputs {
  std::filesystem::path dir;
  std::string header;
  json meta;

  std::ofstream open(const std::string& name) const {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name);
    out << header;
    return out;
  }
  void write_json(const std::string& name, json body) const {
    std::filesystem::create_directories(dir);
    body["meta"] = meta;
    std::ofstream out(dir / name);
    out << body.dump(2) << "\n";
  }
};

long default_spectrum_steps(const RandomMapSystem& sys) {
  return sys.linear.constant ? 10000 : 100000;
}

struct Workspace {
  RandomMapSystem base, ext;
  Spectrum spec;
  BlockStructure bs;
  ConstantsBudget budget;
  ResonanceReport report;
  OmegaOrbit orb;
  double radius;
  LpConfig lp;
};

Workspace make_workspace(const RandomMapSystem& parsed, const RunConfig& cfg) {
  Workspace w{parsed, parsed.extend(), {}, {}, {}, {}, OmegaOrbit{}, 0.0, {}};
  if (cfg.seed_set) {
    w.base.driving.seed = cfg.seed;
    w.ext.driving.seed = cfg.seed;
  }
  w.spec = lyapunov_exponents(w.base, w.base.driving, default_spectrum_steps(w.base), 100);
  w.bs = w.spec.blocks();
  w.budget = constants_budget(w.spec, w.base.alpha);
  w.report = resonance_report(w.spec, w.base.alpha);
  w.orb = orbit(w.base.driving, 4000);
  w.radius = (cfg.radius > 0.0) ? cfg.radius : w.base.rho / 4.0;
  if (cfg.strict_radius) {
    // pessimistic tempered-budget radius; typically underflows to ~0
    const double K = 2.0, M = std::max(1.0, w.base.M);
    const double gap = w.bs.lambda[0] - w.bs.lambda[1];
    const double expo = 4.0 * (2.0 * w.budget.lambda_max - w.bs.lambda[1]) /
                        std::max(gap - 3.0 * w.budget.eps, 1e-6);
    const double mm = std::max({4.0, 8.0 * K * K * K,
                                std::pow(12.0 * K * K * std::exp(gap), expo)});
    const double strict = 1.0 / (M * mm);
    std::cerr << "warning: strict radius " << strict
              << " may underflow the working precision\n";
    w.radius = std::min(w.radius, std::max(strict, 1e-12));
  }
  w.lp.eps = w.budget.eps;
  if (cfg.tol > 0.0) w.lp.tol = cfg.tol;
  if (cfg.horizon > 0) w.lp.horizon = cfg.horizon;
  return w;
}

int run_spectrum(const Workspace& w, const Outputs& out) {
  auto f = out.open("spectrum.csv");
  f << "exponent,multiplicity,block\n";
  for (int j = 0; j < w.spec.p(); ++j)
    f << fmt(w.spec.lambda[j]) << "," << w.spec.mult[j] << "," << (j + 1) << "\n";
  return 0;
}

int run_check(const Workspace& w, const Outputs& out) {
  json rep;
  rep["belitskii_ok"] = w.report.belitskii_ok;
  rep["bunching_ok"] = w.report.bunching_ok;
  json viols = json::array();
  for (const auto& v : w.report.violations) viols.push_back({v[0], v[1], v[2]});
  rep["violating_triples"] = viols;
  rep["budget"] = {{"eps", w.budget.eps},       {"beta", w.budget.beta},
                   {"beta_E", w.budget.beta_E}, {"beta_N", w.budget.beta_N},
                   {"beta_v", w.budget.beta_v}, {"beta_alpha", w.budget.beta_alpha},
                   {"sigma", w.budget.sigma},   {"lambda_max", w.budget.lambda_max}};
  json lam = json::array();
  for (double l : w.spec.lambda) lam.push_back(l);
  rep["exponents"] = lam;
  out.write_json("check.json", rep);
  return w.report.belitskii_ok ? 0 : 2;
}

int run_foliate(const Workspace& w, const Outputs& out) {
  SystemCocycle coc(w.ext, w.orb);
  Leaf stable(coc, w.bs, Vec::Zero(w.base.d), LpSide::stable(w.bs), w.lp);
  Leaf unstable(coc, w.bs, Vec::Zero(w.base.d), LpSide::unstable(w.bs), w.lp);
  auto f = out.open("foliate.csv");
  f << "side,y,leaf_point,residual\n";
  auto dump = [&](Leaf& leaf, const char* side) {
    const int m = static_cast<int>(leaf.graph_coords().size());
    for (int i = 1; i <= 25; ++i) {
      const Vec y = halton_point(i, m, w.radius);
      const Vec z = leaf.chart(y);
      f << side << ",\"";
      for (int c = 0; c < m; ++c) f << (c ? " " : "") << fmt(y[c]);
      f << "\",\"";
      for (int c = 0; c < z.size(); ++c) f << (c ? " " : "") << fmt(z[c]);
      f << "\"," << fmt(leaf.solution(y).residual) << "\n";
    }
  };
  dump(stable, "stable");
  dump(unstable, "unstable");

  if (w.base.d <= 3) {
    std::ofstream svg(out.dir / "leaves.svg");
    svg << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='-1.2 -1.2 2.4 2.4'>\n";
    auto polyline = [&](Leaf& leaf, const char* color) {
      svg << "<polyline fill='none' stroke='" << color << "' stroke-width='0.01' points='";
      const int m = static_cast<int>(leaf.graph_coords().size());
      for (int i = -20; i <= 20; ++i) {
        Vec y = Vec::Constant(m, w.radius * i / 20.0);
        const Vec z = leaf.chart(y);
        svg << fmt(z[0] / w.base.rho) << "," << fmt(-z[std::min<int>(1, z.size() - 1)] / w.base.rho) << " ";
      }
      svg << "'/>\n";
    };
    polyline(stable, "#1f77b4");
    polyline(unstable, "#d62728");
    svg << "</svg>\n";
  }
  return 0;
}

int run_normalform(const Workspace& w, const Outputs& out) {
  if (!w.report.belitskii_ok) return 2;
  SystemCocycle coc(w.ext, w.orb);
  const long series_w = 220;
  FrameChain chain = block_diagonalize(w.ext, w.orb, Vec::Zero(w.base.d), w.spec,
                                       -(series_w + 2), series_w + 2, 60);
  HatCocycle hat(coc, chain);
  NormalFormCoeffs coeffs = homological_coeffs(hat, w.spec, 1e-12, 0, 1, series_w);
  const BlockStructure hbs = hat_blocks(w.spec);
  const double before = mixed_second_derivative(hat, hbs, 0, 1e-4);
  auto shared = std::make_shared<NormalFormCoeffs>(coeffs);
  NormalFormChart chart(shared, normal_form_radius(hat, coeffs, w.base.rho));
  BarCocycle bar(hat, chart);
  const double after =
      mixed_second_derivative(bar, hbs, 0, std::min(1e-4, chart.rho_tilde() / 64.0));

  auto f = out.open("normalform.csv");
  f << "i,kappa,j,branch,k_star,norm,residual\n";
  for (const auto& t : coeffs.triples)
    f << (t.i + 1) << "," << (t.kappa + 1) << "," << (t.j + 1) << ","
      << (t.branch > 0 ? "forward" : "backward") << "," << t.k_star << ","
      << fmt(t.norm) << "," << fmt(t.residual) << "\n";
  f << "# mixed_second_derivative_before=" << fmt(before) << "\n";
  f << "# mixed_second_derivative_after=" << fmt(after) << "\n";
  return 0;
}

int run_frame(const Workspace& w, const Outputs& out) {
  SystemCocycle coc(w.ext, w.orb);
  StableFrame frame = canonical_frame(coc, w.bs, Vec::Zero(w.base.d), w.lp);
  auto f = out.open("frame.csv");
  f << "sample,coord,zeta,cohomological_residual\n";
  for (int i = 0; i <= 10; ++i) {
    const Vec x = (i == 0) ? Vec(Vec::Zero(w.base.d))
                           : Vec(halton_point(i, w.base.d, w.radius));
    StableFrame fr = canonical_frame(coc, w.bs, x, w.lp);
    const Vec Fx = coc.eval(0, x);
    ShiftedCocycle shifted(coc, 1);
    Leaf img(shifted, w.bs, Fx, LpSide::stable(w.bs), w.lp);
    const Mat D = img.chart_derivative(extract(Fx, img.graph_coords()));
    const Mat J = coc.jac(0, x);
    for (std::size_t c = 0; c < fr.zeta.size(); ++c) {
      Vec img_zeta = D.col(static_cast<int>(c));
      img_zeta /= img_zeta.lpNorm<Eigen::Infinity>();
      Vec push = J * fr.zeta[c];
      push /= push.lpNorm<Eigen::Infinity>();
      const double res = (push - img_zeta).lpNorm<Eigen::Infinity>();
      f << i << "," << fr.coords[c] << ",\"";
      for (int r = 0; r < fr.zeta[c].size(); ++r)
        f << (r ? " " : "") << fmt(fr.zeta[c][r]);
      f << "\"," << fmt(res) << "\n";
    }
  }
  return 0;
}

int run_linearize(const Workspace& w, const Outputs& out, int workers) {
  if (!w.report.belitskii_ok) return 2;
  SystemCocycle coc(w.ext, w.orb);
  Conjugacy Phi(coc, w.bs, w.lp);
  ConjugacyReport rep =
      verify_conjugacy(Phi, coc, w.bs, w.radius, 200, workers, true);
  auto f = out.open("linearize.csv");
  f << "point,residual\n";
  for (std::size_t i = 0; i < rep.residuals.size(); ++i) {
    const Vec x = halton_point(i + 1, w.base.d, w.radius);
    f << "\"";
    for (int c = 0; c < x.size(); ++c) f << (c ? " " : "") << fmt(x[c]);
    f << "\"," << fmt(rep.residuals[i]) << "\n";
  }
  json summary = {{"max_residual", rep.max_residual},
                  {"dphi0_deviation", rep.dphi0_deviation},
                  {"max_roundtrip", rep.max_roundtrip},
                  {"points", rep.points},
                  {"radius", w.radius}};
  out.write_json("linearize.json", summary);
  return 0;
}

int run_verify(const Workspace& w, int workers) {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double value) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  (" << value << ")\n";
    if (!ok) ++failures;
  };

  SystemCocycle coc(w.ext, w.orb);
  const int d = w.base.d;

  // cocycle law
  {
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i) {
      const Vec x = halton_point(i, d, w.radius);
      const auto [z1, J1] = iterate(w.ext, w.orb, 5, x);
      const auto [zmid, Jm] = iterate(w.ext, w.orb, 2, x);
      const auto [z2, J2] = iterate(w.ext, w.orb.shifted(2), 3, zmid);
      worst = std::max(worst, (z1 - z2).lpNorm<Eigen::Infinity>());
    }
    report("cocycle_law", worst < 1e-10, worst);
  }
  // extension locality
  {
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i) {
      Vec x = halton_point(i, d, 0.4 * w.base.rho);
      worst = std::max(worst, (w.ext.evaluate(w.orb.state(0), x) -
                               w.base.evaluate(w.orb.state(0), x))
                                  .lpNorm<Eigen::Infinity>());
      Vec far = halton_point(i, d, w.base.rho);
      far = far * (1.5 * w.base.rho / std::max(far.lpNorm<Eigen::Infinity>(), 1e-9));
      worst = std::max(worst, (w.ext.evaluate(w.orb.state(0), far) -
                               w.ext.lambda(w.orb.state(0)) * far)
                                  .lpNorm<Eigen::Infinity>());
    }
    report("extension_locality", worst == 0.0, worst);
  }
  // Lyapunov-Perron residuals
  {
    double worst = 0.0;
    Leaf stable(coc, w.bs, Vec::Zero(d), LpSide::stable(w.bs), w.lp);
    for (int i = 1; i <= 10; ++i) {
      const Vec y =
          halton_point(i, static_cast<int>(stable.graph_coords().size()), w.radius);
      worst = std::max(worst, stable.solution(y).residual);
    }
    report("lp_residual", worst < 1e-10, worst);
  }
  // foliation invariance
  {
    Leaf stable(coc, w.bs, Vec::Zero(d), LpSide::stable(w.bs), w.lp);
    const double res =
        invariance_residual(stable, coc, w.bs, LpSide::stable(w.bs), w.lp, 10, w.radius);
    report("foliation_invariance", res < 1e-6, res);
  }
  // budget determinism
  {
    const ConstantsBudget again = constants_budget(w.spec, w.base.alpha);
    const bool same = again.eps == w.budget.eps && again.beta == w.budget.beta &&
                      again.beta_E == w.budget.beta_E && again.sigma == w.budget.sigma;
    report("budget_bit_stable", same, 0.0);
  }
  if (!w.report.belitskii_ok) {
    std::cout << "ABORT resonance: Belitskii condition fails\n";
    return 2;
  }
  // conjugacy (reduced grid)
  {
    Conjugacy Phi(coc, w.bs, w.lp);
    ConjugacyReport rep = verify_conjugacy(Phi, coc, w.bs, std::min(w.radius, 0.05),
                                           100, workers);
    report("conjugacy_residual", rep.max_residual < 1e-6, rep.max_residual);
    report("conjugacy_roundtrip", rep.max_roundtrip < 1e-9, rep.max_roundtrip);
    report("conjugacy_dphi0", rep.dphi0_deviation < 1e-6, rep.dphi0_deviation);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

RandomMapSystem parse_system_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw PreconditionError(std::string("system file: invalid JSON: ") + e.what());
  }
  return parse_system_json(j);
}

RandomMapSystem parse_system_file(const std::string& path) {
  return parse_system_text(slurp(path));
}

std::uint64_t config_hash(const RunConfig& cfg, const std::string& system_text) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(cfg.subcommand);
  mix(system_text);
  mix(std::to_string(cfg.seed_set ? cfg.seed : 0));
  mix(fmt(cfg.radius));
  mix(fmt(cfg.tol));
  mix(std::to_string(cfg.horizon));
  mix(cfg.strict_radius ? "strict" : "");
  return h;
}

int run(const RunConfig& cfg) {
  try {
    const std::string text = slurp(cfg.system_path);
    RandomMapSystem parsed = parse_system_text(text);
    Workspace w = make_workspace(parsed, cfg);

    Outputs out;
    out.dir = cfg.out_dir;
    std::ostringstream head;
    head << "# " << kVersion << "\n";
    head << "# config_hash=" << config_hash(cfg, text) << "\n";
    head << "# seed=" << (cfg.seed_set ? cfg.seed : parsed.driving.seed) << "\n";
    out.header = head.str();
    out.meta = {{"version", kVersion},
                {"config_hash", std::to_string(config_hash(cfg, text))},
                {"seed", cfg.seed_set ? cfg.seed : parsed.driving.seed}};

    if (cfg.subcommand == "spectrum") return run_spectrum(w, out);
    if (cfg.subcommand == "check") return run_check(w, out);
    if (cfg.subcommand == "foliate") return run_foliate(w, out);
    if (cfg.subcommand == "normalform") return run_normalform(w, out);
    if (cfg.subcommand == "frame") return run_frame(w, out);
    if (cfg.subcommand == "linearize") return run_linearize(w, out, cfg.workers);
    if (cfg.subcommand == "verify") return run_verify(w, cfg.workers);
    throw PreconditionError("unknown subcommand: " + cfg.subcommand);
  } catch (const PreconditionError& e) {
    std::cerr << "error [precondition]: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error [numeric]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ranlin
