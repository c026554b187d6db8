#include <CLI11.hpp>

#include "ranlin/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ranlin: spectra, invariant foliations, normal forms and "
               "linearizing conjugacies for hyperbolic random maps"};
  app.require_subcommand(1);

  ranlin::RunConfig cfg;
  std::uint64_t seed = 0;

  for (const char* name : {"spectrum", "check", "foliate", "normalform",
                           "frame", "linearize", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--system", cfg.system_path, "system description file (JSON)")
        ->required();
    sub->add_option("--seed", seed, "override the driving seed");
    sub->add_option("--out", cfg.out_dir, "output directory");
    sub->add_option("--radius", cfg.radius, "working radius (default rho/4)");
    sub->add_option("--horizon", cfg.horizon, "Lyapunov-Perron horizon override");
    sub->add_option("--tol", cfg.tol, "solver tolerance override");
    sub->add_flag("--strict-radius", cfg.strict_radius,
                  "use the pessimistic tempered-budget radius");
    sub->add_option("--workers", cfg.workers, "parallel workers for grid checks");
  }

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();
  cfg.subcommand = sub->get_name();
  cfg.seed_set = sub->count("--seed") > 0;
  if (cfg.seed_set) cfg.seed = seed;
  return ranlin::run(cfg);
}
