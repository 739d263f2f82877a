// mflab command-line front end: run, report, bounds.
#include <CLI11.hpp>

#include <cmath>
#include <iostream>

#include "mflab/bounds.hpp"
#include "mflab/error.hpp"
#include "mflab/experiment.hpp"
#include "mflab/heatflow.hpp"

namespace {

using mflab::json;

json num(double v) { return std::isfinite(v) ? json(v) : json(mflab::format_double(v)); }

struct BoundFlags {
  mflab::BoundInputs in;
  double alpha = 1.0, L = 0.0, t = 1.0, a = 1.0, C = 0.0, k = 2.0, cbar = 1.0;
  double kappa = 1.0, epsilon = 0.5, rho = 1.0, particles = 1.0;
  std::string variant = "generic";
};

void add_bound_flags(CLI::App* sub, BoundFlags& f) {
  sub->add_option("--sigma", f.in.sigma);
  sub->add_option("--lambda", f.in.lambda);
  sub->add_option("--beta-hat", f.in.beta_hat);
  sub->add_option("--B", f.in.B);
  sub->add_option("--L-h", f.in.L_h);
  sub->add_option("--L-ell", f.in.L_ell);
  sub->add_option("--beta-ell", f.in.beta_ell);
  sub->add_option("--d", f.in.d);
  sub->add_option("--N", f.in.N);
  sub->add_option("--d-prox", f.in.d_prox);
  sub->add_option("--alpha", f.alpha);
  sub->add_option("--L", f.L);
  sub->add_option("--t", f.t);
  sub->add_option("--a", f.a);
  sub->add_option("--C", f.C);
  sub->add_option("--k", f.k);
  sub->add_option("--cbar-pi", f.cbar);
  sub->add_option("--kappa", f.kappa);
  sub->add_option("--epsilon", f.epsilon);
  sub->add_option("--rho", f.rho);
  sub->add_option("--particles", f.particles);
  sub->add_option("--variant", f.variant);
}

json evaluate_bound(const std::string& calc, const BoundFlags& f) {
  json out = {{"calculator", calc}};
  if (calc == "main") {
    const auto v = mflab::parse_main_variant(f.variant);
    out["variant"] = mflab::to_string(v);
    out["exponent"] = num(mflab::main_bound_exponent(f.in, v));
    out["value"] = num(mflab::main_bound(f.in, v));
    out["implied_constants"] = 1;
  } else if (calc == "lsi_pert") {
    out["value"] = num(mflab::lsi_pert_bound(f.alpha, f.L));
  } else if (calc == "lsi_pi") {
    out["value"] = num(mflab::lsi_pi_bound(f.in));
  } else if (calc == "songbo") {
    out["value"] = num(mflab::songbo_bound(f.kappa, f.in.d, f.epsilon, f.rho, f.particles));
    out["note"] = "formula of a concurrent result, for comparison only";
  } else if (calc == "winf") {
    out["value"] = num(mflab::winf_bound(f.alpha, f.L));
  } else if (calc == "rescale") {
    const auto r = mflab::rescale_parameters(f.in);
    out["beta_hat"] = num(r.beta_hat);
    out["lambda"] = num(r.lambda);
    out["B"] = num(r.B);
    out["sigma"] = num(r.sigma);
  } else if (calc == "poc") {
    const auto v = mflab::parse_poc_variant(f.variant);
    out["variant"] = mflab::to_string(v);
    out["value"] = num(mflab::poc_bound(f.in, f.cbar, f.alpha, v));
  } else if (calc == "alpha_t") {
    out["value"] = num(mflab::alpha_t(f.in, f.t));
  } else if (calc == "regime_threshold") {
    out["value"] = num(mflab::regime_threshold(f.in));
  } else if (calc == "heatflow") {
    out["value"] = num(mflab::heatflow_lipschitz_bound(f.a, {{f.C, f.k}}));
  } else {
    throw mflab::ConfigError("unknown calculator '" + calc +
                             "' (main, lsi_pert, lsi_pi, songbo, winf, rescale, poc, alpha_t, regime_threshold, "
                             "heatflow)");
  }
  return out;
}

int status_for(const mflab::Error& e) {
  if (dynamic_cast<const mflab::ConfigError*>(&e) || dynamic_cast<const mflab::InvalidInput*>(&e)) return 2;
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field Langevin numerics"};
  app.set_version_flag("--version", std::string(mflab::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config's output)");
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--workers", workers, "override the worker pool size");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-render summary.md of a finished run");
  report->add_option("dir", report_dir)->required();

  std::string calc;
  BoundFlags flags;
  auto* bounds = app.add_subcommand("bounds", "evaluate a closed-form bound and print JSON");
  bounds->add_option("calculator", calc)->required();
  add_bound_flags(bounds, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      const std::filesystem::path cfg_file = config_path;
      const json user = mflab::parse_config_text(mflab::read_text(cfg_file));
      std::filesystem::path out = out_dir;
      if (out.empty()) {
        if (!user.contains("output") || !user["output"].is_string())
          throw mflab::ConfigError("output: no --out given and the config has no output directory");
        out = user["output"].get<std::string>();
      }
      mflab::RunOverrides ov;
      ov.seed = seed;
      ov.workers = workers;
      ov.base_dir = cfg_file.parent_path();
      const auto result = mflab::run_experiment(user, out, ov);
      for (const auto& inv : result.invariants)
        std::cout << (inv.pass ? "pass  " : "FAIL  ") << inv.name << "  (" << inv.detail << ")\n";
      std::cout << "results in " << out.string() << "\n";
      return result.all_pass ? 0 : 1;
    }
    if (report->parsed()) {
      std::cout << mflab::render_report(report_dir);
      return 0;
    }
    std::cout << evaluate_bound(calc, flags).dump(2) << "\n";
    return 0;
  } catch (const mflab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return status_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
