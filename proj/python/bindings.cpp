#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mflab/bounds.hpp"
#include "mflab/chaos.hpp"
#include "mflab/error.hpp"
#include "mflab/experiment.hpp"
#include "mflab/heatflow.hpp"
#include "mflab/meanfield.hpp"
#include "mflab/presets.hpp"
#include "mflab/sampler.hpp"

namespace py = pybind11;
using namespace mflab;

namespace {

py::dict density_dict(const GridDensity& p) {
  py::dict d;
  d["nodes"] = Points(p.grid().nodes());
  d["density"] = p.density();
  d["log_density"] = p.log_density();
  d["mean"] = p.mean();
  d["covariance"] = p.covariance();
  return d;
}

GridDensity density_on_line(const ModelSpec& m, std::size_t N, double half_width, std::size_t nodes) {
  const std::size_t dim = N * m.dim();
  return finite_particle_density(m, N, Grid::make(std::vector<Axis>(dim, Axis{-half_width, half_width, nodes})));
}

py::dict report_dict(const ChaosReport& r) {
  py::dict d;
  d["N"] = r.N;
  d["kl"] = r.kl.value;
  d["kl_ci"] = r.kl.half_width;
  d["bregman_mu"] = r.bregman_mu.value;
  d["bregman_pi"] = r.bregman_pi.value;
  d["log_Z"] = r.log_Z.value;
  d["log_Z_ci"] = r.log_Z.half_width;
  d["ess_Z"] = r.ess_Z;
  d["bound_poc"] = r.bound_poc;
  d["bound_poc_ii"] = r.bound_poc_ii;
  d["variance_bound"] = r.variance_bound;
  d["acceptance_rate"] = r.acceptance_rate;
  d["all_checks"] = r.checks.all();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mean-field Langevin numerics";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "Error");
  py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NonConvergence>(m, "NonConvergence");
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

  py::class_<BoundInputs>(m, "BoundInputs")
      .def(py::init<>())
      .def_readwrite("sigma", &BoundInputs::sigma)
      .def_readwrite("lambda_", &BoundInputs::lambda)
      .def_readwrite("beta_hat", &BoundInputs::beta_hat)
      .def_readwrite("B", &BoundInputs::B)
      .def_readwrite("L_h", &BoundInputs::L_h)
      .def_readwrite("L_ell", &BoundInputs::L_ell)
      .def_readwrite("beta_ell", &BoundInputs::beta_ell)
      .def_readwrite("d", &BoundInputs::d)
      .def_readwrite("N", &BoundInputs::N)
      .def_readwrite("d_prox", &BoundInputs::d_prox)
      .def_readonly("rescaled", &BoundInputs::rescaled);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("zero", &ModelSpec::zero, py::arg("d"), py::arg("sigma"), py::arg("lambda_"))
      .def_static("quadratic_oracle", &ModelSpec::quadratic_oracle, py::arg("sigma"), py::arg("lambda_"),
                  py::arg("kappa"), py::arg("c"), py::arg("e"))
      .def_static("from_config", [](const std::string& text) { return model_from_config(parse_config_text(text)); })
      .def_property_readonly("kind", [](const ModelSpec& s) { return to_string(s.kind()); })
      .def_property_readonly("dim", &ModelSpec::dim)
      .def_property_readonly("sigma", &ModelSpec::sigma)
      .def_property_readonly("lambda_", &ModelSpec::lambda)
      .def_property_readonly("rescaled", &ModelSpec::rescaled)
      .def_property_readonly("eta", &ModelSpec::eta);

  m.def("preset", &preset_by_name, py::arg("name"));
  m.def("preset_names", &preset_names);
  m.def("rescale_model", &rescale_model);
  m.def("model_constants", &model_constants);

  m.def(
      "main_bound",
      [](const BoundInputs& in, const std::string& variant) { return main_bound(in, parse_main_variant(variant)); },
      py::arg("inputs"), py::arg("variant") = "generic");
  m.def(
      "poc_bound",
      [](const BoundInputs& in, double cbar, double alpha, const std::string& variant) {
        return poc_bound(in, cbar, alpha, parse_poc_variant(variant));
      },
      py::arg("inputs"), py::arg("cbar_pi"), py::arg("alpha"), py::arg("variant") = "generic");
  m.def("lsi_pert_bound", &lsi_pert_bound, py::arg("alpha"), py::arg("L"));
  m.def("lsi_pi_bound", &lsi_pi_bound);
  m.def("winf_bound", &winf_bound, py::arg("alpha"), py::arg("L"));
  m.def("regime_threshold", &regime_threshold);
  m.def("alpha_t", &alpha_t, py::arg("inputs"), py::arg("t"));
  m.def("rescale_parameters", &rescale_parameters);
  m.def(
      "heatflow_lipschitz_bound",
      [](double a, const std::vector<std::pair<double, double>>& terms) {
        std::vector<HeatFlowTerm> ts;
        for (const auto& [C, k] : terms) ts.push_back({C, k});
        return heatflow_lipschitz_bound(a, ts);
      },
      py::arg("a"), py::arg("terms"));
  m.def("heat_flow_integral", &heat_flow_integral, py::arg("alpha"), py::arg("k"));
  m.def("log_term_integral", &log_term_integral, py::arg("alpha"));

  m.def(
      "solve_self_consistent",
      [](const ModelSpec& model, std::size_t nodes, double tol) {
        SolverConfig cfg;
        cfg.tol = tol;
        const auto sys = solve_self_consistent(model, std::nullopt, default_grid(model, std::nullopt, nodes), cfg);
        py::dict d = density_dict(sys.mean_measure);
        d["residual"] = sys.residual;
        d["iterations"] = sys.iterations;
        return d;
      },
      py::arg("model"), py::arg("nodes") = 2049, py::arg("tol") = 1e-9);

  m.def(
      "finite_particle_density",
      [](const ModelSpec& model, std::size_t N, double half_width, std::size_t nodes) {
        return density_dict(density_on_line(model, N, half_width, nodes));
      },
      py::arg("model"), py::arg("N") = 1, py::arg("half_width") = 8.0, py::arg("nodes") = 2049);

  m.def(
      "tilted_covariance",
      [](const ModelSpec& model, double t, double y, double half_width, std::size_t nodes) {
        const GridDensity mu = density_on_line(model, 1, half_width, nodes);
        const double base = 2.0 * model.lambda() / (model.sigma() * model.sigma());
        return tilted_measure(mu, t, Vec::Constant(static_cast<Eigen::Index>(mu.dim()), y), base).covariance();
      },
      py::arg("model"), py::arg("t"), py::arg("y") = 0.0, py::arg("half_width") = 8.0, py::arg("nodes") = 8193);

  m.def(
      "reverse_flow_map",
      [](const ModelSpec& model, double half_width, std::size_t nodes, double t_max, double dt) {
        FlowConfig fc;
        fc.t_max = t_max;
        fc.dt = dt;
        const FlowMap map = reverse_flow_map(density_on_line(model, 1, half_width, nodes), fc);
        py::dict d;
        d["z"] = map.z;
        d["T"] = map.mapped;
        d["lipschitz"] = lipschitz_estimate(map, fc.z_half);
        return d;
      },
      py::arg("model"), py::arg("half_width") = 10.0, py::arg("nodes") = 2049, py::arg("t_max") = 8.0,
      py::arg("dt") = 1e-3);

  m.def(
      "mala_sample",
      [](const ModelSpec& model, std::size_t N, std::size_t n_samples, std::size_t n_burnin, std::uint64_t seed) {
        TargetSpec target{model, N, std::nullopt, false};
        MalaConfig cfg;
        cfg.n_samples = n_samples;
        cfg.n_burnin = n_burnin;
        const MalaResult r = mala_sample(target, cfg, seed, 1);
        Points flat(static_cast<Eigen::Index>(r.samples.size()), static_cast<Eigen::Index>(N * model.dim()));
        for (std::size_t s = 0; s < r.samples.size(); ++s)
          flat.row(static_cast<Eigen::Index>(s)) =
              Eigen::Map<const Eigen::RowVectorXd>(r.samples[s].x.data(), r.samples[s].x.size());
        py::dict d;
        d["samples"] = flat;
        d["acceptance_rate"] = r.diagnostics.acceptance_rate;
        return d;
      },
      py::arg("model"), py::arg("N"), py::arg("n_samples") = 10000, py::arg("n_burnin") = 2000,
      py::arg("seed") = 0);

  m.def(
      "mfld_simulate",
      [](const ModelSpec& model, std::size_t N, double horizon, double step, std::uint64_t seed) {
        MfldConfig cfg;
        cfg.horizon = horizon;
        cfg.step = step;
        const auto traj = mfld_simulate(model, N, cfg, seed);
        return py::make_tuple(traj.times, Points(traj.states.back().x));
      },
      py::arg("model"), py::arg("N"), py::arg("horizon") = 10.0, py::arg("step") = 1e-3, py::arg("seed") = 0);

  m.def(
      "estimate_kl",
      [](const ModelSpec& model, std::size_t N, std::size_t samples, std::size_t pi_draws, std::uint64_t seed) {
        ChaosConfig cfg;
        cfg.mcmc.n_samples = samples;
        cfg.pi_draws = pi_draws;
        return report_dict(estimate_kl(model, N, cfg, seed));
      },
      py::arg("model"), py::arg("N"), py::arg("samples") = 20000, py::arg("pi_draws") = 100000,
      py::arg("seed") = 0);

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& out) {
        const RunResult r = run_experiment(parse_config_text(config_json), out);
        return py::make_tuple(r.all_pass, r.manifest.dump());
      },
      py::arg("config_json"), py::arg("out"));
}
