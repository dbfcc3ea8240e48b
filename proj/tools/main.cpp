// Command-line benchmark driver: lid-driven cavity solves with hyper-power
// preconditioner sequences, dense spectra verification, matvec scaling
// studies and solution-time model contours.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpstokes/bench.hpp"

namespace {

using hps::bench::RunConfig;

void add_common_flags(CLI::App* cmd, RunConfig& cfg, std::string& json_config) {
  cmd->add_option("--mesh", cfg.mesh, "elements per direction");
  cmd->add_option("--degree", cfg.degree, "spline degree of the velocity normal direction");
  cmd->add_option("--updates", cfg.updates, "highest hyper-power level k");
  cmd->add_option("--schur", cfg.schur, "Schur sequence: hat | fixed | exact");
  cmd->add_option("--nu", cfg.nu, "viscosity");
  cmd->add_option("--cpen", cfg.cpen, "Nitsche penalty constant (default: calibrated 10)");
  cmd->add_option("--tol", cfg.tol, "relative preconditioned residual tolerance");
  cmd->add_option("--maxit", cfg.maxit, "iteration cap (0: solver default)");
  cmd->add_option("--out", cfg.out, "output file");
  cmd->add_option("--seed", cfg.seed, "seed for randomized probes");
  cmd->add_option("--lid-axis", cfg.lid_axis, "lid face normal axis (1..3)");
  cmd->add_flag("--allow-large", cfg.allow_large, "allow meshes above 32^3");
  cmd->add_option("--json-config", json_config, "JSON file overriding the flags");
}

void apply_json_config(RunConfig& cfg, const std::string& path) {
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  is >> j;
  hps::bench::merge_json_config(cfg, j);
}

int do_solve(RunConfig cfg, const std::string& json_config) {
  apply_json_config(cfg, json_config);
  const auto result = hps::bench::run_solve(cfg);
  std::printf("lid-driven cavity: mesh %d^3, degree %d, schur %s, cpen %g, tol %g\n", cfg.mesh,
              cfg.degree, cfg.schur.c_str(), cfg.penalty(), cfg.tol);
  for (const auto& r : result.records)
    std::printf(
        "  k=%d  iters %4d  %s  T_sol %.4fs  normalized %.3f  |Btu|/|b| %.2e  |Btu|/|u| %.2e\n",
        r.level, r.n_iter, r.converged ? "converged" : "NOT CONVERGED", r.t_sol_sec,
        r.t_sol_normalized, r.div_residual, r.div_residual_rel_u);
  if (!cfg.out.empty()) {
    hps::bench::write_records_csv(cfg.out, result);
    std::printf("records written to %s\n", cfg.out.c_str());
  }
  return result.all_converged ? 0 : 1;
}

int do_spectra(RunConfig cfg, const std::string& json_config) {
  apply_json_config(cfg, json_config);
  if (cfg.updates == 0) cfg.updates = 4;
  const auto result = hps::bench::run_spectra(cfg);
  for (const auto& [name, seq] : result.doc["sequences"].items()) {
    if (!seq.contains("theory")) continue;
    std::printf("%s:\n", name.c_str());
    for (const auto& c : seq["theory"])
      std::printf("  [%s] %s: %s\n", c["pass"].get<bool>() ? "ok" : "FAIL",
                  c["name"].get<std::string>().c_str(), c["detail"].get<std::string>().c_str());
  }
  std::printf("checks: hat-vs-exact max deviation %.3g (%s), fixed-kappa pattern %s\n",
              result.doc["checks"]["hat_vs_exact_max_relative_deviation"].get<double>(),
              result.doc["checks"]["hat_vs_exact_within_5_percent"].get<bool>() ? "ok" : "FAIL",
              result.doc["checks"]["fixed_kappa_improves_only_first_three"].get<bool>()
                  ? "ok"
                  : "FAIL");
  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out);
    os << result.doc.dump(2) << "\n";
    std::printf("spectra written to %s\n", cfg.out.c_str());
  }
  return result.ok ? 0 : 1;
}

int do_scaling(RunConfig cfg, const std::string& json_config, std::vector<int> meshes,
               const std::string& op_name, int reps) {
  apply_json_config(cfg, json_config);
  if (meshes.empty()) meshes = {8, 12, 16};
  const auto result =
      hps::bench::run_scaling(meshes, cfg.degree, op_name, reps, cfg.seed, cfg.allow_large);
  std::printf("scaling of %s matvec (degree %d):\n", op_name.c_str(), cfg.degree);
  for (const auto& r : result.rows)
    std::printf("  mesh %3d  size %8td  flops %12llu  t %.3e s\n", r.mesh, r.size,
                static_cast<unsigned long long>(r.flops), r.seconds);
  std::printf("  log-log slope: time %.4f, flops %.4f\n", result.time_slope, result.flop_slope);
  if (result.ratio_pv1_pv0 > 0.0)
    std::printf("  measured flop ratios vs level 0: k=1 %.3f, k=2 %.3f\n", result.ratio_pv1_pv0,
                result.ratio_pv2_pv0);
  if (!cfg.out.empty()) {
    auto echo = hps::bench::to_json(cfg);
    echo["meshes"] = meshes;
    echo["op"] = op_name;
    echo["reps"] = reps;
    hps::bench::write_scaling_csv(cfg.out, result, echo);
    std::printf("scaling table written to %s\n", cfg.out.c_str());
  }
  return 0;
}

int do_contour(RunConfig cfg, const std::string& json_config, const std::string& records) {
  apply_json_config(cfg, json_config);
  const auto result = hps::bench::run_contour(records);
  std::printf("solution-time model points (reference: level 0):\n");
  for (const auto& p : result.points)
    std::printf("  k=%d  Tp/Tf %.3f  N-ratio %.3f  model %.3f  measured %.3f\n", p.level,
                p.tp_over_tf, p.n_ratio, p.model, p.measured);
  if (!cfg.out.empty()) {
    auto echo = hps::bench::to_json(cfg);
    echo["records"] = records;
    hps::bench::write_contour_csv(cfg.out, result, echo);
    std::printf("contour grid written to %s\n", cfg.out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hpstokes: hyper-power preconditioner benchmarks for isogeometric Stokes"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string json_config;
  std::vector<int> meshes;
  std::string op_name = "saddle";
  int reps = 5;
  std::string records;

  auto* solve = app.add_subcommand("solve", "solve the lid-driven cavity benchmark");
  add_common_flags(solve, cfg, json_config);

  auto* spectra = app.add_subcommand("spectra", "dense spectra of all preconditioner sequences");
  add_common_flags(spectra, cfg, json_config);

  auto* scaling = app.add_subcommand("scaling", "matvec scaling study");
  scaling->add_option("--mesh", meshes, "mesh list (repeatable)");
  scaling->add_option("--degree", cfg.degree, "spline degree");
  scaling->add_option("--op", op_name, "operator: kron | A | saddle | PV0 | PV1 | PV2");
  scaling->add_option("--reps", reps, "repetitions per timing");
  scaling->add_option("--out", cfg.out, "output CSV");
  scaling->add_option("--seed", cfg.seed, "seed for the synthetic kron factors");
  scaling->add_flag("--allow-large", cfg.allow_large, "allow meshes above 32^3");
  scaling->add_option("--json-config", json_config, "JSON file overriding the flags");

  auto* contour = app.add_subcommand("contour", "solution-time model contour from solve records");
  contour->add_option("--records", records, "records CSV from the solve subcommand")->required();
  contour->add_option("--out", cfg.out, "output CSV");
  contour->add_option("--json-config", json_config, "JSON file overriding the flags");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return do_solve(cfg, json_config);
    if (spectra->parsed()) {
      // Desk-scale verification defaults.
      if (spectra->count("--mesh") == 0) cfg.mesh = 2;
      if (spectra->count("--degree") == 0) cfg.degree = 4;
      return do_spectra(cfg, json_config);
    }
    if (scaling->parsed()) return do_scaling(cfg, json_config, meshes, op_name, reps);
    if (contour->parsed()) return do_contour(cfg, json_config, records);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
