#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpstokes/krylov.hpp"
#include "hpstokes/precond.hpp"
#include "hpstokes/spectral.hpp"
#include "hpstokes/stokes.hpp"
#include "hpstokes/version.hpp"

namespace hps::bench {

struct RunConfig {
  int mesh = 8;
  int degree = 2;
  int updates = 0;         // highest hyper-power level k
  std::string schur = "hat";  // hat | fixed | exact
  double nu = 1.0;
  double cpen = 0.0;       // <= 0 selects the calibrated default
  double tol = 1e-8;
  long maxit = 0;          // 0 selects the solver default
  std::string out;
  unsigned seed = 12345;
  int lid_axis = 3;        // 1-based
  bool allow_large = false;

  double penalty() const { return cpen > 0.0 ? cpen : stokes::default_penalty(degree); }

  stokes::LidConfig lid() const {
    stokes::LidConfig l;
    l.axis = lid_axis - 1;
    // The driving velocity rotates with the lid axis so any axis choice
    // poses the same (permuted) problem.
    l.velocity = {0.0, 0.0, 0.0};
    l.velocity[static_cast<std::size_t>((l.axis + 1) % 3)] = 1.0;
    return l;
  }

  void validate() const {
    if (mesh < 2) throw std::invalid_argument("config: mesh >= 2 required");
    if (degree < 2) throw std::invalid_argument("config: degree >= 2 required");
    if (updates < 0 || updates > 4) throw std::invalid_argument("config: updates in 0..4");
    if (schur != "hat" && schur != "fixed" && schur != "exact")
      throw std::invalid_argument("config: schur must be hat, fixed or exact");
    if (nu <= 0.0) throw std::invalid_argument("config: nu > 0 required");
    if (tol <= 0.0) throw std::invalid_argument("config: tol > 0 required");
    if (lid_axis < 1 || lid_axis > 3) throw std::invalid_argument("config: lid-axis in 1..3");
    if (mesh > 32 && !allow_large)
      throw std::invalid_argument(
          "config: meshes above 32^3 need --allow-large (memory and minutes)");
    if (degree > 8) throw std::invalid_argument("config: degree <= 8 supported");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"mesh", c.mesh},     {"degree", c.degree},   {"updates", c.updates},
                        {"schur", c.schur},   {"nu", c.nu},           {"cpen", c.penalty()},
                        {"tol", c.tol},       {"maxit", c.maxit},     {"out", c.out},
                        {"seed", c.seed},     {"lid_axis", c.lid_axis},
                        {"allow_large", c.allow_large}};
}

/// Fields present in the JSON file override the current values.
inline void merge_json_config(RunConfig& c, const nlohmann::json& j) {
  if (j.contains("mesh")) c.mesh = j["mesh"].get<int>();
  if (j.contains("degree")) c.degree = j["degree"].get<int>();
  if (j.contains("updates")) c.updates = j["updates"].get<int>();
  if (j.contains("schur")) c.schur = j["schur"].get<std::string>();
  if (j.contains("nu")) c.nu = j["nu"].get<double>();
  if (j.contains("cpen")) c.cpen = j["cpen"].get<double>();
  if (j.contains("tol")) c.tol = j["tol"].get<double>();
  if (j.contains("maxit")) c.maxit = j["maxit"].get<long>();
  if (j.contains("out")) c.out = j["out"].get<std::string>();
  if (j.contains("seed")) c.seed = j["seed"].get<unsigned>();
  if (j.contains("lid_axis")) c.lid_axis = j["lid_axis"].get<int>();
  if (j.contains("allow_large")) c.allow_large = j["allow_large"].get<bool>();
}

struct BenchRecord {
  int level = 0;
  int n_iter = 0;
  bool converged = false;
  double t_sol_sec = 0.0;
  double t_sol_normalized = 1.0;
  double t_forward_apply_sec = 0.0;
  double t_precond_apply_sec = 0.0;
  std::uint64_t flops_forward_apply = 0;
  std::uint64_t flops_precond_apply = 0;
  double cost_c_p = 0.0;  // measured flops(P_V0) / n_V^{4/3}
  double cost_c_a = 0.0;  // measured flops(A)    / n_V^{4/3}
  double div_residual = 0.0;         // ||B^T u|| / ||b||, the continuity residual
  double div_residual_rel_u = 0.0;   // ||B^T u|| / ||u|| for reference
  double pressure_mean_shift = 0.0;
  double precond_relres = 0.0;
  double true_relres = 0.0;
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Best-of-N per-call time, with each sample stretched over enough calls to
/// dominate timer resolution and scheduler noise.
inline double median_seconds(const std::function<void()>& f, int reps,
                             double min_sample_seconds = 0.02) {
  f();  // warmup
  auto time_once = [&](int inner) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < inner; ++i) f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / inner;
  };
  const double probe = time_once(1);
  const int inner =
      std::max(1, std::min(2000, static_cast<int>(min_sample_seconds / std::max(probe, 1e-9))));
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, reps); ++r) best = std::min(best, time_once(inner));
  return best;
}

inline std::vector<OpPtr> build_schur_sequence(const stokes::StokesSystem& sys,
                                               const std::vector<OpPtr>& seq_v, int k,
                                               const std::string& mode) {
  if (mode == "hat") return precond::schur_sequence_updated(sys, seq_v, k);
  if (mode == "fixed") return precond::schur_sequence_fixed(sys, k, seq_v[0]);
  return precond::schur_sequence_exact(sys, k);
}

}  // namespace detail

struct SolveResult {
  RunConfig config;
  std::vector<BenchRecord> records;
  bool all_converged = true;
};

/// Assembles the lid-driven cavity system, builds the block-diagonal
/// hyper-power preconditioners for levels 0..updates and solves each with
/// MINRES. Solution times are normalized by the level-0 run of the same
/// session.
inline SolveResult run_solve(const RunConfig& cfg) {
  cfg.validate();
  SolveResult out;
  out.config = cfg;

  auto space = stokes::build_space(cfg.mesh, cfg.degree);
  const stokes::StokesSystem sys =
      stokes::assemble_system(space, cfg.nu, cfg.penalty(), cfg.lid());

  auto seq_v = precond::velocity_sequence(sys, cfg.updates);
  auto seq_q = detail::build_schur_sequence(sys, seq_v, cfg.updates, cfg.schur);

  Vec b(static_cast<std::size_t>(sys.n_total()), 0.0);
  std::copy(sys.rhs.begin(), sys.rhs.end(), b.begin());

  const std::size_t nv = static_cast<std::size_t>(sys.n_velocity());
  const double n43 = std::pow(static_cast<double>(sys.n_velocity()), 4.0 / 3.0);
  Vec probe(nv, 1.0), sink(nv);
  const std::uint64_t flops_pv0 = flops::measure([&] { seq_v[0]->apply(probe, sink); });
  const std::uint64_t flops_a = flops::measure([&] { sys.velocity_op->apply(probe, sink); });

  const long maxit = cfg.maxit > 0 ? cfg.maxit : -1;
  double t_ref = 0.0;
  for (int k = 0; k <= cfg.updates; ++k) {
    auto pk = precond::block_diag_precond(seq_v[static_cast<std::size_t>(k)],
                                          seq_q[static_cast<std::size_t>(k)]);

    BenchRecord rec;
    rec.level = k;

    Vec zin(static_cast<std::size_t>(sys.n_total()), 1.0), zout(zin.size());
    rec.flops_forward_apply = flops::measure([&] { sys.saddle_op->apply(zin, zout); });
    rec.flops_precond_apply = flops::measure([&] { pk->apply(zin, zout); });
    rec.t_forward_apply_sec =
        detail::median_seconds([&] { sys.saddle_op->apply(zin, zout); }, 3);
    rec.t_precond_apply_sec = detail::median_seconds([&] { pk->apply(zin, zout); }, 3);
    rec.cost_c_p = static_cast<double>(flops_pv0) / n43;
    rec.cost_c_a = static_cast<double>(flops_a) / n43;

    auto res = krylov::minres(*sys.saddle_op, *pk, b, cfg.tol, maxit);
    rec.n_iter = res.stats.iterations;
    rec.converged = res.stats.converged;
    rec.t_sol_sec = res.stats.wall_seconds;
    if (k == 0) t_ref = rec.t_sol_sec;
    rec.t_sol_normalized = (k == 0) ? 1.0 : rec.t_sol_sec / t_ref;
    rec.precond_relres = res.stats.final_relative_residual;
    rec.true_relres = res.stats.true_relative_residual;

    std::span<double> u(res.x.data(), nv);
    std::span<double> p(res.x.data() + nv, static_cast<std::size_t>(sys.n_pressure()));
    const Vec btu = sys.divergence_t->apply(u);
    const double un = norm2(u);
    const double bn = norm2(b);
    rec.div_residual = bn > 0.0 ? norm2(btu) / bn : 0.0;
    rec.div_residual_rel_u = un > 0.0 ? norm2(btu) / un : 0.0;
    rec.pressure_mean_shift = stokes::normalize_pressure_mean(*space, p);

    out.all_converged = out.all_converged && rec.converged;
    out.records.push_back(rec);
  }
  return out;
}

inline void write_records_csv(const std::string& path, const SolveResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << "# hpstokes " << version << "\n";
  os << "# config " << to_json(result.config).dump() << "\n";
  os << "mesh,degree,level,schur,n_velocity,n_pressure,n_iter,converged,"
        "t_sol_sec,t_sol_normalized,t_forward_apply_sec,t_precond_apply_sec,"
        "flops_forward_apply,flops_precond_apply,cost_c_p,cost_c_a,"
        "div_residual,div_residual_rel_u,pressure_mean_shift,precond_relres,true_relres\n";
  const auto& c = result.config;
  const Index nv = 3 * (static_cast<Index>(c.mesh) + c.degree - 2) *
                   (c.mesh + c.degree - 1) * (c.mesh + c.degree - 1);
  const Index nq = static_cast<Index>(c.mesh + c.degree - 1) * (c.mesh + c.degree - 1) *
                   (c.mesh + c.degree - 1);
  for (const auto& r : result.records) {
    os << c.mesh << ',' << c.degree << ',' << r.level << ',' << c.schur << ',' << nv << ','
       << nq << ',' << r.n_iter << ',' << (r.converged ? 1 : 0) << ','
       << detail::num(r.t_sol_sec) << ',' << detail::num(r.t_sol_normalized) << ','
       << detail::num(r.t_forward_apply_sec) << ',' << detail::num(r.t_precond_apply_sec) << ','
       << r.flops_forward_apply << ',' << r.flops_precond_apply << ','
       << detail::num(r.cost_c_p) << ',' << detail::num(r.cost_c_a) << ','
       << detail::num(r.div_residual) << ',' << detail::num(r.div_residual_rel_u) << ','
       << detail::num(r.pressure_mean_shift) << ',' << detail::num(r.precond_relres) << ','
       << detail::num(r.true_relres) << '\n';
  }
}

struct SpectraResult {
  nlohmann::json doc;
  bool ok = true;
};

/// Dense desk-scale spectra of all four preconditioner sequences (velocity
/// and the three Schur variants), with the theory checks appropriate to
/// each: the velocity and exact-Schur recursions use their true operator and
/// get the full suite; the updated (hat) sequence is checked for positive
/// definiteness, strictly decreasing condition numbers and closeness to the
/// exact sequence; the fixed sequence for its early-stall pattern.
inline SpectraResult run_spectra(const RunConfig& cfg) {
  cfg.validate();
  auto space = stokes::build_space(cfg.mesh, cfg.degree);
  const stokes::StokesSystem sys =
      stokes::assemble_system(space, cfg.nu, cfg.penalty(), cfg.lid());
  if (sys.n_velocity() > 5000)
    throw std::invalid_argument("spectra: configuration too large for dense verification");

  const int k = std::max(1, cfg.updates);
  auto seq_v = precond::velocity_sequence(sys, k);
  auto seq_hat = precond::schur_sequence_updated(sys, seq_v, k);
  auto seq_fixed = precond::schur_sequence_fixed(sys, k, seq_v[0]);
  auto seq_exact = precond::schur_sequence_exact(sys, k);

  const DenseMatrix a = materialize(sys.velocity_op);
  const DenseMatrix b = materialize(sys.divergence_op);
  auto la = cholesky_factor(symmetrized(a));
  if (!la) throw std::runtime_error("spectra: velocity block not SPD");
  // True Schur complement B^T A^{-1} B.
  DenseMatrix s_true(sys.n_pressure(), sys.n_pressure());
  {
    Vec col(static_cast<std::size_t>(sys.n_velocity()));
    for (Index j = 0; j < sys.n_pressure(); ++j) {
      for (Index i = 0; i < sys.n_velocity(); ++i)
        col[static_cast<std::size_t>(i)] = b(i, j);
      const Vec ainv_col = cholesky_solve(*la, col);
      for (Index i = 0; i < sys.n_pressure(); ++i) {
        double sum = 0.0;
        for (Index r = 0; r < sys.n_velocity(); ++r)
          sum += b(r, i) * ainv_col[static_cast<std::size_t>(r)];
        s_true(i, j) = sum;
      }
    }
    s_true = symmetrized(s_true);
  }

  auto reports_for = [&](const std::vector<OpPtr>& seq, const DenseMatrix& target,
                         double null_tol) {
    std::vector<spectral::SpectrumReport> reps;
    for (int lvl = 0; lvl <= k; ++lvl)
      reps.push_back(spectral::generalized_spectrum(
          target, materialize(seq[static_cast<std::size_t>(lvl)]), lvl, null_tol));
    spectral::annotate_predictions(reps);
    return reps;
  };

  const auto rep_v = reports_for(seq_v, a, 0.0);
  const auto rep_hat = reports_for(seq_hat, s_true, 1e-10);
  const auto rep_fixed = reports_for(seq_fixed, s_true, 1e-10);
  const auto rep_exact = reports_for(seq_exact, s_true, 1e-10);

  SpectraResult out;
  nlohmann::json& doc = out.doc;
  doc["version"] = version;
  doc["config"] = to_json(cfg);

  auto emit = [&](const char* name, const std::vector<spectral::SpectrumReport>& reps,
                  const spectral::TheoryReport* theory) {
    nlohmann::json seq_json;
    for (const auto& r : reps) seq_json["reports"].push_back(spectral::to_json(r));
    if (theory) {
      seq_json["theory_pass"] = theory->all_pass;
      for (const auto& c : theory->checks)
        seq_json["theory"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
      out.ok = out.ok && theory->all_pass;
    }
    doc["sequences"][name] = std::move(seq_json);
  };

  const auto theory_v = spectral::verify_theory(rep_v);
  const auto theory_exact = spectral::verify_theory(rep_exact);
  spectral::TheoryOptions hat_opt;
  hat_opt.check_unit_bound = false;  // its recursion operator is not the true Schur complement
  hat_opt.check_lmap = false;
  const auto theory_hat = spectral::verify_theory(rep_hat, hat_opt);

  emit("velocity", rep_v, &theory_v);
  emit("schur_hat", rep_hat, &theory_hat);
  emit("schur_exact", rep_exact, &theory_exact);
  emit("schur_fixed", rep_fixed, nullptr);

  // Hat vs exact: sorted eigenvalues deviate by at most 5 percent.
  {
    double worst = 0.0;
    for (int lvl = 0; lvl <= k; ++lvl) {
      const auto& eh = rep_hat[static_cast<std::size_t>(lvl)].eigenvalues;
      const auto& ee = rep_exact[static_cast<std::size_t>(lvl)].eigenvalues;
      if (eh.size() != ee.size()) {
        worst = 1.0;
        break;
      }
      for (std::size_t i = 0; i < eh.size(); ++i)
        worst = std::max(worst, std::abs(eh[i] - ee[i]) / std::abs(ee[i]));
    }
    doc["checks"]["hat_vs_exact_max_relative_deviation"] = worst;
    const bool pass = worst <= 0.05;
    doc["checks"]["hat_vs_exact_within_5_percent"] = pass;
    out.ok = out.ok && pass;
  }

  // Fixed sequence: the condition number improves for the first three
  // updates only.
  {
    nlohmann::json kappas;
    for (const auto& r : rep_fixed) kappas.push_back(r.kappa);
    doc["checks"]["fixed_kappa"] = kappas;
    bool pass = true;
    for (int lvl = 1; lvl <= std::min(3, k); ++lvl)
      pass = pass && rep_fixed[static_cast<std::size_t>(lvl)].kappa <
                         rep_fixed[static_cast<std::size_t>(lvl - 1)].kappa;
    if (k >= 4)
      pass = pass && !(rep_fixed[4].kappa < rep_fixed[3].kappa);
    doc["checks"]["fixed_kappa_improves_only_first_three"] = pass;
    out.ok = out.ok && pass;
  }

  doc["ok"] = out.ok;
  return out;
}

struct ScalingRow {
  int mesh = 0;
  Index size = 0;
  std::uint64_t flops = 0;
  double seconds = 0.0;
};

struct ScalingResult {
  std::string op;
  int degree = 0;
  std::vector<ScalingRow> rows;
  double time_slope = 0.0;
  double flop_slope = 0.0;
  double ratio_pv1_pv0 = 0.0;  // measured flop ratios on the largest mesh
  double ratio_pv2_pv0 = 0.0;
};

/// Times matrix-vector products of the selected operator over a list of
/// meshes and fits log-log slopes against the operator size, on wall time
/// (median of reps) and on exact counted flops.
inline ScalingResult run_scaling(const std::vector<int>& meshes, int degree,
                                 const std::string& op_name, int reps, unsigned seed,
                                 bool allow_large = false) {
  if (meshes.size() < 2) throw std::invalid_argument("scaling: need at least two meshes");
  ScalingResult out;
  out.op = op_name;
  out.degree = degree;

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;

  for (int m : meshes) {
    OpPtr op;
    if (op_name == "kron") {
      std::vector<DenseMatrix> factors;
      for (int d = 0; d < 3; ++d) {
        DenseMatrix f(m, m);
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < m; ++j) f(i, j) = dist(gen);
        factors.push_back(std::move(f));
      }
      op = kron::make_kron(std::move(factors));
    } else {
      RunConfig cfg;
      cfg.mesh = m;
      cfg.degree = degree;
      cfg.allow_large = allow_large;
      cfg.validate();
      auto space = stokes::build_space(m, degree);
      const stokes::StokesSystem sys =
          stokes::assemble_system(space, 1.0, stokes::default_penalty(degree), {});
      if (op_name == "A") {
        op = sys.velocity_op;
      } else if (op_name == "saddle") {
        op = sys.saddle_op;
      } else if (op_name == "PV0" || op_name == "PV1" || op_name == "PV2") {
        const int k = op_name.back() - '0';
        auto seq = precond::velocity_sequence(sys, k, 1.0, false);
        op = seq[static_cast<std::size_t>(k)];

        Vec x(static_cast<std::size_t>(seq[0]->cols()), 1.0), y(x.size());
        const auto f0 = flops::measure([&] { seq[0]->apply(x, y); });
        if (k >= 1) {
          auto seq2 = precond::velocity_sequence(sys, 2, 1.0, false);
          const auto f1 = flops::measure([&] { seq2[1]->apply(x, y); });
          const auto f2 = flops::measure([&] { seq2[2]->apply(x, y); });
          out.ratio_pv1_pv0 = static_cast<double>(f1) / static_cast<double>(f0);
          out.ratio_pv2_pv0 = static_cast<double>(f2) / static_cast<double>(f0);
        }
      } else {
        throw std::invalid_argument("scaling: unknown operator " + op_name);
      }
    }

    ScalingRow row;
    row.mesh = m;
    row.size = op->rows();
    Vec x(static_cast<std::size_t>(op->cols()), 1.0), y(static_cast<std::size_t>(op->rows()));
    row.flops = flops::measure([&] { op->apply(x, y); });
    row.seconds = detail::median_seconds([&] { op->apply(x, y); }, reps, 0.05);
    out.rows.push_back(row);
  }

  auto slope = [&](auto value_of) {
    // Least squares fit of log(value) against log(size).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(out.rows.size());
    for (const auto& r : out.rows) {
      const double lx = std::log(static_cast<double>(r.size));
      const double ly = std::log(value_of(r));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  out.time_slope = slope([](const ScalingRow& r) { return r.seconds; });
  out.flop_slope = slope([](const ScalingRow& r) { return static_cast<double>(r.flops); });
  return out;
}

inline void write_scaling_csv(const std::string& path, const ScalingResult& result,
                              const nlohmann::json& config_echo) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << "# hpstokes " << version << "\n";
  os << "# config " << config_echo.dump() << "\n";
  os << "# time_slope " << detail::num(result.time_slope) << " flop_slope "
     << detail::num(result.flop_slope) << "\n";
  os << "op,degree,mesh,size,flops,t_matvec_sec\n";
  for (const auto& r : result.rows)
    os << result.op << ',' << result.degree << ',' << r.mesh << ',' << r.size << ',' << r.flops
       << ',' << detail::num(r.seconds) << '\n';
}

/// Solution-time model of one preconditioned iteration: relative to a
/// reference run, T ~ (N/N_ref) (1 + Tp/Tf) / (1 + Tp_ref/Tf).
inline double model_ratio(double n_ratio, double tp_over_tf, double tp_ref_over_tf) {
  return n_ratio * (1.0 + tp_over_tf) / (1.0 + tp_ref_over_tf);
}

struct ContourResult {
  std::vector<std::array<double, 3>> grid;  // tp/tf, n-ratio, model ratio
  struct Point {
    int level;
    double tp_over_tf;
    double n_ratio;
    double model;
    double measured;
  };
  std::vector<Point> points;
};

/// Builds the cost-model contour grid and the measured data points from a
/// records CSV produced by run_solve. The level-0 row is the reference.
inline ContourResult run_contour(const std::string& records_csv) {
  std::ifstream is(records_csv);
  if (!is) throw std::runtime_error("contour: cannot open " + records_csv);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (header.empty()) {
      header = fields;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i)
      row[header[i]] = fields[i];
    rows.push_back(std::move(row));
  }

  ContourResult out;
  std::ptrdiff_t ref_idx = -1;
  for (const auto& row : rows) {
    ContourResult::Point p;
    p.level = std::stoi(row.at("level"));
    const double tf = std::stod(row.at("t_forward_apply_sec"));
    const double tp = std::stod(row.at("t_precond_apply_sec"));
    p.tp_over_tf = tp / tf;
    p.n_ratio = std::stod(row.at("n_iter"));
    p.measured = std::stod(row.at("t_sol_normalized"));
    p.model = 0.0;
    if (p.level == 0) ref_idx = static_cast<std::ptrdiff_t>(out.points.size());
    out.points.push_back(p);
  }
  if (ref_idx < 0) throw std::runtime_error("contour: no level-0 reference record in input");

  const double n_ref = out.points[static_cast<std::size_t>(ref_idx)].n_ratio;
  const double tp_ref = out.points[static_cast<std::size_t>(ref_idx)].tp_over_tf;
  for (auto& p : out.points) {
    p.n_ratio /= n_ref;
    p.model = model_ratio(p.n_ratio, p.tp_over_tf, tp_ref);
  }

  for (int ix = 0; ix <= 40; ++ix)
    for (int iy = 1; iy <= 20; ++iy) {
      const double x = 10.0 * ix / 40.0;
      const double y = iy / 20.0;
      out.grid.push_back({x, y, model_ratio(y, x, tp_ref)});
    }
  return out;
}

inline void write_contour_csv(const std::string& path, const ContourResult& result,
                              const nlohmann::json& config_echo) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << "# hpstokes " << version << "\n";
  os << "# config " << config_echo.dump() << "\n";
  os << "type,level,tp_over_tf,n_iter_ratio,model_ratio,measured_ratio\n";
  for (const auto& g : result.grid)
    os << "grid,," << detail::num(g[0]) << ',' << detail::num(g[1]) << ',' << detail::num(g[2])
       << ",\n";
  for (const auto& p : result.points)
    os << "point," << p.level << ',' << detail::num(p.tp_over_tf) << ','
       << detail::num(p.n_ratio) << ',' << detail::num(p.model) << ','
       << detail::num(p.measured) << '\n';
}

}  // namespace hps::bench
