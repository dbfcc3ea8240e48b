#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hpstokes/bench.hpp"

using namespace hps;
using bench::RunConfig;

namespace {

std::string temp_path(const char* name) {
  return std::string("bench_test_") + name;
}

std::vector<std::string> non_time_lines(const std::string& path) {
  std::ifstream is(path);
  std::vector<std::string> out;
  std::string line;
  std::vector<int> time_cols;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (time_cols.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i].rfind("t_", 0) == 0) time_cols.push_back(static_cast<int>(i));
    }
    std::string kept;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (std::find(time_cols.begin(), time_cols.end(), static_cast<int>(i)) != time_cols.end())
        continue;
      kept += fields[i];
      kept += '|';
    }
    out.push_back(kept);
  }
  return out;
}

}  // namespace

TEST_CASE("config validation and json override") {
  RunConfig cfg;
  cfg.mesh = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.mesh = 64;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // needs allow_large
  cfg.allow_large = true;
  cfg.schur = "nope";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  RunConfig base;
  bench::merge_json_config(base, nlohmann::json{{"mesh", 16}, {"schur", "fixed"}, {"tol", 1e-6}});
  CHECK(base.mesh == 16);
  CHECK(base.schur == "fixed");
  CHECK(base.tol == 1e-6);
  CHECK(base.degree == 2);  // untouched
}

TEST_CASE("solve records: normalization, divergence residual and determinism") {
  RunConfig cfg;
  cfg.mesh = 4;
  cfg.degree = 2;
  cfg.updates = 1;
  const auto r1 = bench::run_solve(cfg);
  REQUIRE(r1.records.size() == 2);
  CHECK(r1.all_converged);
  CHECK(r1.records[0].t_sol_normalized == 1.0);
  for (const auto& rec : r1.records) {
    CHECK(rec.converged);
    CHECK(rec.div_residual <= 10.0 * cfg.tol);
    CHECK(rec.true_relres <= 10.0 * cfg.tol);
  }
  // One hyper-power update reduces the iteration count.
  CHECK(r1.records[1].n_iter < r1.records[0].n_iter);

  // Two runs with the same config agree bitwise outside the wall-time
  // columns.
  const auto r2 = bench::run_solve(cfg);
  const std::string p1 = temp_path("det1.csv"), p2 = temp_path("det2.csv");
  bench::write_records_csv(p1, r1);
  bench::write_records_csv(p2, r2);
  const auto l1 = non_time_lines(p1), l2 = non_time_lines(p2);
  REQUIRE(l1.size() == l2.size());
  for (std::size_t i = 0; i < l1.size(); ++i) CHECK(l1[i] == l2[i]);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("solve iteration counts are invariant under lid-axis permutation") {
  RunConfig cfg;
  cfg.mesh = 4;
  cfg.degree = 2;
  cfg.updates = 1;
  const auto rz = bench::run_solve(cfg);
  cfg.lid_axis = 1;
  const auto rx = bench::run_solve(cfg);
  for (std::size_t i = 0; i < rz.records.size(); ++i)
    CHECK(rz.records[i].n_iter == rx.records[i].n_iter);
}

TEST_CASE("all three Schur modes drive the solver to convergence") {
  RunConfig cfg;
  cfg.mesh = 4;
  cfg.degree = 2;
  cfg.updates = 2;
  std::map<std::string, std::vector<int>> iters;
  for (const char* mode : {"hat", "fixed", "exact"}) {
    cfg.schur = mode;
    const auto res = bench::run_solve(cfg);
    CHECK(res.all_converged);
    for (const auto& rec : res.records) iters[mode].push_back(rec.n_iter);
  }
  // The updated and fixed sequences coincide through level 1; all modes
  // share level 0; beyond that the fixed sequence cannot beat the updated
  // one.
  for (int k = 0; k <= 1; ++k)
    CHECK(iters["hat"][static_cast<std::size_t>(k)] == iters["fixed"][static_cast<std::size_t>(k)]);
  CHECK(iters["hat"][0] == iters["exact"][0]);
  CHECK(iters["fixed"][2] >= iters["hat"][2]);
}

TEST_CASE("spectra driver emits all four sequences with their checks") {
  RunConfig cfg;
  cfg.mesh = 2;
  cfg.degree = 2;
  cfg.updates = 2;
  const auto result = bench::run_spectra(cfg);
  const auto& doc = result.doc;
  for (const char* seq : {"velocity", "schur_hat", "schur_fixed", "schur_exact"}) {
    REQUIRE(doc["sequences"].contains(seq));
    CHECK(doc["sequences"][seq]["reports"].size() == 3);
  }
  CHECK(doc["sequences"]["velocity"]["theory_pass"].get<bool>());
  CHECK(doc["sequences"]["schur_exact"]["theory_pass"].get<bool>());
  CHECK(doc.contains("checks"));
  CHECK(doc["config"]["mesh"] == 2);
  CHECK(doc["version"] == hps::version);
  // Schur reports drop exactly the constant-pressure null mode.
  for (const auto& rep : doc["sequences"]["schur_exact"]["reports"])
    CHECK(rep["dropped_null_modes"] == 1);
}

TEST_CASE("config rejects more than four updates") {
  RunConfig cfg;
  cfg.updates = 5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("scaling: synthetic kron matvec has flop slope exactly 4/3") {
  const auto res = bench::run_scaling({6, 9, 12}, 2, "kron", 1, 7u);
  CHECK(res.flop_slope == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  for (const auto& row : res.rows) {
    CHECK(row.size == static_cast<Index>(row.mesh) * row.mesh * row.mesh);
    CHECK(row.flops ==
          static_cast<std::uint64_t>(6) * row.mesh * row.mesh * row.mesh * row.mesh);
  }
}

TEST_CASE("scaling: measured level-1 preconditioner flop ratio is close to 4.5") {
  const auto res = bench::run_scaling({6, 8}, 2, "PV1", 1, 8u);
  CHECK(res.ratio_pv1_pv0 == doctest::Approx(4.5).epsilon(0.08));
  CHECK(res.ratio_pv2_pv0 == doctest::Approx(11.5).epsilon(0.08));
}

TEST_CASE("contour: model ratio arithmetic and the break-even narrative") {
  CHECK(bench::model_ratio(1.0, 0.4, 0.4) == doctest::Approx(1.0));
  // A preconditioner costing twice the forward problem must cut iterations
  // by more than 67 percent to break even against a free preconditioner.
  CHECK(bench::model_ratio(0.33, 2.0, 0.0) == doctest::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("contour command consumes solve records and normalizes against level 0") {
  RunConfig cfg;
  cfg.mesh = 4;
  cfg.degree = 2;
  cfg.updates = 2;
  const auto solved = bench::run_solve(cfg);
  const std::string rec_path = temp_path("records.csv");
  bench::write_records_csv(rec_path, solved);

  const auto contour = bench::run_contour(rec_path);
  REQUIRE(contour.points.size() == 3);
  CHECK(contour.points[0].level == 0);
  CHECK(contour.points[0].n_ratio == doctest::Approx(1.0));
  CHECK(contour.points[0].model == doctest::Approx(1.0));
  CHECK(contour.points[1].n_ratio ==
        doctest::Approx(static_cast<double>(solved.records[1].n_iter) /
                        solved.records[0].n_iter));
  CHECK_FALSE(contour.grid.empty());

  const std::string out_path = temp_path("contour.csv");
  bench::write_contour_csv(out_path, contour, bench::to_json(cfg));
  std::ifstream is(out_path);
  std::string first;
  std::getline(is, first);
  CHECK(first.rfind("# hpstokes", 0) == 0);
  std::remove(rec_path.c_str());
  std::remove(out_path.c_str());

  CHECK_THROWS_AS(bench::run_contour("does_not_exist.csv"), std::runtime_error);
}

TEST_CASE("records CSV embeds the config echo and library version") {
  RunConfig cfg;
  cfg.mesh = 2;
  cfg.degree = 2;
  const auto solved = bench::run_solve(cfg);
  const std::string path = temp_path("echo.csv");
  bench::write_records_csv(path, solved);
  std::ifstream is(path);
  std::string l1, l2;
  std::getline(is, l1);
  std::getline(is, l2);
  CHECK(l1.find(hps::version) != std::string::npos);
  CHECK(l2.find("\"mesh\":2") != std::string::npos);
  CHECK(l2.find("\"cpen\":10") != std::string::npos);
  std::remove(path.c_str());
}
