#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "anchorplace/cli.hpp"

using namespace anchorplace;
using namespace anchorplace::cli;

int main(int argc, char** argv) {
  CLI::App app{"Sparse anchor placement for TOA localization"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  const std::map<std::string, CoveragePoints> points_map{{"worst", CoveragePoints::WorstMargin},
                                                          {"all", CoveragePoints::All}};

  SolveArgs solve;
  std::string method = "reweighted";
  std::string solve_points = "worst";
  std::string dump_program;
  bool verbose = false;
  double gap_tol = 0.0, feas_tol = 0.0;
  int max_iterations = 0;
  auto* s = app.add_subcommand("solve", "Solve a scenario and write result.json");
  s->add_option("scenario", solve.scenario_file, "Scenario file")->required();
  s->add_option("-o,--output-dir", solve.output_dir, "Output directory")->capture_default_str();
  s->add_option("-m,--method", method, "l1 or reweighted")
      ->check(CLI::IsMember({"l1", "reweighted"}))
      ->capture_default_str();
  s->add_option("--epsilon", solve.epsilon, "Reweighting epsilon")->capture_default_str();
  s->add_option("--k-max", solve.k_max, "Maximum reweighted passes")->capture_default_str();
  s->add_option("--draws", solve.draws, "Randomized rounding draws (ows)")->capture_default_str();
  s->add_option("--seed", solve.seed, "Random seed")->capture_default_str();
  s->add_flag("--optimize-sensor-energy", solve.optimize_sensor_energy,
              "Reduce e_s to the smallest feasible value on the rounded selection (ows)");
  s->add_option("--coverage-trials", solve.coverage_trials,
                "Monte-Carlo trials per tested point (0 disables)")
      ->capture_default_str();
  s->add_option("--coverage-points", solve_points, "worst or all")
      ->check(CLI::IsMember({"worst", "all"}))
      ->capture_default_str();
  s->add_option("--dump-program", dump_program, "Write the first cone program in SDPA sparse format");
  s->add_option("--gap-tol", gap_tol, "Solver relative gap tolerance");
  s->add_option("--feas-tol", feas_tol, "Solver feasibility tolerance");
  s->add_option("--max-iterations", max_iterations, "Solver iteration cap");
  s->add_flag("-v,--verbose", verbose, "Print solver iterations");

  VerifyArgs verify;
  std::string verify_points = "worst";
  auto* v = app.add_subcommand("verify", "Monte-Carlo coverage of a placement");
  v->add_option("scenario", verify.scenario_file, "Scenario file")->required();
  v->add_option("result", verify.result_file, "result.json from solve")->required();
  v->add_option("-o,--output-dir", verify.output_dir, "Output directory")->capture_default_str();
  v->add_option("--trials", verify.trials, "Trials per tested point")->capture_default_str();
  v->add_option("--seed", verify.seed, "Random seed")->capture_default_str();
  v->add_option("--points", verify_points, "worst or all")
      ->check(CLI::IsMember({"worst", "all"}))
      ->capture_default_str();

  PlotArgs plot;
  auto* p = app.add_subcommand("plotdata", "Write plot-ready CSV tables from result.json");
  p->add_option("result", plot.result_file, "result.json from solve")->required();
  p->add_option("-o,--output-dir", plot.output_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*s) {
    solve.method = method == "l1" ? Method::L1 : Method::Reweighted;
    solve.coverage_points = points_map.at(solve_points);
    if (!dump_program.empty()) solve.dump_program = dump_program;
    if (s->count("--gap-tol")) solve.gap_tol = gap_tol;
    if (s->count("--feas-tol")) solve.feas_tol = feas_tol;
    if (s->count("--max-iterations")) solve.max_iterations = max_iterations;
    if (verbose) solve.log = &std::cerr;
    return cmd_solve(solve);
  }
  if (*v) {
    verify.points = points_map.at(verify_points);
    return cmd_verify(verify);
  }
  return cmd_plotdata(plot);
}
