#pragma once

// Command implementations behind the anchorplace executable. Each returns a
// process exit code and writes diagnostics to `err`.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "anchorplace/cone_program.hpp"
#include "anchorplace/errors.hpp"
#include "anchorplace/oracle.hpp"
#include "anchorplace/placement_owa.hpp"
#include "anchorplace/placement_ows.hpp"
#include "anchorplace/ranging_model.hpp"
#include "anchorplace/scenario.hpp"
#include "anchorplace/verify_mc.hpp"
#include "json.hpp"

namespace anchorplace::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kResultFormat = "anchorplace-result/1";
inline constexpr const char* kCoverageFormat = "anchorplace-coverage/1";

enum ExitCode : int {
  kOk = 0,
  kInfeasible = 2,
  kSolverFailure = 3,
  kIoError = 4,
  kUsage = 5,
};

enum class Method { L1, Reweighted };

struct SolveArgs {
  std::filesystem::path scenario_file;
  std::filesystem::path output_dir = ".";
  Method method = Method::Reweighted;
  double epsilon = 1e-8;
  int k_max = 15;
  int draws = 500;
  std::uint64_t seed = 1;
  bool optimize_sensor_energy = false;
  int coverage_trials = 0;  // 0: no coverage report
  CoveragePoints coverage_points = CoveragePoints::WorstMargin;
  std::optional<std::filesystem::path> dump_program;
  std::optional<double> gap_tol;
  std::optional<double> feas_tol;
  std::optional<int> max_iterations;
  std::ostream* log = nullptr;  // solver iteration log
};

struct VerifyArgs {
  std::filesystem::path scenario_file;
  std::filesystem::path result_file;
  std::filesystem::path output_dir = ".";
  int trials = 2000;
  std::uint64_t seed = 1;
  CoveragePoints points = CoveragePoints::WorstMargin;
};

struct PlotArgs {
  std::filesystem::path result_file;
  std::filesystem::path output_dir = ".";
};

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline ordered_json header(const Scenario& s, const char* format, std::uint64_t seed,
                           ordered_json parameters) {
  ordered_json j;
  j["format"] = format;
  j["tool_version"] = kToolVersion;
  j["created_utc"] = utc_now();
  j["scenario_hash"] = scenario_hash(s);
  j["seed"] = seed;
  j["parameters"] = std::move(parameters);
  return j;
}

inline ordered_json feasibility_json(const FeasibilityReport& rep, const Scenario& s) {
  ordered_json f;
  f["lambda_per_m2"] = rep.threshold;
  f["margin_per_m2"] = rep.margin;
  f["relative_margin"] = rep.margin / rep.threshold;
  f["feasible"] = rep.feasible();
  f["worst_sensor_index"] = rep.worst_sensor_index;
  if (rep.worst_sensor_index >= 0) {
    const Vec2& p = s.sensor_points[rep.worst_sensor_index];
    f["worst_sensor_point_m"] = {p.x(), p.y()};
  }
  f["min_eig_by_sensor"] = vec_json(rep.min_eig_by_sensor);
  return f;
}

inline ordered_json trace_json(const std::vector<IterationRecord>& trace) {
  ordered_json a = ordered_json::array();
  for (const auto& r : trace) {
    ordered_json t;
    t["iteration"] = r.iteration;
    t["objective"] = r.objective;
    t["weighted_objective"] = r.weighted_objective;
    t["support_size"] = r.support_size;
    t["status"] = to_string(r.status);
    t["solver_iterations"] = r.solver_iterations;
    t["duality_gap"] = r.duality_gap;
    a.push_back(std::move(t));
  }
  return a;
}

inline ordered_json solver_json(const SolveOutcome& o) {
  ordered_json j;
  j["status"] = to_string(o.status);
  j["iterations"] = o.iterations;
  j["duality_gap"] = o.duality_gap;
  j["primal_residual"] = o.primal_residual;
  j["dual_residual"] = o.dual_residual;
  j["primal_objective"] = o.primal_objective;
  j["dual_objective"] = o.dual_objective;
  return j;
}

inline ordered_json coverage_json(const CoverageReport& c) {
  ordered_json j;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["sensor_indices"] = c.sensor_indices;
  j["per_sensor_coverage"] = c.per_sensor_coverage;
  j["worst_coverage"] = c.worst_coverage;
  j["estimator_divergences"] = c.estimator_divergences;
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::ios_base::failure("cannot create output directory '" + dir.string() + "'");
  }
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline const char* points_name(CoveragePoints p) { return p == CoveragePoints::All ? "all" : "worst"; }

/// Runs the library-side error mapping around a command body.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InfeasibleScenarioError& e) {
    err << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const ValidationError& e) {
    err << "error: invalid input: " << e.what() << "\n";
    return kIoError;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kIoError;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
}

}  // namespace detail

inline int cmd_solve(const SolveArgs& args, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  using detail::ordered_json;
  if (args.k_max < 1 || !(args.epsilon > 0.0) || args.draws < 1 || args.coverage_trials < 0) {
    err << "error: k_max, draws must be >= 1, epsilon > 0, coverage trials >= 0\n";
    return kUsage;
  }
  return detail::guarded(err, [&]() -> int {
    const Scenario scenario = load_scenario(args.scenario_file);
    const int k_max = args.method == Method::L1 ? 1 : args.k_max;

    ReweightOptions options = scenario.mode == Mode::OwS ? lifted_options() : ReweightOptions{};
    options.epsilon = args.epsilon;
    options.k_max = k_max;
    if (args.gap_tol) options.solver.gap_tol = *args.gap_tol;
    if (args.feas_tol) options.solver.feas_tol = *args.feas_tol;
    if (args.max_iterations) options.solver.max_iterations = *args.max_iterations;
    options.solver.log = args.log;

    ordered_json params;
    params["method"] = args.method == Method::L1 ? "l1" : "reweighted";
    params["epsilon"] = args.epsilon;
    params["k_max"] = k_max;
    params["support_tol"] = options.support_tol;
    params["objective_rtol"] = options.objective_rtol;
    params["gap_tol"] = options.solver.gap_tol;
    params["feas_tol"] = options.solver.feas_tol;
    params["max_iterations"] = options.solver.max_iterations;
    if (scenario.mode == Mode::OwS) {
      params["draws"] = args.draws;
      params["optimize_sensor_energy"] = args.optimize_sensor_energy;
    }
    params["coverage_trials"] = args.coverage_trials;
    params["coverage_points"] = detail::points_name(args.coverage_points);

    detail::ensure_dir(args.output_dir);
    if (args.dump_program) {
      const ConeProgram program =
          scenario.mode == Mode::OwA
              ? build_owa_program(scenario, Eigen::VectorXd::Ones(scenario.num_anchors()))
              : build_ows_program(scenario, Eigen::VectorXd::Ones(scenario.num_anchors()));
      std::ofstream dump(*args.dump_program, std::ios::binary);
      if (!dump) throw std::ios_base::failure("cannot write '" + args.dump_program->string() + "'");
      write_sdpa(program, dump);
    }

    ordered_json result = detail::header(scenario, kResultFormat, args.seed, params);
    result["mode"] = to_string(scenario.mode);
    Eigen::VectorXd weights;
    Scenario effective = scenario;
    ordered_json placement;

    if (scenario.mode == Mode::OwA) {
      const EnergyPlacement p = solve_reweighted(scenario, options);
      weights = p.energies;
      placement["energies_j"] = detail::vec_json(p.energies);
      placement["selected"] = p.support;
      placement["support_size"] = p.support.size();
      placement["total_energy_j"] = p.total_energy;
      result["placement"] = std::move(placement);
      result["trace"] = detail::trace_json(p.trace);
      result["solver"] = detail::solver_json(p.last_solve);
    } else {
      const LiftedSolution lifted = solve_reweighted_sdp(scenario, options);
      const RoundedSelection rs = randomize_round(scenario, lifted, args.draws, args.seed);
      weights = anchorplace::detail::as_weights(rs.selected);
      std::vector<int> selected;
      for (int m = 0; m < scenario.num_anchors(); ++m) {
        if (rs.selected[m]) selected.push_back(m);
      }
      if (rs.feasible && args.optimize_sensor_energy) {
        effective.sensor_energy = optimize_sensor_energy(scenario, rs.selected);
      }
      placement["weights"] = detail::vec_json(weights);
      placement["selected"] = selected;
      placement["support_size"] = rs.cardinality;
      placement["sensor_energy_j"] = effective.sensor_energy;
      placement["relaxed_w"] = detail::vec_json(lifted.w);
      placement["relaxation_objective"] = lifted.objective;
      placement["relaxation_support_size"] = lifted.support.size();
      ordered_json rounding;
      rounding["draws"] = args.draws;
      rounding["draws_used"] = rs.draws_used;
      rounding["feasible"] = rs.feasible;
      rounding["margin_per_m2"] = rs.margin;
      rounding["collinear_warning"] = rs.collinear_warning;
      placement["rounding"] = std::move(rounding);
      result["placement"] = std::move(placement);
      result["trace"] = detail::trace_json(lifted.trace);
      result["solver"] = detail::solver_json(lifted.last_solve);
      if (rs.collinear_warning) {
        err << "warning: all selected anchors are collinear; mirror-ambiguous positions may remain\n";
      }
    }

    const FeasibilityReport rep = feasibility_report(effective, weights);
    result["feasibility"] = detail::feasibility_json(rep, effective);
    const bool ok = rep.margin >= -1e-6 * rep.threshold;

    if (ok && args.coverage_trials > 0) {
      CoverageOptions copt;
      copt.points = args.coverage_points;
      const CoverageReport cov = coverage(effective, weights, args.coverage_trials, args.seed, copt);
      result["coverage"] = detail::coverage_json(cov);
    }
    result["scenario"] = to_json(scenario);
    detail::write_file(args.output_dir / "result.json", result.dump(2) + "\n");

    const auto& pl = result["placement"];
    out << "mode " << to_string(scenario.mode) << ": " << pl["support_size"].get<int>() << " of "
        << scenario.num_anchors() << " anchors selected";
    if (scenario.mode == Mode::OwA) out << ", total energy " << pl["total_energy_j"].get<double>() << " J";
    out << ", margin " << rep.margin << " (lambda " << rep.threshold << ")\n";
    out << "wrote " << (args.output_dir / "result.json").string() << "\n";
    if (!ok) {
      const Vec2& p = effective.sensor_points[rep.worst_sensor_index];
      err << "error: placement misses the threshold at sensor point " << rep.worst_sensor_index
          << " (" << p.x() << ", " << p.y() << ")\n";
      return kInfeasible;
    }
    return kOk;
  });
}

inline int cmd_verify(const VerifyArgs& args, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  if (args.trials < 1) {
    err << "error: trials must be >= 1\n";
    return kUsage;
  }
  return detail::guarded(err, [&]() -> int {
    using detail::ordered_json;
    Scenario scenario = load_scenario(args.scenario_file);
    const nlohmann::json res = detail::load_json(args.result_file);
    const auto& pl = res.at("placement");
    const auto& key = scenario.mode == Mode::OwA ? "energies_j" : "weights";
    const std::vector<double> values = pl.at(key).get<std::vector<double>>();
    if (static_cast<int>(values.size()) != scenario.num_anchors()) {
      err << "error: placement has " << values.size() << " entries, scenario has "
          << scenario.num_anchors() << " anchors\n";
      return kUsage;
    }
    if (res.contains("scenario_hash") && res["scenario_hash"] != scenario_hash(scenario)) {
      err << "warning: result was produced for a different scenario (hash mismatch)\n";
    }
    if (scenario.mode == Mode::OwS && pl.contains("sensor_energy_j")) {
      scenario.sensor_energy = pl["sensor_energy_j"].get<double>();
    }
    const Eigen::VectorXd weights = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    anchorplace::detail::check_weights(scenario, weights, "verify");

    ordered_json params;
    params["trials"] = args.trials;
    params["points"] = detail::points_name(args.points);
    params["result_file"] = args.result_file.string();
    ordered_json report = detail::header(scenario, kCoverageFormat, args.seed, params);
    const FeasibilityReport rep = feasibility_report(scenario, weights);
    report["feasibility"] = detail::feasibility_json(rep, scenario);
    detail::ensure_dir(args.output_dir);

    if (rep.margin < -1e-6 * rep.threshold) {
      report["scenario"] = to_json(scenario);
      detail::write_file(args.output_dir / "coverage.json", report.dump(2) + "\n");
      const Vec2& p = scenario.sensor_points[rep.worst_sensor_index];
      err << "error: placement is infeasible; worst sensor point " << rep.worst_sensor_index
          << " (" << p.x() << ", " << p.y() << ") misses lambda by " << -rep.margin << "\n";
      return kInfeasible;
    }
    CoverageOptions copt;
    copt.points = args.points;
    const CoverageReport cov = coverage(scenario, weights, args.trials, args.seed, copt);
    report["coverage"] = detail::coverage_json(cov);
    report["target_probability"] = scenario.accuracy.probability;
    report["scenario"] = to_json(scenario);
    detail::write_file(args.output_dir / "coverage.json", report.dump(2) + "\n");
    out << "worst coverage " << cov.worst_coverage << " over " << cov.sensor_indices.size()
        << " point(s), target " << scenario.accuracy.probability << ", divergences "
        << cov.estimator_divergences << "\n";
    out << "wrote " << (args.output_dir / "coverage.json").string() << "\n";
    return kOk;
  });
}

inline int cmd_plotdata(const PlotArgs& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  return detail::guarded(err, [&]() -> int {
    const nlohmann::json res = detail::load_json(args.result_file);
    const Scenario scenario = scenario_from_json(res.at("scenario"));
    const auto& pl = res.at("placement");
    const bool owa = scenario.mode == Mode::OwA;
    const std::vector<double> values =
        pl.at(owa ? "energies_j" : "weights").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != scenario.num_anchors()) {
      throw ParseError("result: placement length does not match the scenario");
    }
    std::vector<bool> selected(values.size(), false);
    for (int m : pl.at("selected").get<std::vector<int>>()) {
      if (m < 0 || m >= scenario.num_anchors()) throw ParseError("result: selected index out of range");
      selected[static_cast<std::size_t>(m)] = true;
    }
    const double es = pl.contains("sensor_energy_j") ? pl["sensor_energy_j"].get<double>()
                                                     : scenario.sensor_energy;

    std::ostringstream head;
    head << "# tool_version " << kToolVersion << "\n";
    head << "# scenario_hash " << res.value("scenario_hash", std::string()) << "\n";
    head << "# seed " << res.value("seed", std::uint64_t{0}) << "\n";
    head << "# parameters " << res.value("parameters", nlohmann::json::object()).dump() << "\n";
    head << "# mode " << to_string(scenario.mode) << "\n";

    char buf[256];
    detail::ensure_dir(args.output_dir);
    std::ostringstream anchors;
    anchors << head.str() << "index,x_m,y_m,selected,weight,energy_j\n";
    for (int m = 0; m < scenario.num_anchors(); ++m) {
      const Vec2& a = scenario.anchor_points[m];
      const double energy = owa ? values[m] : values[m] * es;
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%.17g,%.17g\n", m, a.x(), a.y(),
                    selected[m] ? 1 : 0, values[m], energy);
      anchors << buf;
    }
    detail::write_file(args.output_dir / "anchors.csv", anchors.str());

    std::ostringstream sensors;
    sensors << head.str() << "index,x_m,y_m,min_eig_per_m2,margin_per_m2\n";
    const auto& fe = res.at("feasibility");
    const std::vector<double> eig = fe.at("min_eig_by_sensor").get<std::vector<double>>();
    const double lambda = fe.at("lambda_per_m2").get<double>();
    for (int k = 0; k < scenario.num_sensor_points(); ++k) {
      const Vec2& s = scenario.sensor_points[k];
      const double e = k < static_cast<int>(eig.size()) ? eig[k] : std::nan("");
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", k, s.x(), s.y(), e, e - lambda);
      sensors << buf;
    }
    detail::write_file(args.output_dir / "sensors.csv", sensors.str());

    std::ostringstream trace;
    trace << head.str() << "iteration,objective,weighted_objective,support_size,solver_iterations,duality_gap\n";
    for (const auto& t : res.value("trace", nlohmann::json::array())) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d,%d,%.17g\n", t.at("iteration").get<int>(),
                    t.at("objective").get<double>(), t.at("weighted_objective").get<double>(),
                    t.at("support_size").get<int>(), t.at("solver_iterations").get<int>(),
                    t.at("duality_gap").get<double>());
      trace << buf;
    }
    detail::write_file(args.output_dir / "trace.csv", trace.str());
    out << "wrote anchors.csv, sensors.csv, trace.csv to " << args.output_dir.string() << "\n";
    return kOk;
  });
}

}  // namespace anchorplace::cli
