#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "weakmfg/checker.hpp"
#include "weakmfg/io.hpp"
#include "weakmfg/nash.hpp"
#include "weakmfg/solver.hpp"

namespace weakmfg {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kNoConvergence = 2, kCheckFailed = 3 };

struct CommandOptions {
  std::string problem;
  std::string config;
  std::string out;
  /// Solution directory for check and nash.
  std::string solution;
  std::string axis;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool binary = false;
};

/// Output directory: --out, else $WEAKMFG_OUT/<command>, else ./weakmfg_out/<command>.
inline std::filesystem::path output_dir(const CommandOptions& o, const std::string& command) {
  if (!o.out.empty()) return o.out;
  if (const char* root = std::getenv("WEAKMFG_OUT"); root && *root) return std::filesystem::path(root) / command;
  return std::filesystem::path("weakmfg_out") / command;
}

inline RunConfig load_run_config(const CommandOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : parse_config(read_text(o.config));
  if (o.seed) {
    cfg.solver.seed = *o.seed;
    cfg.game.seed = *o.seed;
  }
  if (o.threads) cfg.solver.threads = *o.threads;
  if (cfg.solver.threads > 0) default_executor(cfg.solver.threads);
  return cfg;
}

struct SolutionFields {
  ProblemData data;
  PrimalState primal;
  DualState dual;
};

inline void write_solution_fields(const std::filesystem::path& dir, const SolveResult& r, bool binary,
                                  std::vector<std::string>& artifacts) {
  const int d = r.primal.m.grid.dim();
  write_field_csv(dir / "m.csv", r.primal.m);
  artifacts.push_back("m.csv");
  write_field_csv(dir / "w_x.csv", r.primal.w, 0);
  artifacts.push_back("w_x.csv");
  if (d == 2) {
    write_field_csv(dir / "w_y.csv", r.primal.w, 1);
    artifacts.push_back("w_y.csv");
  }
  write_field_csv(dir / "phi.csv", r.dual.phi);
  artifacts.push_back("phi.csv");
  write_field_csv(dir / "alpha.csv", r.dual.alpha);
  artifacts.push_back("alpha.csv");
  if (binary) {
    for (const auto& [name, f] : std::vector<std::pair<std::string, const Field*>>{
             {"m.bin", &r.primal.m}, {"w.bin", &r.primal.w}, {"phi.bin", &r.dual.phi}, {"alpha.bin", &r.dual.alpha}}) {
      write_field_binary(dir / name, *f);
      artifacts.push_back(name);
    }
  }
}

/// Reads problem.yaml and the CSV fields from a solve output directory.
inline SolutionFields load_solution(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "problem.yaml")) throw std::runtime_error("missing " + (dir / "problem.yaml").string());
  SolutionFields s;
  s.data = load_problem(dir / "problem.yaml");
  const SpaceTimeGrid g = s.data.grid();
  s.primal = make_primal(g);
  s.dual = make_dual(g);
  read_field_csv(dir / "m.csv", s.primal.m);
  read_field_csv(dir / "w_x.csv", s.primal.w, 0);
  if (g.dim() == 2) read_field_csv(dir / "w_y.csv", s.primal.w, 1);
  read_field_csv(dir / "phi.csv", s.dual.phi);
  read_field_csv(dir / "alpha.csv", s.dual.alpha);
  return s;
}

inline Json manifest_json(const std::filesystem::path& dir, const std::string& command, const std::string& problem_text,
                          const RunConfig& cfg, const std::vector<std::string>& artifacts, double wall_time) {
  Json art = Json::array();
  for (const auto& a : artifacts) art.push_back({{"path", a}, {"sha256", sha256_hex(read_text(dir / a))}});
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return {{"tool", "weakmfg"},
          {"version", kVersion},
          {"command", command},
          {"problem_sha256", sha256_hex(problem_text)},
          {"config", config_json(cfg)},
          {"seed", cfg.solver.seed},
          {"threads", cfg.solver.threads},
          {"artifacts", art},
          {"timestamp", stamp},
          {"wall_time", wall_time}};
}

inline int cmd_solve(const CommandOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (o.problem.empty()) {
      err << "solve: --problem is required\n";
      return kUsage;
    }
    const std::string text = read_text(o.problem);
    const ProblemData data = parse_problem(text);
    const RunConfig cfg = load_run_config(o);
    const ValidationReport vr = validate(data);
    if (!vr.ok()) {
      err << "solve: problem violates assumptions:\n" << vr.failures();
      return kUsage;
    }
    const auto dir = output_dir(o, "solve");
    std::filesystem::create_directories(dir);
    std::vector<std::string> artifacts;
    write_text(dir / "problem.yaml", text);
    artifacts.push_back("problem.yaml");
    write_text(dir / "config.yaml", config_json(cfg).dump(2) + "\n");
    artifacts.push_back("config.yaml");

    std::function<void(const SaddleState&)> checkpoint;
    if (cfg.solver.checkpoint_every > 0) {
      std::filesystem::create_directories(dir / "checkpoints");
      checkpoint = [&](const SaddleState& s) {
        const std::string tag = std::to_string(s.iteration);
        write_field_csv(dir / "checkpoints" / ("m_" + tag + ".csv"), s.primal.m);
        write_field_csv(dir / "checkpoints" / ("phi_" + tag + ".csv"), s.dual.phi);
      };
    }
    SolveResult r;
    try {
      r = solve(data, cfg.solver, checkpoint);
    } catch (const SolverError& e) {
      err << e.what() << "\n";
      return kNoConvergence;
    }
    write_solution_fields(dir, r, o.binary, artifacts);
    const WeakSolutionReport check = check_weak_solution(r.primal.m, r.dual.phi, data, cfg.check);
    Json report;
    report["grid"] = grid_json(data.grid());
    report["problem_sha256"] = sha256_hex(text);
    report["nu"] = vr.nu;
    report["solve"] = solve_report_json(r.report);
    report["check"] = check_report_json(check);
    write_text(dir / "report.json", report.dump(2) + "\n");
    artifacts.push_back("report.json");
    write_text(dir / "manifest.json", manifest_json(dir, "solve", text, cfg, artifacts, r.report.wall_time).dump(2) + "\n");
    out << "solve: " << (r.report.converged ? "converged" : "NOT converged") << " after " << r.report.iterations
        << " iterations, gap " << format_double(r.report.duality_gap) << ", output " << dir.string() << "\n";
    return r.report.converged ? kOk : kNoConvergence;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "solve: " << e.what() << "\n";
    return kUsage;
  }
}

inline int cmd_check(const CommandOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (o.solution.empty()) {
      err << "check: a solution directory is required\n";
      return kUsage;
    }
    const RunConfig cfg = load_run_config(o);
    const SolutionFields s = load_solution(o.solution);
    const WeakSolutionReport rep = check_weak_solution(s.primal.m, s.dual.phi, s.data, cfg.check);
    Json j;
    j["grid"] = grid_json(s.data.grid());
    j["check"] = check_report_json(rep);
    const auto dir = o.out.empty() ? std::filesystem::path(o.solution) : std::filesystem::path(o.out);
    std::filesystem::create_directories(dir);
    write_text(dir / "check.json", j.dump(2) + "\n");
    out << "check: " << (rep.ok() ? "all bounds pass" : "bounds FAILED") << "\n";
    if (!rep.pass_ii()) out << "  res_ii_ae = " << format_double(rep.res_ii_ae) << " flagged\n";
    if (!rep.pass_iii()) out << "  res_iii = " << format_double(rep.res_iii) << " flagged\n";
    if (!rep.pass_iv()) out << "  res_iv relative = " << format_double(rep.res_iv_relative()) << " flagged\n";
    if (!rep.pass_condsup()) out << "  condsup = " << format_double(rep.condsup_residual) << " flagged\n";
    return rep.ok() ? kOk : kCheckFailed;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "check: " << e.what() << "\n";
    return kUsage;
  }
}

inline int cmd_nash(const CommandOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (o.solution.empty()) {
      err << "nash: a solution directory is required\n";
      return kUsage;
    }
    const RunConfig cfg = load_run_config(o);
    const SolutionFields s = load_solution(o.solution);
    validate_game(cfg.game, s.data.grid());
    const TrajectoryEnsemble ens = sample_equilibrium_trajectories(s.data, s.primal, cfg.game);
    const NashReport rep = nash_gap(ens, s.data, s.primal, s.dual, cfg.game);
    const auto dir = o.out.empty() ? std::filesystem::path(o.solution) : std::filesystem::path(o.out);
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "players.csv", std::ios::binary);
    const int d = s.data.d;
    csv << (d == 1 ? "player,x0,cost,best_response_cost,gain\n" : "player,x0,y0,cost,best_response_cost,gain\n");
    for (const auto& row : rep.players) {
      csv << row.index << ',' << format_double(row.x0[0]) << ',';
      if (d == 2) csv << format_double(row.x0[1]) << ',';
      csv << format_double(row.cost) << ',' << format_double(row.best_response_cost) << ',' << format_double(row.gain)
          << '\n';
    }
    Json j = nash_report_json(rep);
    j["game"] = config_json(cfg)["game"];
    write_text(dir / "nash.json", j.dump(2) + "\n");
    if (rep.lipschitz_warning) err << "nash: warning: coupling is only locally Lipschitz for q != 2\n";
    out << "nash: epsilon_hat " << format_double(rep.epsilon_hat) << ", mean cost " << format_double(rep.mean_cost)
        << ", value " << format_double(rep.value) << "\n";
    return kOk;
  } catch (const GameConfigError& e) {
    err << "nash: invalid game config: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "nash: " << e.what() << "\n";
    return kUsage;
  }
}

/// Trend tables along one axis: grid, N or perturbation.
inline int cmd_study(const CommandOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (o.problem.empty() || o.axis.empty()) {
      err << "study: --problem and --axis are required\n";
      return kUsage;
    }
    if (o.axis != "grid" && o.axis != "N" && o.axis != "perturbation") {
      err << "study: axis must be one of grid, N, perturbation\n";
      return kUsage;
    }
    const std::string text = read_text(o.problem);
    const ProblemData base = parse_problem(text);
    const RunConfig cfg = load_run_config(o);
    const auto dir = output_dir(o, "study");
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / ("study_" + o.axis + ".csv"), std::ios::binary);
    int status = kOk;
    auto fail = [&](const std::string& why, int code) {
      csv << "# partial: " << why << "\n";
      err << "study: " << why << "\n";
      status = code;
    };
    if (o.axis == "grid") {
      csv << "nx,nt,iterations,converged,duality_gap,primal_value,continuity_residual\n";
      for (int n : cfg.study.grid) {
        try {
          const ProblemData p = parse_problem(text, n, n);
          const SolveResult r = solve(p, cfg.solver);
          const auto& rp = r.report;
          csv << n << ',' << n << ',' << rp.iterations << ',' << (rp.converged ? 1 : 0) << ','
              << format_double(rp.duality_gap) << ',' << format_double(rp.primal_value) << ','
              << format_double(rp.continuity_residual) << '\n';
          if (!rp.converged) {
            fail("grid " + std::to_string(n) + " did not converge", kNoConvergence);
            break;
          }
        } catch (const std::exception& e) {
          fail(e.what(), kUsage);
          break;
        }
      }
    } else if (o.axis == "N") {
      csv << "N,epsilon_hat,mean_cost,value,w1_T\n";
      const SolveResult r = solve(base, cfg.solver);
      if (!r.report.converged) {
        fail("base solve did not converge", kNoConvergence);
      } else {
        for (int N : cfg.study.players) {
          try {
            GameConfig gc = cfg.game;
            gc.N = N;
            gc.sample_players = std::min(gc.sample_players, N);
            const auto ens = sample_equilibrium_trajectories(base, r.primal, gc);
            const auto rep = nash_gap(ens, base, r.primal, r.dual, gc);
            csv << N << ',' << format_double(rep.epsilon_hat) << ',' << format_double(rep.mean_cost) << ','
                << format_double(rep.value) << ',' << format_double(rep.wasserstein.back().second) << '\n';
          } catch (const std::exception& e) {
            fail(e.what(), kUsage);
            break;
          }
        }
      }
    } else {
      csv << "eps,m_distance,phi_distance\n";
      try {
        const auto series = stability_test(
            base, cfg.study.eps,
            [](const ProblemData& p, double e) {
              ProblemData q = p;
              const SpaceTimeGrid g = p.grid();
              for (std::size_t i = 0; i < g.slice_size(); ++i)
                q.phi_T.values[i] += e * std::cos(2 * std::numbers::pi * g.node_position(i)[0]);
              return q;
            },
            cfg.solver);
        for (const auto& pt : series)
          csv << format_double(pt.eps) << ',' << format_double(pt.m_distance) << ',' << format_double(pt.phi_distance)
              << '\n';
      } catch (const std::exception& e) {
        fail(e.what(), kUsage);
      }
    }
    out << "study: wrote " << (dir / ("study_" + o.axis + ".csv")).string() << "\n";
    return status;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "study: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace weakmfg
