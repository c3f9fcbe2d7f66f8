// momentctl: synthesize, verify and simulate ensemble controls from a JSON
// run config.
//
//   momentctl synth <cfg> [--out DIR] [--threads N] [--seed S] [--quiet]
//   momentctl verify <cfg> --control <csv> [--grid NxM] [--out DIR] [--threads N]
//   momentctl simulate <cfg> --control <csv> --alpha A --beta B [--out DIR]
//
// Output directory precedence: --out, then $MOMENTCTL_OUT, then the config's
// output_dir. Exit status: 0 on success (synth: terminal error within
// epsilon), 2 when synth stops short of epsilon, 1 on any error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "momentctl/config.hpp"
#include "momentctl/io.hpp"
#include "momentctl/synth.hpp"
#include "momentctl/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace momentctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

fs::path resolve_out_dir(const CommonOptions& o, const config::RunConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("MOMENTCTL_OUT"); env && *env) return env;
  return cfg.output_dir;
}

config::RunConfig load_config(const CommonOptions& o) {
  config::RunConfig cfg = config::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json record_json(const synth::IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"terminal_error", r.terminal_error},
          {"energy", r.energy},
          {"energy_before", r.energy_before},
          {"riemann_energy", r.riemann_energy},
          {"step_norm", r.step_norm},
          {"regularization", r.regularization},
          {"qp_status", qp::to_string(r.qp_status)},
          {"qp_iterations", r.qp_iterations},
          {"drift", r.drift},
          {"guard", r.guard},
          {"guard_triggered", r.guard_triggered},
          {"wall_time", r.wall_time},
          {"refinement", r.refinement}};
}

json history_json(const std::vector<synth::IterationRecord>& h) {
  json out = json::array();
  for (const auto& r : h) out.push_back(record_json(r));
  return out;
}

// Pairing of real and imaginary components for embedded complex systems.
json embedding_json(const config::RunConfig& cfg) {
  if (cfg.system.kind != config::SystemSpec::Kind::kRamanNath) {
    return {{"complex", false}};
  }
  const int levels = cfg.system.N_prime + 1;
  json pairs = json::array();
  json orders = json::array();
  for (int j = 0; j < levels; ++j) {
    pairs.push_back({j, j + levels});
    orders.push_back(2 * j);
  }
  return {{"complex", true},
          {"pairs", pairs},
          {"momentum_orders", orders},
          {"layout", "x = [Re C_0..Re C_N', Im C_0..Im C_N']"}};
}

int cmd_synth(const CommonOptions& o, bool quiet) {
  const config::RunConfig cfg = load_config(o);
  const fs::path out_dir = resolve_out_dir(o, cfg);
  const auto ms = cfg.moment_system();
  const auto grid = cfg.time_grid();

  synth::SolverConfig solver = cfg.solver;
  if (!quiet) {
    solver.on_iteration = [](int stage, const synth::IterationRecord& r) {
      std::fprintf(stderr, "stage %d iter %4d  error %.3e  energy %.6e  step %.2e%s\n",
                   stage, r.iteration, r.terminal_error, r.energy, r.step_norm,
                   r.refinement ? "  (refine)" : "");
    };
  }
  const auto res = synth::synthesize(ms, grid, solver);
  const auto& rep = res.report;

  io::write_control(out_dir / "control.csv", res.control);

  // Center-of-domain member reconstructed from the moment trajectory.
  const double a_mid =
      0.5 * (cfg.system.system.alpha_range.lo() + cfg.system.system.alpha_range.hi());
  const double b_mid =
      0.5 * (cfg.system.system.beta_range.lo() + cfg.system.system.beta_range.hi());
  Matrix X(res.trajectory.x.rows(), ms.n);
  for (Index k = 0; k < X.rows(); ++k) {
    X.row(k) = moments::reconstruct(res.trajectory.state(k), 0.0, 0.0, ms).transpose();
  }
  io::write_trajectory(out_dir / "trajectory.csv", grid, X);

  const bool converged = rep.final_error <= cfg.solver.epsilon;
  json report;
  report["config"] = config::to_json(cfg);
  report["implementation_defaults"] = {
      {"mu0", cfg.solver.mu0},
      {"max_iter_stage2", cfg.solver.max_iter_stage2},
      {"note", "not stated in the source method; implementation choices"}};
  report["dimensions"] = {{"n", ms.n},
                          {"m", ms.m},
                          {"D", ms.dim()},
                          {"K", grid.steps()},
                          {"equations", ms.dim() * grid.steps()},
                          {"H_rows", ms.dim()},
                          {"H_cols", ms.m * grid.steps()}};
  report["embedding"] = embedding_json(cfg);
  report["trajectory_csv"] = {{"kind", "moment reconstruction"},
                              {"alpha", a_mid},
                              {"beta", b_mid}};
  report["summary"] = {{"converged", converged},
                       {"stage1_stop", synth::to_string(rep.stage1_stop)},
                       {"stage2_stop", synth::to_string(rep.stage2_stop)},
                       {"initial_error", rep.initial_error},
                       {"stage1_error", rep.stage1_error},
                       {"final_error", rep.final_error},
                       {"stage1_energy", rep.stage1_energy},
                       {"final_energy", rep.final_energy},
                       {"final_riemann_energy", synth::riemann_energy(res.control)},
                       {"drift_guard_triggers", rep.drift_guard_triggers},
                       {"stage1_iterations", rep.stage1_history.size()},
                       {"stage2_iterations", rep.stage2_history.size()}};
  report["stage1_history"] = history_json(rep.stage1_history);
  report["stage2_history"] = history_json(rep.stage2_history);
  write_json(out_dir / "report.json", report);

  std::printf("final_error %s\nfinal_energy %s\nstage1_stop %s\nstage2_stop %s\noutput %s\n",
              io::format_double(rep.final_error).c_str(),
              io::format_double(rep.final_energy).c_str(),
              synth::to_string(rep.stage1_stop).c_str(),
              synth::to_string(rep.stage2_stop).c_str(), out_dir.string().c_str());
  return converged ? kExitOk : kExitNotConverged;
}

verify::GridSpec parse_grid_flag(const std::string& s, verify::GridSpec g) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw Error("--grid: expected NxM, got '" + s + "'");
  g.n_alpha = std::stoi(m[1]);
  g.n_beta = std::stoi(m[2]);
  g.validate();
  return g;
}

int cmd_verify(const CommonOptions& o, const std::string& control,
               const std::string& grid_flag) {
  const config::RunConfig cfg = load_config(o);
  const fs::path out_dir = resolve_out_dir(o, cfg);
  const auto& sys = cfg.system.system;
  const auto ctrl = io::read_control(control, cfg.time_grid(), sys.input_count());
  verify::GridSpec g = cfg.grid;
  if (!grid_flag.empty()) g = parse_grid_flag(grid_flag, g);

  const auto r = verify::grid_verify(sys, ctrl, g, o.threads);
  io::write_contours(out_dir / "contours.csv", r);
  const json summary = {{"max_error", r.max_error},
                        {"mean_error", r.mean_error},
                        {"n_alpha", g.n_alpha},
                        {"n_beta", g.n_beta},
                        {"points", r.terminal_error.size()}};
  write_json(out_dir / "verify_summary.json", summary);
  std::printf("points %zu\nmax_error %s\nmean_error %s\n", r.terminal_error.size(),
              io::format_double(r.max_error).c_str(),
              io::format_double(r.mean_error).c_str());
  return kExitOk;
}

int cmd_simulate(const CommonOptions& o, const std::string& control, double alpha,
                 double beta) {
  const config::RunConfig cfg = load_config(o);
  const fs::path out_dir = resolve_out_dir(o, cfg);
  const auto& sys = cfg.system.system;
  const auto grid = cfg.time_grid();
  const auto ctrl = io::read_control(control, grid, sys.input_count());
  const Matrix X = verify::simulate_member(sys, alpha, beta, ctrl);
  const fs::path path = out_dir / "member.csv";
  io::write_trajectory(path, grid, X);
  std::printf("terminal_error %s\noutput %s\n",
              io::format_double((X.row(X.rows() - 1).transpose() - sys.xT).norm()).c_str(),
              path.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble control synthesis for bilinear systems"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opts.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--threads", opts.threads, "Worker threads for grid evaluation")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", opts.seed, "Random seed recorded in the report");
  };

  bool quiet = false;
  auto* synth_cmd = app.add_subcommand("synth", "Run two-stage synthesis");
  add_common(synth_cmd);
  synth_cmd->add_flag("--quiet", quiet, "No per-iteration progress on stderr");

  std::string control;
  std::string grid_flag;
  auto* verify_cmd = app.add_subcommand("verify", "Terminal error over a parameter grid");
  add_common(verify_cmd);
  verify_cmd->add_option("--control", control, "Control CSV")->required();
  verify_cmd->add_option("--grid", grid_flag, "Grid size NxM (alpha x beta)");

  double alpha = 0.0;
  double beta = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate one ensemble member");
  add_common(sim_cmd);
  sim_cmd->add_option("--control", control, "Control CSV")->required();
  sim_cmd->add_option("--alpha", alpha, "Drift parameter")->required();
  sim_cmd->add_option("--beta", beta, "Input parameter")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*synth_cmd) return cmd_synth(opts, quiet);
    if (*verify_cmd) return cmd_verify(opts, control, grid_flag);
    if (*sim_cmd) return cmd_simulate(opts, control, alpha, beta);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
