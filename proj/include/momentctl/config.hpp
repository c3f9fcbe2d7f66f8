#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "momentctl/dynamics.hpp"
#include "momentctl/ensemble.hpp"
#include "momentctl/moments.hpp"
#include "momentctl/synth.hpp"
#include "momentctl/verify.hpp"

namespace momentctl::config {

/// How the ensemble is specified: a builtin constructor or explicit matrices.
struct SystemSpec {
  enum class Kind { kBloch, kRamanNath, kCustom };
  Kind kind = Kind::kBloch;
  // kRamanNath
  int N_prime = 7;
  int n_prime = 1;
  double omega_r = 1.0;
  // The assembled system (all kinds).
  EnsembleSystem system;
};

struct RunConfig {
  SystemSpec system;
  double horizon = 0.0;
  Index steps = 0;
  int N_alpha = 0;
  int N_beta = 0;
  synth::SolverConfig solver;
  verify::GridSpec grid;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  // Set when the initial control came from a CSV file.
  std::optional<std::filesystem::path> initial_control_file;

  dynamics::TimeGrid time_grid() const;
  moments::MomentSystem moment_system() const;
};

/// Parse and validate. Relative paths inside the config resolve against
/// `base_dir`. Errors name the offending key.
RunConfig parse(const nlohmann::json& j,
                const std::filesystem::path& base_dir = {});
RunConfig load(const std::filesystem::path& path);

/// Fully resolved config with all defaults materialized.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace momentctl::config
