#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "momentctl/config.hpp"
#include "momentctl/io.hpp"

using namespace momentctl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("momentctl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal() {
  return json::parse(R"({
    "system": {"type": "bloch", "alpha": [-1, 1], "beta": [0.9, 1.1],
               "x0": [0, 0, 1], "xT": [1, 0, 0]},
    "horizon": 1.0, "steps": 300,
    "truncation": {"N_alpha": 4, "N_beta": 3}
  })");
}

std::string parse_error(const json& j) {
  try {
    config::parse(j);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Csv, BitExactRoundTrip) {
  const auto dir = temp_dir("csv");
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<std::uint64_t> bits;
  io::Table t;
  t.header = {"a", "b", "c"};
  t.data.resize(50, 3);
  for (Index i = 0; i < t.data.size(); ++i) {
    double v;
    do {
      const std::uint64_t b = bits(gen);
      std::memcpy(&v, &b, sizeof v);
    } while (!std::isfinite(v));
    t.data(i) = v;
  }
  t.data(0, 0) = 0.1;
  t.data(0, 1) = -0.0;
  t.data(0, 2) = std::numeric_limits<double>::denorm_min();
  io::write_csv(dir / "t.csv", t);
  const auto r = io::read_csv(dir / "t.csv");
  EXPECT_EQ(r.header, t.header);
  ASSERT_EQ(r.data.rows(), 50);
  for (Index i = 0; i < t.data.size(); ++i)
    EXPECT_EQ(std::memcmp(&r.data(i), &t.data(i), sizeof(double)), 0) << i;
  // UNIX newlines, no trailing spaces.
  const std::string s = slurp(dir / "t.csv");
  EXPECT_EQ(s.find('\r'), std::string::npos);
  EXPECT_EQ(s.substr(0, 6), "a,b,c\n");
}

TEST(Csv, RejectsMalformedRows) {
  const auto dir = temp_dir("csv_bad");
  std::ofstream(dir / "ragged.csv") << "a,b\n1,2\n3\n";
  EXPECT_THROW(io::read_csv(dir / "ragged.csv"), Error);
  std::ofstream(dir / "text.csv") << "a,b\n1,x\n";
  EXPECT_THROW(io::read_csv(dir / "text.csv"), Error);
  EXPECT_THROW(io::read_csv(dir / "missing.csv"), Error);
}

TEST(Control, RoundTripAndShapeChecks) {
  const auto dir = temp_dir("ctrl");
  const auto grid = dynamics::TimeGrid::uniform(1.0, 30);
  dynamics::ControlTrajectory c{grid, Matrix::Random(30, 2)};
  io::write_control(dir / "c.csv", c);
  const auto back = io::read_control(dir / "c.csv", grid, 2);
  EXPECT_EQ(back.U, c.U);
  const auto t = io::read_csv(dir / "c.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "u1", "u2"}));
  EXPECT_EQ(t.data(0, 0), 0.0);
  EXPECT_EQ(t.data.rows(), 30);
  EXPECT_THROW(io::read_control(dir / "c.csv", grid, 1), Error);
  EXPECT_THROW(io::read_control(dir / "c.csv", dynamics::TimeGrid::uniform(1.0, 31), 2), Error);
  EXPECT_THROW(io::read_control(dir / "c.csv", dynamics::TimeGrid::uniform(2.0, 30), 2), Error);
}

TEST(Trajectory, RowsIncludeBothEndpoints) {
  const auto dir = temp_dir("traj");
  const auto grid = dynamics::TimeGrid::uniform(6.0, 12);
  io::write_trajectory(dir / "x.csv", grid, Matrix::Ones(13, 4));
  const auto t = io::read_csv(dir / "x.csv");
  EXPECT_EQ(t.data.rows(), 13);
  EXPECT_EQ(t.data(12, 0), 6.0);
  EXPECT_EQ(t.header.back(), "x4");
  EXPECT_THROW(io::write_trajectory(dir / "y.csv", grid, Matrix::Ones(12, 4)), Error);
}

TEST(Config, MinimalBlochDefaults) {
  const auto cfg = config::parse(minimal());
  EXPECT_EQ(cfg.system.kind, config::SystemSpec::Kind::kBloch);
  EXPECT_EQ(cfg.steps, 300);
  EXPECT_EQ(cfg.solver.epsilon, 1e-3);
  EXPECT_EQ(cfg.solver.lambda0, 0.01);
  EXPECT_EQ(cfg.solver.max_iter_stage1, 800);
  EXPECT_EQ(cfg.grid.n_alpha, 21);
  EXPECT_EQ(cfg.moment_system().dim(), 60);
  EXPECT_TRUE(std::isinf(cfg.system.system.bounds.u_max));
}

TEST(Config, MissingHorizonNamesKey) {
  json j = minimal();
  j.erase("horizon");
  const std::string msg = parse_error(j);
  EXPECT_NE(msg.find("horizon"), std::string::npos) << msg;
}

TEST(Config, ErrorsNameOffendingKey) {
  json j = minimal();
  j["solver"] = {{"lambda_0", 0.01}};
  EXPECT_NE(parse_error(j).find("solver.lambda_0"), std::string::npos);
  j = minimal();
  j["steps"] = 0;
  EXPECT_NE(parse_error(j).find("steps"), std::string::npos);
  j = minimal();
  j["grid"] = {{"n_alpha", 0}};
  EXPECT_NE(parse_error(j).find("grid.n_alpha"), std::string::npos);
  j = minimal();
  j["system"]["alpha"] = {1.0, 1.0};
  EXPECT_NE(parse_error(j).find("system.alpha"), std::string::npos);
  j = minimal();
  j["system"]["type"] = "lorenz";
  EXPECT_NE(parse_error(j).find("system.type"), std::string::npos);
  j = minimal();
  j["solver"] = {{"epsilon", -1.0}};
  EXPECT_NE(parse_error(j).find("epsilon"), std::string::npos);
}

TEST(Config, RamanNathDefaults) {
  json j = json::parse(R"({
    "system": {"type": "raman_nath", "N_prime": 7, "n_prime": 2,
               "alpha": [0.95, 1.05], "beta": [0.9, 1.1]},
    "horizon": 6.0, "steps": 600, "truncation": {"N_alpha": 6, "N_beta": 3}
  })");
  const auto cfg = config::parse(j);
  EXPECT_EQ(cfg.system.system.bounds.u_min, 0.0);
  EXPECT_EQ(cfg.system.system.bounds.u_max, 20.0);
  EXPECT_EQ(cfg.moment_system().dim(), 448);
  j["system"]["n_prime"] = 9;
  EXPECT_NE(parse_error(j).find("n_prime"), std::string::npos);
}

TEST(Config, CustomSystemAndInitialControlFile) {
  const auto dir = temp_dir("cfg_custom");
  const auto grid = dynamics::TimeGrid::uniform(2.0, 4);
  io::write_control(dir / "u0.csv", dynamics::ControlTrajectory{grid, Matrix::Constant(4, 1, 0.5)});
  json j = json::parse(R"({
    "system": {"type": "custom", "drift": [[0, 1], [-1, 0]], "inputs": [[[0, 0], [1, 0]]],
               "alpha": [0, 1], "beta": [1, 2], "x0": [1, 0], "xT": [0, 1],
               "bounds": {"u_min": -1, "u_max": null}},
    "horizon": 2.0, "steps": 4, "truncation": {"N_alpha": 1, "N_beta": 1},
    "solver": {"initial_control": {"file": "u0.csv"}}
  })");
  const auto cfg = config::parse(j, dir);
  EXPECT_EQ(cfg.solver.initial_control.kind, synth::InitialControl::Kind::kUser);
  EXPECT_TRUE(cfg.solver.initial_control.values.isConstant(0.5));
  EXPECT_EQ(cfg.system.system.bounds.u_min, -1.0);
  EXPECT_TRUE(std::isinf(cfg.system.system.bounds.u_max));
  j["solver"]["initial_control"]["file"] = "nope.csv";
  try {
    config::parse(j, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("solver.initial_control.file"), std::string::npos);
  }
}

TEST(Config, EchoRoundTrip) {
  json j = minimal();
  j["solver"] = {{"initial_control", {{"constant", 0.5}}}, {"mu0", 0.1}};
  j["grid"] = {{"spacing", "chebyshev"}};
  const auto cfg = config::parse(j);
  const json echo = config::to_json(cfg);
  EXPECT_EQ(echo["solver"]["mu0"], 0.1);
  EXPECT_EQ(echo["solver"]["max_iter_stage2"], 400);  // default materialized
  EXPECT_TRUE(echo["system"]["bounds"]["u_max"].is_null());
  const auto again = config::parse(echo);
  EXPECT_EQ(config::to_json(again), echo);
}

TEST(Config, LoadAcceptsComments) {
  const auto dir = temp_dir("cfg_load");
  std::ofstream(dir / "c.cfg") << "// run\n" << minimal().dump(2) << "\n";
  EXPECT_NO_THROW(config::load(dir / "c.cfg"));
  std::ofstream(dir / "bad.cfg") << "{ \"horizon\": ";
  EXPECT_THROW(config::load(dir / "bad.cfg"), Error);
  EXPECT_THROW(config::load(dir / "absent.cfg"), Error);
}

TEST(Config, BundledConfigsParse) {
  for (const char* name : {"bloch_a", "bloch_b", "raman_nath_n1", "raman_nath_n2"}) {
    const fs::path p = fs::path(MOMENTCTL_SOURCE_DIR) / "configs" / (std::string(name) + ".cfg");
    ASSERT_TRUE(fs::exists(p)) << p;
    const auto cfg = config::load(p);
    if (std::string(name).rfind("bloch", 0) == 0) {
      EXPECT_EQ(cfg.steps, 300);
      EXPECT_EQ(cfg.moment_system().dim(), 60);
    } else {
      EXPECT_EQ(cfg.steps, 600);
      EXPECT_EQ(cfg.moment_system().dim(), 448);
      EXPECT_EQ(cfg.system.system.input_count(), 1);
    }
  }
}
