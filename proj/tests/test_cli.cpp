#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "momentctl/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + MOMENTCTL_CLI + std::string(" ") + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("momentctl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json small_bloch() {
  return json::parse(R"({
    "system": {"type": "bloch", "alpha": [-0.2, 0.2], "beta": [0.95, 1.05],
               "x0": [0, 0, 1], "xT": [1, 0, 0]},
    "horizon": 1.0, "steps": 30,
    "truncation": {"N_alpha": 1, "N_beta": 1},
    "solver": {"max_iter_stage1": 100, "max_iter_stage2": 5},
    "grid": {"n_alpha": 4, "n_beta": 3}
  })");
}

fs::path write_cfg(const fs::path& dir, const json& j, const std::string& name = "run.cfg") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("synth /nonexistent.cfg").code, 1);
}

TEST(Cli, MissingHorizonExitsOneAndNamesKey) {
  const auto dir = temp_dir("nohorizon");
  json j = small_bloch();
  j.erase("horizon");
  const auto r = run("synth " + write_cfg(dir, j).string() + " --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("horizon"), std::string::npos) << r.out;
}

TEST(Cli, SynthVerifySimulate) {
  const auto dir = temp_dir("pipeline");
  const auto cfg = write_cfg(dir, small_bloch());
  const fs::path out = dir / "o";
  const auto s = run("synth " + cfg.string() + " --quiet --out " + out.string());
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_NE(s.out.find("final_error"), std::string::npos);

  const auto ctrl = momentctl::io::read_csv(out / "control.csv");
  EXPECT_EQ(ctrl.data.rows(), 30);
  EXPECT_EQ(ctrl.header, (std::vector<std::string>{"t", "u1", "u2"}));
  const auto traj = momentctl::io::read_csv(out / "trajectory.csv");
  EXPECT_EQ(traj.data.rows(), 31);
  EXPECT_EQ(traj.data(30, 0), 1.0);

  const json rep = json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(rep["summary"]["converged"].get<bool>());
  EXPECT_EQ(rep["dimensions"]["D"], 12);
  EXPECT_EQ(rep["dimensions"]["H_cols"], 60);
  EXPECT_EQ(rep["config"]["solver"]["mu0"], 0.01);  // defaults materialized
  EXPECT_FALSE(rep["stage1_history"].empty());
  EXPECT_TRUE(rep["stage1_history"][0].contains("regularization"));

  const std::string control = (out / "control.csv").string();
  const auto v1 = run("verify " + cfg.string() + " --control " + control + " --out " + (dir / "v1").string());
  ASSERT_EQ(v1.code, 0) << v1.out;
  const auto contours = momentctl::io::read_csv(dir / "v1" / "contours.csv");
  EXPECT_EQ(contours.data.rows(), 12);
  EXPECT_EQ(contours.header, (std::vector<std::string>{"alpha", "beta", "terminal_error"}));
  const json sum = json::parse(slurp(dir / "v1" / "verify_summary.json"));
  EXPECT_GE(sum["max_error"].get<double>(), sum["mean_error"].get<double>());

  // Byte-identical on re-run, and with an explicit grid.
  ASSERT_EQ(run("verify " + cfg.string() + " --control " + control + " --out " + (dir / "v2").string()).code, 0);
  EXPECT_EQ(slurp(dir / "v1" / "contours.csv"), slurp(dir / "v2" / "contours.csv"));
  ASSERT_EQ(run("verify " + cfg.string() + " --control " + control + " --grid 5x2 --out " + (dir / "v3").string()).code, 0);
  EXPECT_EQ(momentctl::io::read_csv(dir / "v3" / "contours.csv").data.rows(), 10);
  EXPECT_EQ(run("verify " + cfg.string() + " --control " + control + " --grid 0x3 --out " + (dir / "v4").string()).code, 1);

  const auto m = run("simulate " + cfg.string() + " --control " + control +
                     " --alpha 0 --beta 1 --out " + (dir / "sim").string());
  ASSERT_EQ(m.code, 0) << m.out;
  const auto member = momentctl::io::read_csv(dir / "sim" / "member.csv");
  EXPECT_EQ(member.data.rows(), 31);
  EXPECT_EQ(member.data(0, 0), 0.0);
  EXPECT_EQ(member.data(30, 0), 1.0);
}

TEST(Cli, NotConvergedExitsTwo) {
  const auto dir = temp_dir("maxiter");
  json j = small_bloch();
  j["solver"]["max_iter_stage1"] = 1;
  j["solver"]["max_iter_stage2"] = 1;
  const auto r = run("synth " + write_cfg(dir, j).string() + " --quiet --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_TRUE(fs::exists(dir / "o" / "control.csv"));
}

TEST(Cli, ShapeMismatchExitsOne) {
  const auto dir = temp_dir("shape");
  const auto cfg = write_cfg(dir, small_bloch());
  std::ofstream(dir / "bad.csv") << "t,u1\n0,1\n";
  EXPECT_EQ(run("verify " + cfg.string() + " --control " + (dir / "bad.csv").string()).code, 1);
  EXPECT_EQ(run("simulate " + cfg.string() + " --control " + (dir / "bad.csv").string() +
                " --alpha 0 --beta 1")
                .code,
            1);
}

TEST(Cli, ZeroControlCenterMemberIsConstant) {
  const auto dir = temp_dir("zero");
  const auto cfg = write_cfg(dir, small_bloch());
  std::ofstream f(dir / "zero.csv");
  f << "t,u1,u2\n";
  for (int k = 0; k < 30; ++k) f << momentctl::io::format_double(k / 30.0) << ",0,0\n";
  f.close();
  ASSERT_EQ(run("simulate " + cfg.string() + " --control " + (dir / "zero.csv").string() +
                " --alpha 0 --beta 1 --out " + dir.string())
                .code,
            0);
  const auto t = momentctl::io::read_csv(dir / "member.csv");
  for (Eigen::Index k = 0; k < t.data.rows(); ++k) {
    EXPECT_EQ(t.data(k, 1), 0.0);
    EXPECT_EQ(t.data(k, 2), 0.0);
    EXPECT_EQ(t.data(k, 3), 1.0);
  }
}

TEST(Cli, OutputDirectoryPrecedence) {
  const auto dir = temp_dir("outdir");
  json j = small_bloch();
  j["solver"]["max_iter_stage1"] = 1;
  j["solver"]["max_iter_stage2"] = 1;
  j["output_dir"] = (dir / "from_cfg").string();
  const auto cfg = write_cfg(dir, j);
  run("synth " + cfg.string() + " --quiet");
  EXPECT_TRUE(fs::exists(dir / "from_cfg" / "control.csv"));
  run("synth " + cfg.string() + " --quiet", "MOMENTCTL_OUT=" + (dir / "from_env").string());
  EXPECT_TRUE(fs::exists(dir / "from_env" / "control.csv"));
  run("synth " + cfg.string() + " --quiet --out " + (dir / "from_flag").string(),
      "MOMENTCTL_OUT=" + (dir / "env2").string());
  EXPECT_TRUE(fs::exists(dir / "from_flag" / "control.csv"));
  EXPECT_FALSE(fs::exists(dir / "env2"));
}

TEST(Cli, RamanNathConfigShape) {
  // Bundled config with the iteration caps cut down: only the output shape
  // is checked here.
  const auto dir = temp_dir("rn");
  std::ifstream in(fs::path(MOMENTCTL_SOURCE_DIR) / "configs" / "raman_nath_n1.cfg");
  json j = json::parse(in, nullptr, true, true);
  j["solver"]["max_iter_stage1"] = 1;
  j["solver"]["max_iter_stage2"] = 1;
  const auto r = run("synth " + write_cfg(dir, j).string() + " --quiet --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 2) << r.out;
  const auto c = momentctl::io::read_csv(dir / "o" / "control.csv");
  EXPECT_EQ(c.data.rows(), 600);
  EXPECT_EQ(c.data.cols(), 2);
  EXPECT_GE(c.data.col(1).minCoeff(), 0.0);
  EXPECT_LE(c.data.col(1).maxCoeff(), 10.0);
  const json rep = json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_EQ(rep["dimensions"]["D"], 448);
  EXPECT_EQ(rep["dimensions"]["equations"], 268800);
  EXPECT_EQ(rep["embedding"]["pairs"][1], json({1, 9}));
}
