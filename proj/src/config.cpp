#include "momentctl/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "momentctl/io.hpp"
#include "momentctl/systems.hpp"

namespace momentctl::config {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw Error("config: '" + key + "': " + what);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      fail(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
  }
}

const json& require(const json& obj, const std::string& key,
                    const std::string& path) {
  if (!obj.contains(key)) fail(path, "missing required key");
  return obj.at(key);
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

long long get_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long long>();
}

bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

// null means unbounded on that side.
double get_bound(const json& v, const std::string& path, double unbounded) {
  if (v.is_null()) return unbounded;
  return get_number(v, path);
}

Vector get_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Index>(i)) = get_number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

Matrix get_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty()) fail(path + "[0]", "expected a non-empty row");
  const std::size_t cols = v[0].size();
  Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != cols) fail(rp, "ragged matrix row");
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Index>(i), static_cast<Index>(j)) =
          get_number(v[i][j], rp + "[" + std::to_string(j) + "]");
    }
  }
  return out;
}

ParamInterval get_interval(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) fail(path, "expected [lo, hi]");
  const double lo = get_number(v[0], path + "[0]");
  const double hi = get_number(v[1], path + "[1]");
  if (!(lo < hi)) fail(path, "requires lo < hi");
  return {lo, hi};
}

ControlBounds get_bounds(const json& v, const std::string& path,
                         ControlBounds b) {
  if (!v.is_object()) fail(path, "expected an object");
  reject_unknown(v, path, {"u_min", "u_max", "du_min", "du_max"});
  if (v.contains("u_min")) b.u_min = get_bound(v["u_min"], path + ".u_min", -kInf);
  if (v.contains("u_max")) b.u_max = get_bound(v["u_max"], path + ".u_max", kInf);
  if (v.contains("du_min")) b.du_min = get_bound(v["du_min"], path + ".du_min", -kInf);
  if (v.contains("du_max")) b.du_max = get_bound(v["du_max"], path + ".du_max", kInf);
  try {
    b.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return b;
}

json bound_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

SystemSpec parse_system(const json& j) {
  const std::string path = "system";
  if (!j.is_object()) fail(path, "expected an object");
  const json& tj = require(j, "type", path + ".type");
  if (!tj.is_string()) fail(path + ".type", "expected a string");
  const std::string type = tj.get<std::string>();
  SystemSpec spec;
  auto wrap = [&](auto&& build) {
    try {
      build();
    } catch (const Error& e) {
      fail(path, e.what());
    }
  };

  if (type == "bloch") {
    reject_unknown(j, path, {"type", "alpha", "beta", "x0", "xT", "bounds"});
    spec.kind = SystemSpec::Kind::kBloch;
    const auto a = get_interval(require(j, "alpha", path + ".alpha"), path + ".alpha");
    const auto b = get_interval(require(j, "beta", path + ".beta"), path + ".beta");
    const Vector x0 = get_vector(require(j, "x0", path + ".x0"), path + ".x0");
    const Vector xT = get_vector(require(j, "xT", path + ".xT"), path + ".xT");
    if (x0.size() != 3) fail(path + ".x0", "Bloch states have 3 components");
    if (xT.size() != 3) fail(path + ".xT", "Bloch states have 3 components");
    ControlBounds bounds;
    if (j.contains("bounds")) bounds = get_bounds(j["bounds"], path + ".bounds", bounds);
    wrap([&] { spec.system = systems::bloch_system(a, b, x0, xT, bounds); });
  } else if (type == "raman_nath") {
    reject_unknown(j, path, {"type", "N_prime", "n_prime", "omega_r", "alpha",
                             "beta", "bounds"});
    spec.kind = SystemSpec::Kind::kRamanNath;
    spec.N_prime = static_cast<int>(
        get_integer(require(j, "N_prime", path + ".N_prime"), path + ".N_prime"));
    spec.n_prime = static_cast<int>(
        get_integer(require(j, "n_prime", path + ".n_prime"), path + ".n_prime"));
    if (spec.N_prime < 1) fail(path + ".N_prime", "must be >= 1");
    if (spec.n_prime < 1 || spec.n_prime > spec.N_prime) {
      fail(path + ".n_prime", "must lie in [1, N_prime]");
    }
    if (j.contains("omega_r")) spec.omega_r = get_number(j["omega_r"], path + ".omega_r");
    if (!(spec.omega_r > 0.0)) fail(path + ".omega_r", "must be positive");
    const auto a = get_interval(require(j, "alpha", path + ".alpha"), path + ".alpha");
    const auto b = get_interval(require(j, "beta", path + ".beta"), path + ".beta");
    ControlBounds bounds = systems::raman_nath_default_bounds(spec.n_prime);
    if (j.contains("bounds")) bounds = get_bounds(j["bounds"], path + ".bounds", bounds);
    wrap([&] {
      spec.system = systems::raman_nath_system(spec.N_prime, spec.n_prime, a, b,
                                               spec.omega_r, bounds);
    });
  } else if (type == "custom") {
    reject_unknown(j, path, {"type", "drift", "inputs", "alpha", "beta", "x0",
                             "xT", "bounds"});
    spec.kind = SystemSpec::Kind::kCustom;
    Matrix drift = get_matrix(require(j, "drift", path + ".drift"), path + ".drift");
    const json& ins = require(j, "inputs", path + ".inputs");
    if (!ins.is_array() || ins.empty()) fail(path + ".inputs", "expected a non-empty array of matrices");
    std::vector<Matrix> inputs;
    for (std::size_t i = 0; i < ins.size(); ++i) {
      inputs.push_back(get_matrix(ins[i], path + ".inputs[" + std::to_string(i) + "]"));
    }
    const auto a = get_interval(require(j, "alpha", path + ".alpha"), path + ".alpha");
    const auto b = get_interval(require(j, "beta", path + ".beta"), path + ".beta");
    Vector x0 = get_vector(require(j, "x0", path + ".x0"), path + ".x0");
    Vector xT = get_vector(require(j, "xT", path + ".xT"), path + ".xT");
    ControlBounds bounds;
    if (j.contains("bounds")) bounds = get_bounds(j["bounds"], path + ".bounds", bounds);
    wrap([&] {
      spec.system = systems::custom_system(std::move(drift), std::move(inputs), a, b,
                                           std::move(x0), std::move(xT), bounds);
    });
  } else {
    fail(path + ".type", "expected one of bloch, raman_nath, custom");
  }
  return spec;
}

void parse_solver(const json& j, RunConfig& cfg,
                  const std::filesystem::path& base_dir) {
  const std::string path = "solver";
  if (!j.is_object()) fail(path, "expected an object");
  reject_unknown(j, path, {"epsilon", "delta", "lambda0", "mu0", "max_iter_stage1",
                           "max_iter_stage2", "qp_tol", "qp_max_iter",
                           "initial_control", "freeze_final_interval",
                           "refine_max_iter", "max_refinements"});
  auto& s = cfg.solver;
  auto positive = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    dst = get_number(j[key], path + "." + key);
    if (!(dst > 0.0)) fail(path + "." + key, "must be positive");
  };
  auto at_least = [&](const char* key, int& dst, int lo) {
    if (!j.contains(key)) return;
    const long long v = get_integer(j[key], path + "." + key);
    if (v < lo) fail(path + "." + key, "must be >= " + std::to_string(lo));
    dst = static_cast<int>(v);
  };
  positive("epsilon", s.epsilon);
  positive("delta", s.delta);
  positive("lambda0", s.lambda0);
  positive("mu0", s.mu0);
  positive("qp_tol", s.qp_tol);
  at_least("max_iter_stage1", s.max_iter_stage1, 1);
  at_least("max_iter_stage2", s.max_iter_stage2, 1);
  at_least("qp_max_iter", s.qp_max_iter, 1);
  at_least("refine_max_iter", s.refine_max_iter, 1);
  if (j.contains("max_refinements")) {
    s.max_refinements = static_cast<int>(
        get_integer(j["max_refinements"], path + ".max_refinements"));
  }
  if (j.contains("freeze_final_interval")) {
    s.freeze_final_interval =
        get_bool(j["freeze_final_interval"], path + ".freeze_final_interval");
  }

  if (j.contains("initial_control")) {
    const json& ic = j["initial_control"];
    const std::string ip = path + ".initial_control";
    if (ic.is_string()) {
      const auto kind = ic.get<std::string>();
      if (kind == "auto") {
        s.initial_control.kind = synth::InitialControl::Kind::kAuto;
      } else if (kind == "zeros") {
        s.initial_control.kind = synth::InitialControl::Kind::kZeros;
      } else {
        fail(ip, "expected \"auto\", \"zeros\", {\"constant\": v} or {\"file\": path}");
      }
    } else if (ic.is_object() && ic.size() == 1 && ic.contains("constant")) {
      s.initial_control.kind = synth::InitialControl::Kind::kConstant;
      s.initial_control.value = get_number(ic["constant"], ip + ".constant");
    } else if (ic.is_object() && ic.size() == 1 && ic.contains("file")) {
      if (!ic["file"].is_string()) fail(ip + ".file", "expected a path");
      std::filesystem::path p = ic["file"].get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) fail(ip + ".file", "file not found: " + p.string());
      cfg.initial_control_file = p;
    } else {
      fail(ip, "expected \"auto\", \"zeros\", {\"constant\": v} or {\"file\": path}");
    }
  }
}

void parse_grid(const json& j, RunConfig& cfg) {
  const std::string path = "grid";
  if (!j.is_object()) fail(path, "expected an object");
  reject_unknown(j, path, {"n_alpha", "n_beta", "spacing"});
  if (j.contains("n_alpha")) {
    const long long v = get_integer(j["n_alpha"], path + ".n_alpha");
    if (v < 2) fail(path + ".n_alpha", "must be >= 2");
    cfg.grid.n_alpha = static_cast<int>(v);
  }
  if (j.contains("n_beta")) {
    const long long v = get_integer(j["n_beta"], path + ".n_beta");
    if (v < 2) fail(path + ".n_beta", "must be >= 2");
    cfg.grid.n_beta = static_cast<int>(v);
  }
  if (j.contains("spacing")) {
    const json& s = j["spacing"];
    if (s == "uniform") {
      cfg.grid.spacing = verify::GridSpec::Spacing::kUniform;
    } else if (s == "chebyshev") {
      cfg.grid.spacing = verify::GridSpec::Spacing::kChebyshev;
    } else {
      fail(path + ".spacing", "expected \"uniform\" or \"chebyshev\"");
    }
  }
}

}  // namespace

dynamics::TimeGrid RunConfig::time_grid() const {
  return dynamics::TimeGrid::uniform(horizon, steps);
}

moments::MomentSystem RunConfig::moment_system() const {
  return moments::lift(system.system, N_alpha, N_beta);
}

RunConfig parse(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail("<root>", "expected a JSON object");
  reject_unknown(j, "", {"system", "horizon", "steps", "truncation", "solver",
                         "grid", "output_dir", "seed"});
  RunConfig cfg;
  cfg.system = parse_system(require(j, "system", "system"));

  cfg.horizon = get_number(require(j, "horizon", "horizon"), "horizon");
  if (!(cfg.horizon > 0.0)) fail("horizon", "must be positive");
  const long long K = get_integer(require(j, "steps", "steps"), "steps");
  if (K < 1) fail("steps", "must be >= 1");
  cfg.steps = static_cast<Index>(K);

  const json& tr = require(j, "truncation", "truncation");
  if (!tr.is_object()) fail("truncation", "expected an object");
  reject_unknown(tr, "truncation", {"N_alpha", "N_beta"});
  const long long na = get_integer(require(tr, "N_alpha", "truncation.N_alpha"),
                                   "truncation.N_alpha");
  const long long nb = get_integer(require(tr, "N_beta", "truncation.N_beta"),
                                   "truncation.N_beta");
  if (na < 0) fail("truncation.N_alpha", "must be >= 0");
  if (nb < 0) fail("truncation.N_beta", "must be >= 0");
  cfg.N_alpha = static_cast<int>(na);
  cfg.N_beta = static_cast<int>(nb);

  if (j.contains("solver")) parse_solver(j["solver"], cfg, base_dir);
  if (j.contains("grid")) parse_grid(j["grid"], cfg);
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) fail("output_dir", "expected a path");
    cfg.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("seed")) {
    const json& s = j["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      fail("seed", "expected a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }

  if (cfg.initial_control_file) {
    auto& ic = cfg.solver.initial_control;
    ic.kind = synth::InitialControl::Kind::kUser;
    try {
      ic.values = io::read_control(*cfg.initial_control_file, cfg.time_grid(),
                                   cfg.system.system.input_count())
                      .U;
    } catch (const Error& e) {
      fail("solver.initial_control.file", e.what());
    }
  }
  return cfg;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in.good()) throw Error("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error("config: " + path.string() + ": " + e.what());
  }
  return parse(j, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  json out;
  const auto& sys = cfg.system.system;
  json s;
  switch (cfg.system.kind) {
    case SystemSpec::Kind::kBloch:
      s["type"] = "bloch";
      s["x0"] = vector_json(sys.x0);
      s["xT"] = vector_json(sys.xT);
      break;
    case SystemSpec::Kind::kRamanNath:
      s["type"] = "raman_nath";
      s["N_prime"] = cfg.system.N_prime;
      s["n_prime"] = cfg.system.n_prime;
      s["omega_r"] = cfg.system.omega_r;
      break;
    case SystemSpec::Kind::kCustom:
      s["type"] = "custom";
      s["drift"] = matrix_json(sys.drift);
      s["inputs"] = json::array();
      for (const auto& b : sys.inputs) s["inputs"].push_back(matrix_json(b));
      s["x0"] = vector_json(sys.x0);
      s["xT"] = vector_json(sys.xT);
      break;
  }
  s["alpha"] = {sys.alpha_range.lo(), sys.alpha_range.hi()};
  s["beta"] = {sys.beta_range.lo(), sys.beta_range.hi()};
  s["bounds"] = {{"u_min", bound_json(sys.bounds.u_min)},
                 {"u_max", bound_json(sys.bounds.u_max)},
                 {"du_min", bound_json(sys.bounds.du_min)},
                 {"du_max", bound_json(sys.bounds.du_max)}};
  out["system"] = s;
  out["horizon"] = cfg.horizon;
  out["steps"] = cfg.steps;
  out["truncation"] = {{"N_alpha", cfg.N_alpha}, {"N_beta", cfg.N_beta}};

  const auto& sv = cfg.solver;
  json ic;
  switch (sv.initial_control.kind) {
    case synth::InitialControl::Kind::kAuto: ic = "auto"; break;
    case synth::InitialControl::Kind::kZeros: ic = "zeros"; break;
    case synth::InitialControl::Kind::kConstant:
      ic = {{"constant", sv.initial_control.value}};
      break;
    case synth::InitialControl::Kind::kUser:
      ic = {{"file", cfg.initial_control_file ? cfg.initial_control_file->string()
                                              : std::string()}};
      break;
  }
  out["solver"] = {{"epsilon", sv.epsilon},
                   {"delta", sv.delta},
                   {"lambda0", sv.lambda0},
                   {"mu0", sv.mu0},
                   {"max_iter_stage1", sv.max_iter_stage1},
                   {"max_iter_stage2", sv.max_iter_stage2},
                   {"qp_tol", sv.qp_tol},
                   {"qp_max_iter", sv.qp_max_iter},
                   {"initial_control", ic},
                   {"freeze_final_interval", sv.freeze_final_interval},
                   {"refine_max_iter", sv.refine_max_iter},
                   {"max_refinements", sv.max_refinements}};
  out["grid"] = {{"n_alpha", cfg.grid.n_alpha},
                 {"n_beta", cfg.grid.n_beta},
                 {"spacing", cfg.grid.spacing == verify::GridSpec::Spacing::kUniform
                                 ? "uniform"
                                 : "chebyshev"}};
  out["output_dir"] = cfg.output_dir.string();
  out["seed"] = cfg.seed;
  return out;
}

}  // namespace momentctl::config
