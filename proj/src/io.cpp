#include "momentctl/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace momentctl::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path,
                    std::size_t line) {
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r')) ++end;
  // ERANGE on underflow still returns the correctly rounded subnormal.
  const bool overflow = errno == ERANGE && std::isinf(v);
  MOMENTCTL_REQUIRE(end != begin && end && *end == '\0' && !overflow,
                    path.string() + ":" + std::to_string(line) +
                        ": invalid number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const Table& t) {
  MOMENTCTL_REQUIRE(static_cast<Index>(t.header.size()) == t.data.cols(),
                    "CSV header does not match column count");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  MOMENTCTL_REQUIRE(out.good(), "cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    out << (j ? "," : "") << t.header[j];
  }
  out << '\n';
  for (Index i = 0; i < t.data.rows(); ++i) {
    for (Index j = 0; j < t.data.cols(); ++j) {
      out << (j ? "," : "") << format_double(t.data(i, j));
    }
    out << '\n';
  }
  MOMENTCTL_REQUIRE(out.good(), "write failed for " + path.string());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  MOMENTCTL_REQUIRE(in.good(), "cannot open " + path.string());
  Table t;
  std::string line;
  MOMENTCTL_REQUIRE(static_cast<bool>(std::getline(in, line)),
                    path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_fields(line);
  const std::size_t cols = t.header.size();

  std::vector<double> values;
  std::size_t lineno = 1;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    MOMENTCTL_REQUIRE(fields.size() == cols,
                      path.string() + ":" + std::to_string(lineno) +
                          ": expected " + std::to_string(cols) + " fields");
    for (const auto& f : fields) values.push_back(parse_double(f, path, lineno));
    ++rows;
  }
  t.data.resize(rows, static_cast<Index>(cols));
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < static_cast<Index>(cols); ++j)
      t.data(i, j) = values[i * cols + j];
  return t;
}

void write_control(const std::filesystem::path& path,
                   const dynamics::ControlTrajectory& ctrl) {
  Table t;
  t.header.push_back("t");
  for (Index i = 0; i < ctrl.inputs(); ++i) t.header.push_back("u" + std::to_string(i + 1));
  t.data.resize(ctrl.steps(), ctrl.inputs() + 1);
  for (Index k = 0; k < ctrl.steps(); ++k) {
    t.data(k, 0) = ctrl.grid.t(k);
    t.data.row(k).tail(ctrl.inputs()) = ctrl.U.row(k);
  }
  write_csv(path, t);
}

dynamics::ControlTrajectory read_control(const std::filesystem::path& path,
                                         const dynamics::TimeGrid& grid,
                                         Index m) {
  const Table t = read_csv(path);
  MOMENTCTL_REQUIRE(t.data.cols() == m + 1,
                    path.string() + ": expected " + std::to_string(m) +
                        " control columns, found " +
                        std::to_string(t.data.cols() - 1));
  MOMENTCTL_REQUIRE(t.data.rows() == grid.steps(),
                    path.string() + ": expected " + std::to_string(grid.steps()) +
                        " control rows, found " + std::to_string(t.data.rows()));
  for (Index k = 0; k < grid.steps(); ++k) {
    const double tol = 1e-12 * std::max(1.0, grid.horizon());
    MOMENTCTL_REQUIRE(std::abs(t.data(k, 0) - grid.t(k)) <= tol,
                      path.string() + ": time column does not match the config grid at row " +
                          std::to_string(k + 1));
  }
  dynamics::ControlTrajectory c{grid, t.data.rightCols(m)};
  c.validate(m);
  return c;
}

void write_trajectory(const std::filesystem::path& path,
                      const dynamics::TimeGrid& grid, const Matrix& X) {
  MOMENTCTL_REQUIRE(X.rows() == grid.steps() + 1,
                    "trajectory needs K+1 rows");
  Table t;
  t.header.push_back("t");
  for (Index i = 0; i < X.cols(); ++i) t.header.push_back("x" + std::to_string(i + 1));
  t.data.resize(X.rows(), X.cols() + 1);
  for (Index k = 0; k < X.rows(); ++k) {
    t.data(k, 0) = grid.t(k);
    t.data.row(k).tail(X.cols()) = X.row(k);
  }
  write_csv(path, t);
}

void write_contours(const std::filesystem::path& path,
                    const verify::VerificationResult& r) {
  Table t;
  t.header = {"alpha", "beta", "terminal_error"};
  const Index n = static_cast<Index>(r.terminal_error.size());
  t.data.resize(n, 3);
  for (Index i = 0; i < n; ++i) {
    t.data(i, 0) = r.alpha[i];
    t.data(i, 1) = r.beta[i];
    t.data(i, 2) = r.terminal_error[i];
  }
  write_csv(path, t);
}

}  // namespace momentctl::io
