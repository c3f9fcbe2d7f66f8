#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "momentctl/dynamics.hpp"
#include "momentctl/verify.hpp"

namespace momentctl::io {

/// Comma-separated table with a header row. Numbers are written with 17
/// significant digits so that they parse back bit-exactly.
struct Table {
  std::vector<std::string> header;
  Matrix data;
};

void write_csv(const std::filesystem::path& path, const Table& t);
Table read_csv(const std::filesystem::path& path);
std::string format_double(double v);

/// Columns t, u1..um with one row per interval (t = left endpoint).
void write_control(const std::filesystem::path& path,
                   const dynamics::ControlTrajectory& ctrl);
/// Rows must match `grid`'s left endpoints exactly and there must be `m`
/// control columns.
dynamics::ControlTrajectory read_control(const std::filesystem::path& path,
                                         const dynamics::TimeGrid& grid,
                                         Index m);

/// Columns t, x1..xn with K+1 rows.
void write_trajectory(const std::filesystem::path& path,
                      const dynamics::TimeGrid& grid, const Matrix& X);

/// Columns alpha, beta, terminal_error in row-major grid order.
void write_contours(const std::filesystem::path& path,
                    const verify::VerificationResult& r);

}  // namespace momentctl::io
