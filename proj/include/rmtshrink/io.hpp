#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rmtshrink/rmt_core.hpp"

namespace rmtshrink::io {

/// n rows of n comma-separated values. Validates shape, finiteness and
/// symmetry; errors carry the 1-based line number or offending pair.
Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

/// One value per line.
std::vector<double> read_values(const std::filesystem::path& path);
void write_values(const std::filesystem::path& path, const std::vector<double>& values);

using Column = std::pair<std::string, std::vector<double>>;

/// Header line of column names, then one row per index. All columns must
/// have the same length.
void write_series(const std::filesystem::path& path, const std::vector<Column>& columns);

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Shortest round-trippable decimal form.
std::string format_double(double x);

}  // namespace rmtshrink::io
