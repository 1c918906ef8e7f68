#pragma once

// Text formats: dense CSV with a header row and a row-name column, sparse
// MatrixMarket coordinate files, and mask files listing unobserved entries.
//
// CSV: the first line holds a corner cell followed by column names; every
// other line holds a row name followed by m values. "NA", "NaN" or an
// empty cell marks a missing entry. Values are written with 17 significant
// digits so that a write/read cycle is exact.
//
// MatrixMarket: "%%MatrixMarket matrix coordinate real|integer general",
// 1-based entries; absent entries are observed zeros.
//
// Mask: one "row col" pair (1-based) per line for each unobserved entry;
// blank lines and lines starting with '#' or '%' are ignored.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gmfkit/model.hpp"

namespace gmfkit {

struct LabeledMatrix {
  Matrix values;
  /// true = observed
  Mask mask;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
};

/// "%.17g"; non-finite values as "NaN", "Inf", "-Inf".
std::string format_double(double x);

LabeledMatrix parse_csv(std::string_view text);
LabeledMatrix read_csv(const std::filesystem::path& path);

std::string to_csv(const Matrix& values, const std::vector<std::string>& row_names = {},
                   const std::vector<std::string>& col_names = {}, const Mask* mask = nullptr);
/// Missing names default to r1.., c1..; entries with mask false are "NA".
void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& row_names = {},
               const std::vector<std::string>& col_names = {}, const Mask* mask = nullptr);

Matrix parse_matrix_market(std::string_view text);
Matrix read_matrix_market(const std::filesystem::path& path);
/// Writes the nonzero entries.
void write_matrix_market(const std::filesystem::path& path, const Matrix& values);

/// Mask with the listed entries set to false.
Mask parse_mask(std::string_view text, Index rows, Index cols);
Mask read_mask(const std::filesystem::path& path, Index rows, Index cols);
void write_mask(const std::filesystem::path& path, const Mask& mask);

/// Response from a .csv or .mtx file (chosen by extension) plus an optional
/// mask file. Unobserved values are stored as 0.
LabeledMatrix read_response(const std::filesystem::path& path,
                            const std::filesystem::path& mask_path = {});

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace gmfkit
