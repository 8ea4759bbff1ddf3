#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hte/types.hpp"

namespace hte::io {

/// A parsed CSV file: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws Error naming the column when absent.
  std::size_t column(std::string_view name) const;
};

/// Parses RFC-4180-style CSV text (quoted fields, CRLF tolerated). Header required.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double x);
double parse_double(std::string_view s, std::string_view context);

std::string csv_escape(std::string_view field);
std::string to_csv(const CsvTable& table);

/// Writes `contents` to a sibling temp file then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

/// Dataset CSV: income, ..., W, Y columns.
std::string dataset_to_csv(const Dataset& data);
std::string ground_truth_to_csv(const GroundTruth& truth);

/// Builds a Dataset from a table. Covariates default to every column except
/// the treatment and outcome columns. Throws Error on missing columns,
/// non-numeric cells, or non-binary treatment (listing up to ten rows).
Dataset dataset_from_table(const CsvTable& table, const std::string& treatment_col,
                           const std::string& outcome_col,
                           const std::vector<std::string>& covariate_cols = {});

}  // namespace hte::io
