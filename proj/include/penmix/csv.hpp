#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "penmix/dataset.hpp"

namespace penmix {

/// Header plus string cells. Quoted fields are unquoted; no embedded newlines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column_index(const std::string& name) const; ///< -1 if absent
    Index require_column(const std::string& name) const; ///< throws InputError
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest round-trippable text for a double.
std::string format_double(double value);

/// Parses a numeric cell; throws InputError naming row/column on failure,
/// including for empty (missing) cells.
double parse_cell(const std::string& cell, std::size_t row, const std::string& column);

/// Builds a Dataset from a CSV whose column `response` holds y; every other
/// column is a covariate. Missing values are rejected.
Dataset dataset_from_csv(const CsvTable& table, const std::string& response,
                         const ResponseFamily& family);

} // namespace penmix
