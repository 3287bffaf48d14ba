#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ivbounds {

// RFC 4180 table with a mandatory header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Throws DataError(bad_column) naming the column when absent.
    std::size_t column(const std::string& name) const;
    // Parses a column as doubles. Empty cells, "NA" and "nan" become NaN;
    // other non-numeric text throws DataError naming the column and row.
    Eigen::VectorXd numeric(const std::string& name) const;
};

// Throws DataError(bad_column) on unterminated quotes, duplicate or empty
// header names and rows whose width differs from the header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace ivbounds
