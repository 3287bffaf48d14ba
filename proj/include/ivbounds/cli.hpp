#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ivbounds/csv.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds::cli {

enum ExitCode : int {
    ok = 0,
    input_error = 2,
    convergence_error = 3,
    empty_intersection = 4,
};

// Builds a Dataset from named columns. In `w`, the token "1" adds an
// intercept column.
Dataset dataset_from_table(const CsvTable& table, const std::string& y, const std::string& x,
                           const std::vector<std::string>& w, const std::vector<std::string>& z);

// Entry point of the ivbounds executable; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ivbounds::cli
