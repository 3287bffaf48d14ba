#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace ivbounds {

// Reasons a dataset is rejected by validation.
enum class DataErrorCode {
    length_mismatch,
    too_few_rows,
    no_censored,
    no_uncensored,
    invalid_outcome,
    rank_deficient,
    degenerate_first_stage,
    bad_column,
};

const char* to_string(DataErrorCode code);

class DataError : public std::runtime_error {
public:
    DataError(DataErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    DataErrorCode code() const noexcept { return code_; }

private:
    DataErrorCode code_;
};

// Optimizer gave up; carries the last iterate for diagnostics.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd last = {})
        : std::runtime_error(what), last_iterate_(std::move(last)) {}
    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

private:
    Eigen::VectorXd last_iterate_;
};

// Estimates exist but are unusable (e.g. |rho_UV| numerically 1).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A function evaluation produced NaN/inf; `where` is the abscissa or row.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double where)
        : std::runtime_error(what), where_(where) {}
    double where() const noexcept { return where_; }

private:
    double where_;
};

class EmptyIntersectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ivbounds
