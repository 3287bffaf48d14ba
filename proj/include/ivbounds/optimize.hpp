#pragma once

#include <functional>
#include <span>

#include <Eigen/Dense>

#include "ivbounds/interval.hpp"

namespace ivbounds {

using ScalarFn = std::function<double(double)>;
using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
// Returns f(x); fills *grad with the gradient when grad is non-null.
using ObjectiveGradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct ScalarOptimum {
    double argument = 0.0;
    double value = 0.0;
};

// Global minimum over a closed interval: a uniform grid of `grid_points`
// locates the best cell, golden-section search refines inside the two
// neighbouring cells. `extra_points` are evaluated too and win if better.
// Throws NumericalError on a non-finite f value.
ScalarOptimum golden_minimize(const ScalarFn& f, const Interval& interval, double tol = 1e-8,
                              std::span<const double> extra_points = {},
                              int grid_points = 200);
ScalarOptimum golden_maximize(const ScalarFn& f, const Interval& interval, double tol = 1e-8,
                              std::span<const double> extra_points = {},
                              int grid_points = 200);

struct QuasiNewtonOptions {
    // Converged when max|grad| <= grad_tol * (1 + |f|), or <= grad_tol when
    // relative_tol is false.
    double grad_tol = 1e-8;
    bool relative_tol = true;
    int max_iterations = 500;
    // Seed the inverse Hessian with a numerical Hessian at the start point.
    bool hessian_start = true;
};

struct QuasiNewtonResult {
    Eigen::VectorXd argmax;
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // negative definite at a proper maximum
    int iterations = 0;
};

// BFGS ascent with a backtracking line search. Throws ConvergenceError when
// the iteration limit is hit, the line search stalls away from a stationary
// point, or the Hessian at the solution is not negative definite.
QuasiNewtonResult quasi_newton_maximize(const ObjectiveGradFn& f, Eigen::VectorXd start,
                                        const QuasiNewtonOptions& options = {});
// Gradient by central differences.
QuasiNewtonResult quasi_newton_maximize(const ObjectiveFn& f, Eigen::VectorXd start,
                                        const QuasiNewtonOptions& options = {});

Eigen::VectorXd numerical_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x);
// Central differences of the gradient, step eps^(1/3) * max(1, |x_i|).
Eigen::MatrixXd numerical_hessian(const ObjectiveGradFn& f, const Eigen::VectorXd& x);
// Second differences of f alone, step eps^(1/4) * max(1, |x_i|).
Eigen::MatrixXd numerical_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x);

}  // namespace ivbounds
