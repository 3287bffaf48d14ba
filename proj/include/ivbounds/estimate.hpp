#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "ivbounds/model.hpp"
#include "ivbounds/optimize.hpp"

namespace ivbounds {

struct FirstStageFit {
    Eigen::VectorXd pi1;
    Eigen::VectorXd pi2;
    Eigen::VectorXd residuals;
    double sigma_v2_hat = 0.0;  // RSS / n
};

// OLS of x on [z w]. Throws DataError if the design is rank deficient.
FirstStageFit first_stage(const Dataset& d);

// Second-stage control-function fit of y on (x, w, vhat).
struct SecondStageFit {
    double b1 = 0.0;
    Eigen::VectorXd b2;
    double bv = 0.0;
    double sigma_e2 = 1.0;  // fixed at 1 for probit
    double loglik = 0.0;
    int iterations = 0;
};

// Tobit log-likelihood with params = (b1, b2', bv, log sigma_e).
// Fills *grad with the analytic score when non-null. Throws NumericalError
// (carrying the row) on a non-finite contribution.
double tobit_loglik(const Eigen::VectorXd& params, const Dataset& d, const Eigen::VectorXd& vhat,
                    Eigen::VectorXd* grad = nullptr);
// Probit log-likelihood with params = (b1, b2', bv) on the unit-variance scale.
double probit_loglik(const Eigen::VectorXd& params, const Dataset& d, const Eigen::VectorXd& vhat,
                     Eigen::VectorXd* grad = nullptr);

// Exact joint log-likelihood of (y, x) given (z, w). Free parameters:
// (theta1, theta2', pi1', pi2', log sigma_V, atanh rho_UV[, log sigma_U]),
// the last one for Tobit only (probit fixes sigma_U = 1).
double joint_loglik(ModelKind kind, const Eigen::VectorXd& free, const Dataset& d,
                    Eigen::VectorXd* grad = nullptr);
Eigen::VectorXd joint_free_parameters(const ReducedFormFit& fit);
ReducedFormFit reduced_form_from_joint(ModelKind kind, const Eigen::VectorXd& free, Eigen::Index dw,
                                       Eigen::Index dz);

struct FitOptions {
    QuasiNewtonOptions optimizer{};
    int restarts = 3;
    std::uint64_t seed = 0;
};

// Two-step estimator. The covariance stacks the first-stage moments with the
// second-stage score so the generated regressor is accounted for.
ReducedFormFit fit_two_step(const Dataset& d, ModelKind kind, const FitOptions& options = {});

// Joint maximum likelihood started from the two-step estimate; covariance
// from the inverse negative Hessian.
ReducedFormFit fit_joint_mle(const Dataset& d, ModelKind kind, const FitOptions& options = {});

// Throws EstimationError when |rho_UV| >= 1 - 1e-6.
void check_endogeneity(const ReducedFormFit& fit);

}  // namespace ivbounds
