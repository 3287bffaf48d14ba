#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ivbounds/bounds.hpp"
#include "ivbounds/interval.hpp"
#include "ivbounds/model.hpp"
#include "ivbounds/optimize.hpp"

namespace ivbounds {

// IV-Tobit with (U, V) a K-component bivariate normal mixture whose
// weighted means sum to zero.
struct MixtureParams {
    double theta1 = 0.0;
    Eigen::VectorXd theta2;
    Eigen::VectorXd pi1;
    Eigen::VectorXd pi2;
    std::vector<double> weights;
    std::vector<Eigen::Vector2d> means;  // (mu_U, mu_V)
    std::vector<Eigen::Matrix2d> covs;

    int k() const { return static_cast<int>(weights.size()); }
    Eigen::VectorXd theta() const;
    // Throws std::invalid_argument on a broken simplex, location constraint
    // or non-PD covariance.
    void check() const;
    std::vector<ComponentVariances> components() const;
    // Marginal variance of U.
    double sigma_u2() const;
};

double mixed_tobit_loglik(const MixtureParams& params, const Dataset& d);

// Unconstrained parameterization used by the optimizer:
// (theta, pi, K-1 logits, K-1 free mean pairs, 3K Cholesky entries
// (log l11, l21, log l22) per component). The last component's logit is 0
// and its mean solves the location constraint.
Eigen::Index mixture_free_size(int k, Eigen::Index dw, Eigen::Index dz);
Eigen::VectorXd mixture_to_free(const MixtureParams& params);
MixtureParams mixture_from_free(const Eigen::VectorXd& free, int k, Eigen::Index dw, Eigen::Index dz);
double mixture_loglik_free(const Eigen::VectorXd& free, int k, const Dataset& d,
                           Eigen::VectorXd* grad = nullptr);

// theta, pi, then per component (p, mu_U, mu_V, sigma_U^2, sigma_UV, sigma_V^2).
Eigen::VectorXd mixture_natural(const MixtureParams& params);

struct MixtureOptions {
    int starts = 8;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    QuasiNewtonOptions optimizer{};
};

struct MixtureFit {
    MixtureParams params;
    double loglik = 0.0;
    double bic = 0.0;
    int iterations = 0;
    int start_index = 0;
    int failed_starts = 0;
    Eigen::VectorXd free;
    Eigen::MatrixXd free_vcov;     // inverse negative Hessian
    Eigen::MatrixXd natural_vcov;  // in the mixture_natural layout
};

// Direct maximum likelihood over `starts` initializations; the best
// log-likelihood wins, ties going to the lower start index. Throws
// DataError when 6K + dim(theta, pi) + 1 >= n / 10, ConvergenceError when
// every start fails and EstimationError when a weight falls below 1e-6.
MixtureFit fit_mixture(const Dataset& d, int k, const MixtureOptions& options = {});

// Intersection of the per-component identified sets for sigma_ustar2.
Interval mixture_sigma_ustar_interval(const MixtureParams& params);

}  // namespace ivbounds
