#pragma once

#include <functional>

#include <Eigen/Dense>

#include "ivbounds/interval.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds {

struct BonferroniConfig {
    double alpha = 0.05;
    double alpha1 = 0.005;

    static BonferroniConfig with_alpha(double alpha) { return {alpha, alpha / 10.0}; }
    // Throws std::invalid_argument unless 0 < alpha1 < alpha < 1.
    void check() const;
};

// Central-difference gradient with step 1e-5 * (1 + |x_i|).
Eigen::VectorXd delta_gradient(const std::function<double(const Eigen::VectorXd&)>& g,
                               const Eigen::VectorXd& at);
// sqrt(grad' V grad). Throws NumericalError when the quadratic form is
// below -1e-12.
double delta_se(const std::function<double(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& at,
                const Eigen::MatrixXd& vcov);

struct SigmaUstarCi {
    Interval ci;
    double se_sigma_u2 = 0.0;
    double se_xi1 = 0.0;
    double se_xi2 = 0.0;
    double rho_xi = 1.0;
    double critical = 0.0;  // max-normal quantile used for the lower end
    bool clamped = false;   // lower end was raised to 0
};

// First Bonferroni step: a level 1 - alpha1 interval for sigma_ustar2.
// Throws std::invalid_argument when the fit has no covariance.
SigmaUstarCi ci_sigma_ustar2_detail(const ReducedFormFit& fit, const BonferroniConfig& cfg);
Interval ci_sigma_ustar2(const ReducedFormFit& fit, const BonferroniConfig& cfg);

// Delta-method SE of the effect holding sigma_ustar2 fixed. For APE kinds the
// variance of the sample average is added.
double effect_se(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                 double sigma_ustar2);

// Second step: union over sigma_ustar2 in the first-step interval of
// effect -/+ z_{1-(alpha-alpha1)/2} * se.
Interval ci_effect(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                   const BonferroniConfig& cfg);
// Same, with the first-step interval supplied by the caller.
Interval ci_effect(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                   const BonferroniConfig& cfg, const Interval& sigma_ci);

// Effect at sigma_ustar2 = sigma_u2 -/+ z_{1-alpha/2} times its full delta-method SE.
Interval naive_ci(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                  const BonferroniConfig& cfg);

}  // namespace ivbounds
