#pragma once

#include <Eigen/Dense>

#include "ivbounds/interval.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds {

struct EffectBounds {
    double lower = 0.0;
    double upper = 0.0;
    double naive = 0.0;  // effect at sigma_ustar2 = sigma_u2
    double argmin_sigma2 = 0.0;
    double argmax_sigma2 = 0.0;
};

// Partial effects of covariate j at h = (x, w')' with theta = (theta1, theta2')'.
// sigma_ustar2 = 0 gives the limit as the structural error vanishes.
double pe_tobit_mean(const Eigen::VectorXd& h, Eigen::Index j, const Eigen::VectorXd& theta,
                     double sigma_ustar2);
double pe_probability(const Eigen::VectorXd& h, Eigen::Index j, const Eigen::VectorXd& theta,
                      double sigma_ustar2);

// theta1 * (pi1' z_i + pi2' w_i) + theta2' w_i for every row.
Eigen::VectorXd ape_index(const ReducedFormFit& fit, const Dataset& d);
// 2 sigma_ustar2 - sigma_u2 + theta1^2 sigma_v2; must be positive.
double ape_scale2(const ReducedFormFit& fit, double sigma_ustar2);

// Per-row terms whose sample mean is the APE.
Eigen::VectorXd ape_terms(EffectKind kind, const ReducedFormFit& fit, const Dataset& d, Eigen::Index j,
                          double sigma_ustar2);
double ape_tobit_mean(const ReducedFormFit& fit, const Dataset& d, Eigen::Index j, double sigma_ustar2);
double ape_probability(const ReducedFormFit& fit, const Dataset& d, Eigen::Index j, double sigma_ustar2);

// Dispatches on query.kind; `d` is required for APE kinds.
double effect_value(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                    double sigma_ustar2);

EffectBounds pe_bounds(const EffectQuery& query, const ReducedFormFit& fit, const Interval& interval);
EffectBounds ape_bounds(EffectKind kind, const ReducedFormFit& fit, const Dataset& d, Eigen::Index j,
                        const Interval& interval);
EffectBounds effect_bounds(const EffectQuery& query, const ReducedFormFit& fit, const Dataset* d,
                           const Interval& interval);

}  // namespace ivbounds
