#pragma once

#include <vector>

#include "ivbounds/interval.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds {

struct SigmaUstarSet {
    Interval interval;
    double xi1 = 0.0;
    double xi2 = 0.0;
};

// Sharp identified set [max(xi1, xi2), sigma_u2] for the variance of the
// structural error. theta1 == 0 gives the singleton {sigma_u2}. Throws
// std::invalid_argument unless sigma_u2 > 0, sigma_v2 > 0 and |rho_UV| < 1.
SigmaUstarSet sigma_ustar_interval(double theta1, double sigma_u2, double sigma_v2, double sigma_uv);
SigmaUstarSet sigma_ustar_interval(const ReducedFormFit& fit);

// xi1 alone, defined for any theta1 (continuous at 0).
double xi1_value(double theta1, double sigma_u2, double sigma_v2, double sigma_uv);

// Largest measurement-error variance compatible with the reduced form.
double epsilon_upper(double theta1, double sigma_u2, double sigma_v2, double sigma_uv);

// Structural variances implied by a candidate sigma_ustar2. The checked
// version requires theta1 != 0 and sigma_ustar2 inside the identified set
// (std::invalid_argument otherwise); the unchecked one only does the algebra.
StructuralParams implied_structural(double sigma_ustar2, double theta1, double sigma_u2,
                                    double sigma_v2, double sigma_uv);
StructuralParams implied_structural_unchecked(double sigma_ustar2, double theta1, double sigma_u2,
                                              double sigma_v2, double sigma_uv);

struct ComponentVariances {
    double sigma_u2 = 1.0;
    double sigma_v2 = 1.0;
    double sigma_uv = 0.0;
};

// Reduced-form variances generated by structural ones.
ComponentVariances forward_map(const StructuralParams& s, double theta1);

// Intersection of the per-component sets. Throws EmptyIntersectionError.
Interval intersect_component_intervals(const std::vector<ComponentVariances>& components,
                                       double theta1);

}  // namespace ivbounds
