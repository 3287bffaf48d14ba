#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ivbounds/interval.hpp"

namespace ivbounds {

enum class ModelKind { tobit, probit };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

// Observed sample (Y_i, X_i, W_i, Z_i). X is the mismeasured endogenous
// regressor; any intercept must be an explicit column of w.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Eigen::MatrixXd w;
    Eigen::MatrixXd z;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index dw() const { return w.cols(); }
    Eigen::Index dz() const { return z.cols(); }
    // [z w], the first-stage design.
    Eigen::MatrixXd first_stage_design() const;
};

struct ValidatedDataset {
    Dataset data;
    std::size_t dropped_rows = 0;
};

// Drops rows with non-finite entries, then checks sample size, outcome
// coding for `kind` and the rank of [z w]. Throws DataError.
ValidatedDataset validate(const Dataset& raw, ModelKind kind);

// Point-identified parameters of the observable model plus their joint
// covariance. Packed order: theta1, theta2, pi1, pi2, sigma_u2, sigma_v2, sigma_uv.
struct ReducedFormFit {
    ModelKind kind = ModelKind::tobit;
    double theta1 = 0.0;
    Eigen::VectorXd theta2;
    Eigen::VectorXd pi1;
    Eigen::VectorXd pi2;
    double sigma_u2 = 1.0;
    double sigma_v2 = 1.0;
    double sigma_uv = 0.0;
    Eigen::MatrixXd vcov;  // empty when unavailable

    // Diagnostics.
    std::string estimator;
    double loglik = 0.0;
    int iterations = 0;

    Eigen::Index dw() const { return theta2.size(); }
    Eigen::Index dz() const { return pi1.size(); }
    Eigen::Index size() const { return 4 + 2 * dw() + dz(); }
    Eigen::Index index_theta1() const { return 0; }
    Eigen::Index index_theta2() const { return 1; }
    Eigen::Index index_pi1() const { return 1 + dw(); }
    Eigen::Index index_pi2() const { return 1 + dw() + dz(); }
    Eigen::Index index_sigma_u2() const { return 1 + 2 * dw() + dz(); }
    Eigen::Index index_sigma_v2() const { return index_sigma_u2() + 1; }
    Eigen::Index index_sigma_uv() const { return index_sigma_u2() + 2; }

    bool has_vcov() const { return vcov.rows() == size() && vcov.cols() == size(); }
    double rho_uv() const;
    // (theta1, theta2')'
    Eigen::VectorXd theta() const;
    Eigen::VectorXd packed() const;
    // Copy with parameters replaced by `p` (same layout); vcov is kept.
    ReducedFormFit with_packed(const Eigen::VectorXd& p) const;
    double standard_error(Eigen::Index i) const;
};

// Variances of the unobservables free of measurement error.
struct StructuralParams {
    double sigma_ustar2 = 0.0;
    double sigma_vstar2 = 0.0;
    double sigma_ustar_vstar = 0.0;
    double sigma_eps2 = 0.0;

    // Largest violation of the non-negativity and Cauchy-Schwarz constraints
    // (0 when all hold).
    double violation() const;
    bool valid(double tol = 1e-10) const { return violation() <= tol; }
};

enum class EffectKind { pe_tobit_mean, pe_probability, ape_tobit_mean, ape_probability };

std::string_view to_string(EffectKind kind);
EffectKind parse_effect_kind(std::string_view text);
bool is_average(EffectKind kind);
bool is_probability(EffectKind kind);

struct EffectQuery {
    EffectKind kind = EffectKind::pe_tobit_mean;
    // 0 = X*, 1.. = columns of W.
    Eigen::Index covariate_index = 0;
    // (x, w')' evaluation point; PE kinds only.
    Eigen::VectorXd h;
};

}  // namespace ivbounds
