#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ivbounds/bounds.hpp"
#include "ivbounds/effects.hpp"
#include "ivbounds/inference.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds {

// Mixture variants of the structural errors: V* (with U* | component j
// normal with the common variance sigma_ustar^2) and the measurement error.
struct VstarComponent {
    double weight = 1.0;
    double mean = 0.0;
    double sd = 1.0;
    double cov_ustar = 0.0;  // Cov(U*, V*) within the component
};

struct EpsComponent {
    double weight = 1.0;
    double mean = 0.0;
    double sd = 1.0;
};

struct MixtureSpec {
    std::vector<VstarComponent> vstar;
    std::vector<EpsComponent> eps;
};

// Single instrument Z ~ N(0, 1) and W = 1.
struct DgpConfig {
    double theta1 = 2.0;
    double theta2 = 1.0;
    double sigma_vstar = 1.0;
    double sigma_ustar = 1.0;
    double sigma_eps = 1.0;
    double pi1 = 1.0;
    double pi2 = 0.0;
    double rho_star = 0.0;
    Eigen::Index n = 1000;
    ModelKind kind = ModelKind::tobit;
    std::optional<MixtureSpec> mixture;

    // Throws std::invalid_argument on non-positive scales or |rho_star| >= 1.
    void check() const;
    // Population mean of (X*, W).
    Eigen::VectorXd mean_covariates() const;
};

Dataset sample(const DgpConfig& cfg, std::uint64_t seed);

// Reduced form implied by a Gaussian design (no covariance); for probit
// designs the scale is normalized so sigma_u2 = 1.
ReducedFormFit population_reduced_form(const DgpConfig& cfg);
// Per-component reduced-form variances of a mixture design, in j-major order.
std::vector<ComponentVariances> population_components(const DgpConfig& cfg);

// Effect at the structural truth. PE kinds use query.h; APE kinds integrate
// over the population distribution of (Z, V*).
double true_effect(const DgpConfig& cfg, const EffectQuery& query);

struct EffectRecord {
    double lb = 0.0, ub = 0.0, naive = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double naive_ci_lo = 0.0, naive_ci_hi = 0.0;
};

struct ReplicationRecord {
    double rho = 0.0;
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double theta1 = 0.0, sigma_u2 = 0.0, sigma_v2 = 0.0, sigma_uv = 0.0;
    double sigma_lb = 0.0, sigma_ub = 0.0, sigma_ci_lo = 0.0, sigma_ci_hi = 0.0;
    EffectRecord pe_mean, pe_prob, ape_mean;
};

struct EffectAggregate {
    double truth = 0.0, true_lb = 0.0, true_ub = 0.0;
    double median_lb = 0.0, median_ub = 0.0, median_naive = 0.0;
    double median_ci_lo = 0.0, median_ci_hi = 0.0;
    double median_naive_ci_lo = 0.0, median_naive_ci_hi = 0.0;
    double median_width = 0.0;
    double coverage = 0.0, naive_coverage = 0.0;
};

struct AggregateRow {
    double rho = 0.0;
    int reps = 0;
    int failures = 0;
    double true_sigma_ustar2 = 0.0, true_sigma_lb = 0.0, true_sigma_ub = 0.0;
    double median_sigma_lb = 0.0, median_sigma_ub = 0.0, median_sigma_width = 0.0;
    double sigma_coverage = 0.0;
    EffectAggregate pe_mean, pe_prob, ape_mean;
};

struct McConfig {
    DgpConfig design;
    std::vector<double> rho_grid{-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
    int reps = 500;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool with_ape = false;
    BonferroniConfig ci{};
};

struct McResult {
    std::vector<ReplicationRecord> records;  // rho-major, then rep
    std::vector<AggregateRow> aggregates;
};

// Two-step fit, identified set, PE bounds at the population covariate mean,
// Bonferroni and naive CIs for every (rho, rep). A failing replication is
// recorded, not fatal. Results do not depend on the thread count.
McResult run_mc(const McConfig& cfg);

void write_replications_csv(std::ostream& out, const McResult& r, bool with_ape);
void write_aggregate_csv(std::ostream& out, const McResult& r, bool with_ape);
// Long format (rho, series, value) for one effect: "pe-mean", "pe-prob" or "ape-mean".
void write_plot_csv(std::ostream& out, const McResult& r, const std::string& effect);

}  // namespace ivbounds
