#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ivbounds/inference.hpp"
#include "ivbounds/model.hpp"

namespace ivbounds {

// Where PEs are evaluated: sample means, one row of the complete-case data,
// or explicit (x, w') values.
struct EvaluationPoint {
    enum class Mode { means, row, values } mode = Mode::means;
    Eigen::Index row = 0;
    Eigen::VectorXd values;
};

struct AnalysisOptions {
    ModelKind kind = ModelKind::tobit;
    std::string y_name = "y", x_name = "x";
    std::vector<std::string> w_names, z_names;
    std::vector<EffectKind> effects;  // empty = pe-mean for tobit, pe-prob for probit
    EvaluationPoint at;
    BonferroniConfig ci;
    bool joint_mle = true;
    int mixture_k = 0;  // 0 = Gaussian model
    int mixture_starts = 8;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ParameterRow {
    std::string name;
    double estimate = 0.0;
    std::optional<double> se;
};

struct EffectRow {
    std::string kind;
    std::string covariate;
    double naive = 0.0;
    std::optional<Interval> naive_ci;
    double lb = 0.0, ub = 0.0;
    std::optional<Interval> ci;
    double argmin_sigma2 = 0.0, argmax_sigma2 = 0.0;
};

struct MixtureComponentRow {
    double weight = 0.0, mu_u = 0.0, mu_v = 0.0;
    double sigma_u2 = 0.0, sigma_uv = 0.0, sigma_v2 = 0.0;
};

struct MixtureSummary {
    int k = 1;
    double loglik = 0.0, bic = 0.0;
    int start_index = 0, failed_starts = 0;
    std::vector<MixtureComponentRow> components;
};

struct RunReport {
    std::string model, estimator;
    Eigen::Index n = 0;
    std::size_t dropped_rows = 0;
    double alpha = 0.05, alpha1 = 0.005;
    std::vector<ParameterRow> parameters;
    double sigma_lb = 0.0, sigma_ub = 0.0, xi1 = 0.0, xi2 = 0.0;
    std::optional<Interval> sigma_ci;
    std::vector<EffectRow> effects;
    double rho_uv = 0.0, epsilon_upper = 0.0, loglik = 0.0;
    int iterations = 0;
    std::vector<std::string> notes;
    std::optional<MixtureSummary> mixture;

    // Every reported CI contains its point-estimate bounds.
    bool nested() const;
};

// Validates `raw`, fits the model and assembles bounds, CIs and effects.
RunReport analyze(const Dataset& raw, const AnalysisOptions& options);

nlohmann::ordered_json report_json(const RunReport& r);
void write_report_text(std::ostream& out, const RunReport& r);
// One tidy row per reported quantity.
void write_report_csv(std::ostream& out, const RunReport& r);

}  // namespace ivbounds
