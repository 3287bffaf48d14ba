#include "ivbounds/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivbounds/error.hpp"

namespace ivbounds {

const char* to_string(DataErrorCode code) {
    switch (code) {
        case DataErrorCode::length_mismatch: return "length_mismatch";
        case DataErrorCode::too_few_rows: return "too_few_rows";
        case DataErrorCode::no_censored: return "no_censored";
        case DataErrorCode::no_uncensored: return "no_uncensored";
        case DataErrorCode::invalid_outcome: return "invalid_outcome";
        case DataErrorCode::rank_deficient: return "rank_deficient";
        case DataErrorCode::degenerate_first_stage: return "degenerate_first_stage";
        case DataErrorCode::bad_column: return "bad_column";
    }
    return "unknown";
}

std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::tobit ? "tobit" : "probit";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "tobit") return ModelKind::tobit;
    if (text == "probit") return ModelKind::probit;
    throw std::invalid_argument("unknown model kind '" + std::string(text) + "'");
}

Eigen::MatrixXd Dataset::first_stage_design() const {
    Eigen::MatrixXd q(n(), dz() + dw());
    q << z, w;
    return q;
}

ValidatedDataset validate(const Dataset& raw, ModelKind kind) {
    const Eigen::Index n = raw.y.size();
    if (raw.x.size() != n || raw.w.rows() != n || raw.z.rows() != n) {
        throw DataError(DataErrorCode::length_mismatch,
                        "y, x, w and z must have the same number of rows");
    }
    if (raw.z.cols() == 0) {
        throw DataError(DataErrorCode::bad_column, "at least one instrument column is required");
    }

    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool finite = std::isfinite(raw.y(i)) && std::isfinite(raw.x(i)) &&
                            raw.w.row(i).allFinite() && raw.z.row(i).allFinite();
        if (finite) keep.push_back(i);
    }

    ValidatedDataset out;
    out.dropped_rows = static_cast<std::size_t>(n) - keep.size();
    Dataset& d = out.data;
    const auto m = static_cast<Eigen::Index>(keep.size());
    d.y.resize(m);
    d.x.resize(m);
    d.w.resize(m, raw.w.cols());
    d.z.resize(m, raw.z.cols());
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index i = keep[static_cast<std::size_t>(r)];
        d.y(r) = raw.y(i);
        d.x(r) = raw.x(i);
        d.w.row(r) = raw.w.row(i);
        d.z.row(r) = raw.z.row(i);
    }

    if (m <= d.dw() + d.dz() + 2) {
        throw DataError(DataErrorCode::too_few_rows,
                        "need more than " + std::to_string(d.dw() + d.dz() + 2) +
                            " complete rows, got " + std::to_string(m));
    }

    Eigen::Index zeros = 0, positives = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = d.y(i);
        if (kind == ModelKind::tobit) {
            if (v < 0.0) {
                throw DataError(DataErrorCode::invalid_outcome,
                                "tobit outcome must be non-negative (row " + std::to_string(i) + ")");
            }
        } else if (v != 0.0 && v != 1.0) {
            throw DataError(DataErrorCode::invalid_outcome,
                            "probit outcome must be 0 or 1 (row " + std::to_string(i) + ")");
        }
        if (v == 0.0) ++zeros; else ++positives;
    }
    if (zeros == 0) {
        throw DataError(DataErrorCode::no_censored,
                        kind == ModelKind::tobit ? "no censored observations" : "no zero outcomes");
    }
    if (positives == 0) {
        throw DataError(DataErrorCode::no_uncensored,
                        kind == ModelKind::tobit ? "no uncensored observations" : "no unit outcomes");
    }

    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(d.first_stage_design()).singularValues();
    if (!(sv.minCoeff() > 1e-10 * sv.maxCoeff())) {
        throw DataError(DataErrorCode::rank_deficient,
                        "the stacked instrument and covariate matrix [z w] is rank deficient");
    }
    return out;
}

double ReducedFormFit::rho_uv() const {
    return sigma_uv / std::sqrt(sigma_u2 * sigma_v2);
}

Eigen::VectorXd ReducedFormFit::theta() const {
    Eigen::VectorXd t(1 + dw());
    t << theta1, theta2;
    return t;
}

Eigen::VectorXd ReducedFormFit::packed() const {
    Eigen::VectorXd p(size());
    p << theta1, theta2, pi1, pi2, sigma_u2, sigma_v2, sigma_uv;
    return p;
}

ReducedFormFit ReducedFormFit::with_packed(const Eigen::VectorXd& p) const {
    if (p.size() != size()) throw std::invalid_argument("with_packed: wrong parameter length");
    ReducedFormFit out = *this;
    out.theta1 = p(index_theta1());
    out.theta2 = p.segment(index_theta2(), dw());
    out.pi1 = p.segment(index_pi1(), dz());
    out.pi2 = p.segment(index_pi2(), dw());
    out.sigma_u2 = p(index_sigma_u2());
    out.sigma_v2 = p(index_sigma_v2());
    out.sigma_uv = p(index_sigma_uv());
    return out;
}

double ReducedFormFit::standard_error(Eigen::Index i) const {
    if (!has_vcov()) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(std::max(0.0, vcov(i, i)));
}

double StructuralParams::violation() const {
    double v = 0.0;
    v = std::max(v, -sigma_ustar2);
    v = std::max(v, -sigma_vstar2);
    v = std::max(v, -sigma_eps2);
    v = std::max(v, sigma_ustar_vstar * sigma_ustar_vstar - sigma_ustar2 * sigma_vstar2);
    return v;
}

std::string_view to_string(EffectKind kind) {
    switch (kind) {
        case EffectKind::pe_tobit_mean: return "pe-mean";
        case EffectKind::pe_probability: return "pe-prob";
        case EffectKind::ape_tobit_mean: return "ape-mean";
        case EffectKind::ape_probability: return "ape-prob";
    }
    return "unknown";
}

EffectKind parse_effect_kind(std::string_view text) {
    if (text == "pe-mean") return EffectKind::pe_tobit_mean;
    if (text == "pe-prob") return EffectKind::pe_probability;
    if (text == "ape-mean") return EffectKind::ape_tobit_mean;
    if (text == "ape-prob") return EffectKind::ape_probability;
    throw std::invalid_argument("unknown effect kind '" + std::string(text) +
                                "' (expected pe-mean, pe-prob, ape-mean or ape-prob)");
}

bool is_average(EffectKind kind) {
    return kind == EffectKind::ape_tobit_mean || kind == EffectKind::ape_probability;
}

bool is_probability(EffectKind kind) {
    return kind == EffectKind::pe_probability || kind == EffectKind::ape_probability;
}

}  // namespace ivbounds
