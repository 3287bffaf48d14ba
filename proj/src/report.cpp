#include "ivbounds/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ivbounds/bounds.hpp"
#include "ivbounds/csv.hpp"
#include "ivbounds/effects.hpp"
#include "ivbounds/estimate.hpp"
#include "ivbounds/format.hpp"
#include "ivbounds/mixture.hpp"

namespace ivbounds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd evaluation_point(const Dataset& d, const EvaluationPoint& at) {
    Eigen::VectorXd h(1 + d.dw());
    switch (at.mode) {
        case EvaluationPoint::Mode::means:
            h(0) = d.x.mean();
            h.tail(d.dw()) = d.w.colwise().mean().transpose();
            break;
        case EvaluationPoint::Mode::row:
            if (at.row < 0 || at.row >= d.n()) {
                throw std::invalid_argument("--at row:" + std::to_string(at.row) + " is outside the " +
                                            std::to_string(d.n()) + " complete-case rows");
            }
            h(0) = d.x(at.row);
            h.tail(d.dw()) = d.w.row(at.row).transpose();
            break;
        case EvaluationPoint::Mode::values:
            if (at.values.size() != h.size()) {
                throw std::invalid_argument("--at values needs " + std::to_string(h.size()) +
                                            " numbers (x then each w column)");
            }
            h = at.values;
            break;
    }
    return h;
}

// Covariates with a partial effect worth reporting: X* and every
// non-constant W column.
std::vector<Eigen::Index> effect_covariates(const Dataset& d) {
    std::vector<Eigen::Index> out{0};
    for (Eigen::Index j = 0; j < d.dw(); ++j) {
        if (d.w.col(j).maxCoeff() > d.w.col(j).minCoeff()) out.push_back(1 + j);
    }
    return out;
}

std::vector<std::string> covariate_names(const AnalysisOptions& o, Eigen::Index dw) {
    std::vector<std::string> names{o.x_name};
    for (Eigen::Index j = 0; j < dw; ++j) {
        names.push_back(j < static_cast<Eigen::Index>(o.w_names.size()) ? o.w_names[j]
                                                                        : "w" + std::to_string(j + 1));
    }
    return names;
}

std::string z_name(const AnalysisOptions& o, Eigen::Index j) {
    return j < static_cast<Eigen::Index>(o.z_names.size()) ? o.z_names[j] : "z" + std::to_string(j + 1);
}

void add_reduced_form_rows(RunReport& r, const ReducedFormFit& fit, const AnalysisOptions& o) {
    const auto cov = covariate_names(o, fit.dw());
    auto se = [&](Eigen::Index i) -> std::optional<double> {
        if (!fit.has_vcov()) return std::nullopt;
        return fit.standard_error(i);
    };
    r.parameters.push_back({"theta1[" + cov[0] + "]", fit.theta1, se(fit.index_theta1())});
    for (Eigen::Index j = 0; j < fit.dw(); ++j) {
        r.parameters.push_back({"theta2[" + cov[1 + j] + "]", fit.theta2(j), se(fit.index_theta2() + j)});
    }
    for (Eigen::Index j = 0; j < fit.dz(); ++j) {
        r.parameters.push_back({"pi1[" + z_name(o, j) + "]", fit.pi1(j), se(fit.index_pi1() + j)});
    }
    for (Eigen::Index j = 0; j < fit.dw(); ++j) {
        r.parameters.push_back({"pi2[" + cov[1 + j] + "]", fit.pi2(j), se(fit.index_pi2() + j)});
    }
    r.parameters.push_back({"sigma_u2", fit.sigma_u2,
                            fit.kind == ModelKind::probit ? std::nullopt : se(fit.index_sigma_u2())});
    r.parameters.push_back({"sigma_v2", fit.sigma_v2, se(fit.index_sigma_v2())});
    r.parameters.push_back({"sigma_uv", fit.sigma_uv, se(fit.index_sigma_uv())});
}

std::vector<EffectKind> requested_effects(const AnalysisOptions& o) {
    if (!o.effects.empty()) return o.effects;
    return {o.kind == ModelKind::tobit ? EffectKind::pe_tobit_mean : EffectKind::pe_probability};
}

void check_effect_kinds(const std::vector<EffectKind>& kinds, ModelKind model) {
    for (EffectKind k : kinds) {
        if (model == ModelKind::probit && (k == EffectKind::pe_tobit_mean || k == EffectKind::ape_tobit_mean)) {
            throw std::invalid_argument("effect '" + std::string(to_string(k)) +
                                        "' needs a tobit model; probit supports pe-prob and ape-prob");
        }
    }
}

void analyze_gaussian(RunReport& r, const Dataset& d, const AnalysisOptions& o) {
    FitOptions fo;
    fo.seed = o.seed;
    const ReducedFormFit fit = o.joint_mle ? fit_joint_mle(d, o.kind, fo) : fit_two_step(d, o.kind, fo);
    r.estimator = fit.estimator;
    r.loglik = fit.loglik;
    r.iterations = fit.iterations;
    r.rho_uv = fit.rho_uv();
    r.epsilon_upper = epsilon_upper(fit.theta1, fit.sigma_u2, fit.sigma_v2, fit.sigma_uv);
    add_reduced_form_rows(r, fit, o);
    if (o.kind == ModelKind::probit) r.notes.push_back("sigma_u2 is fixed at 1 by the probit normalization");

    const SigmaUstarSet set = sigma_ustar_interval(fit);
    r.sigma_lb = set.interval.lo;
    r.sigma_ub = set.interval.hi;
    r.xi1 = set.xi1;
    r.xi2 = set.xi2;
    const SigmaUstarCi sci = ci_sigma_ustar2_detail(fit, o.ci);
    r.sigma_ci = sci.ci;
    if (sci.clamped) r.notes.push_back("lower end of the sigma_ustar2 CI was raised to 0");

    const Eigen::VectorXd h = evaluation_point(d, o.at);
    const auto names = covariate_names(o, d.dw());
    for (EffectKind kind : requested_effects(o)) {
        for (Eigen::Index j : effect_covariates(d)) {
            EffectQuery q{kind, j, h};
            const EffectBounds eb = effect_bounds(q, fit, &d, set.interval);
            EffectRow row;
            row.kind = std::string(to_string(kind));
            row.covariate = names[j];
            row.naive = eb.naive;
            row.lb = eb.lower;
            row.ub = eb.upper;
            row.argmin_sigma2 = eb.argmin_sigma2;
            row.argmax_sigma2 = eb.argmax_sigma2;
            row.ci = ci_effect(q, fit, &d, o.ci, sci.ci);
            row.naive_ci = naive_ci(q, fit, &d, o.ci);
            r.effects.push_back(row);
        }
    }
}

void analyze_mixture(RunReport& r, const Dataset& d, const AnalysisOptions& o) {
    if (o.kind != ModelKind::tobit) throw std::invalid_argument("--mixture-k requires --kind tobit");
    const auto kinds = requested_effects(o);
    for (EffectKind k : kinds) {
        if (is_average(k)) throw std::invalid_argument("average partial effects are not available with --mixture-k");
    }
    MixtureOptions mo;
    mo.starts = o.mixture_starts;
    mo.seed = o.seed;
    mo.threads = o.threads;
    const MixtureFit mf = fit_mixture(d, o.mixture_k, mo);
    const MixtureParams& p = mf.params;
    r.estimator = "mixture-mle";
    r.loglik = mf.loglik;
    r.iterations = mf.iterations;

    const auto names = covariate_names(o, d.dw());
    const Eigen::Index dw = d.dw(), dz = d.dz();
    auto se = [&](Eigen::Index i) -> std::optional<double> {
        if (mf.natural_vcov.rows() <= i) return std::nullopt;
        const double v = mf.natural_vcov(i, i);
        if (!(v >= 0.0)) return std::nullopt;
        return std::sqrt(v);
    };
    r.parameters.push_back({"theta1[" + names[0] + "]", p.theta1, se(0)});
    for (Eigen::Index j = 0; j < dw; ++j) r.parameters.push_back({"theta2[" + names[1 + j] + "]", p.theta2(j), se(1 + j)});
    for (Eigen::Index j = 0; j < dz; ++j) r.parameters.push_back({"pi1[" + z_name(o, j) + "]", p.pi1(j), se(1 + dw + j)});
    for (Eigen::Index j = 0; j < dw; ++j) {
        r.parameters.push_back({"pi2[" + names[1 + j] + "]", p.pi2(j), se(1 + dw + dz + j)});
    }
    const Eigen::Index base = 1 + 2 * dw + dz;
    MixtureSummary ms;
    ms.k = p.k();
    ms.loglik = mf.loglik;
    ms.bic = mf.bic;
    ms.start_index = mf.start_index;
    ms.failed_starts = mf.failed_starts;
    const char* labels[] = {"weight", "mu_u", "mu_v", "sigma_u2", "sigma_uv", "sigma_v2"};
    for (int c = 0; c < p.k(); ++c) {
        const Eigen::Matrix2d& s = p.covs[c];
        MixtureComponentRow row{p.weights[c], p.means[c](0), p.means[c](1), s(0, 0), s(0, 1), s(1, 1)};
        ms.components.push_back(row);
        const double values[] = {row.weight, row.mu_u, row.mu_v, row.sigma_u2, row.sigma_uv, row.sigma_v2};
        for (int f = 0; f < 6; ++f) {
            r.parameters.push_back({std::string(labels[f]) + "[" + std::to_string(c + 1) + "]", values[f],
                                    se(base + 6 * c + f)});
        }
    }
    r.mixture = ms;

    double su2 = 0.0, sv2 = 0.0, suv = 0.0;
    for (int c = 0; c < p.k(); ++c) {
        const double w = p.weights[c];
        su2 += w * (p.covs[c](0, 0) + p.means[c](0) * p.means[c](0));
        sv2 += w * (p.covs[c](1, 1) + p.means[c](1) * p.means[c](1));
        suv += w * (p.covs[c](0, 1) + p.means[c](0) * p.means[c](1));
    }
    r.rho_uv = suv / std::sqrt(su2 * sv2);
    r.epsilon_upper = kNaN;
    r.xi1 = r.xi2 = kNaN;

    const Interval set = mixture_sigma_ustar_interval(p);
    r.sigma_lb = set.lo;
    r.sigma_ub = set.hi;
    r.notes.push_back("mixture fit: no confidence intervals; naive effects use the marginal variance of U");

    ReducedFormFit shell;
    shell.kind = ModelKind::tobit;
    shell.theta1 = p.theta1;
    shell.theta2 = p.theta2;
    shell.pi1 = p.pi1;
    shell.pi2 = p.pi2;
    shell.sigma_u2 = su2;
    shell.sigma_v2 = sv2;
    shell.sigma_uv = suv;
    const Eigen::VectorXd h = evaluation_point(d, o.at);
    for (EffectKind kind : kinds) {
        for (Eigen::Index j : effect_covariates(d)) {
            const EffectBounds eb = pe_bounds(EffectQuery{kind, j, h}, shell, set);
            EffectRow row;
            row.kind = std::string(to_string(kind));
            row.covariate = names[j];
            row.naive = eb.naive;
            row.lb = eb.lower;
            row.ub = eb.upper;
            row.argmin_sigma2 = eb.argmin_sigma2;
            row.argmax_sigma2 = eb.argmax_sigma2;
            r.effects.push_back(row);
        }
    }
}

nlohmann::ordered_json number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

nlohmann::ordered_json interval_json(const std::optional<Interval>& i) {
    if (!i) return nullptr;
    return nlohmann::ordered_json::array({number(i->lo), number(i->hi)});
}

std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf) == "-0" ? "0" : buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string bracket(double lo, double hi) { return "[" + cell(lo) + ", " + cell(hi) + "]"; }

std::string bracket(const std::optional<Interval>& i) { return i ? bracket(i->lo, i->hi) : "-"; }

}  // namespace

bool RunReport::nested() const {
    if (sigma_ci && !(sigma_ci->lo <= sigma_lb && sigma_ub <= sigma_ci->hi)) return false;
    for (const auto& e : effects) {
        if (e.ci && !(e.ci->lo <= e.lb && e.ub <= e.ci->hi)) return false;
    }
    return true;
}

RunReport analyze(const Dataset& raw, const AnalysisOptions& options) {
    options.ci.check();
    if (options.mixture_k < 0) throw std::invalid_argument("--mixture-k must be non-negative");
    const auto kinds = requested_effects(options);
    check_effect_kinds(kinds, options.kind);

    const ValidatedDataset v = validate(raw, options.kind);
    RunReport r;
    r.model = std::string(to_string(options.kind));
    r.n = v.data.n();
    r.dropped_rows = v.dropped_rows;
    r.alpha = options.ci.alpha;
    r.alpha1 = options.ci.alpha1;
    if (v.dropped_rows > 0) {
        r.notes.push_back(std::to_string(v.dropped_rows) + " rows with missing or non-finite values dropped");
    }
    if (options.mixture_k > 0) {
        analyze_mixture(r, v.data, options);
    } else {
        analyze_gaussian(r, v.data, options);
    }
    return r;
}

nlohmann::ordered_json report_json(const RunReport& r) {
    using json = nlohmann::ordered_json;
    json j;
    j["format_version"] = 1;
    j["model"] = r.model;
    j["estimator"] = r.estimator;
    j["n"] = r.n;
    j["dropped_rows"] = r.dropped_rows;
    j["alpha"] = r.alpha;
    j["alpha1"] = r.alpha1;
    json params = json::array();
    for (const auto& p : r.parameters) {
        params.push_back({{"name", p.name}, {"estimate", number(p.estimate)},
                          {"se", p.se ? number(*p.se) : json(nullptr)}});
    }
    j["parameters"] = params;
    j["sigma_ustar2"] = {{"lb", number(r.sigma_lb)}, {"ub", number(r.sigma_ub)},
                         {"xi1", number(r.xi1)},     {"xi2", number(r.xi2)},
                         {"ci", interval_json(r.sigma_ci)}};
    json effects = json::array();
    for (const auto& e : r.effects) {
        effects.push_back({{"kind", e.kind},
                           {"covariate", e.covariate},
                           {"naive", number(e.naive)},
                           {"naive_ci", interval_json(e.naive_ci)},
                           {"lb", number(e.lb)},
                           {"ub", number(e.ub)},
                           {"ci", interval_json(e.ci)},
                           {"argmin_sigma_ustar2", number(e.argmin_sigma2)},
                           {"argmax_sigma_ustar2", number(e.argmax_sigma2)}});
    }
    j["effects"] = effects;
    j["diagnostics"] = {{"rho_uv", number(r.rho_uv)},
                        {"sigma_eps2_upper", number(r.epsilon_upper)},
                        {"loglik", number(r.loglik)},
                        {"iterations", r.iterations},
                        {"nested", r.nested()},
                        {"notes", r.notes}};
    if (r.mixture) {
        json comps = json::array();
        for (const auto& c : r.mixture->components) {
            comps.push_back({{"weight", number(c.weight)},
                             {"mu_u", number(c.mu_u)},
                             {"mu_v", number(c.mu_v)},
                             {"sigma_u2", number(c.sigma_u2)},
                             {"sigma_uv", number(c.sigma_uv)},
                             {"sigma_v2", number(c.sigma_v2)}});
        }
        j["mixture"] = {{"k", r.mixture->k},
                        {"loglik", number(r.mixture->loglik)},
                        {"bic", number(r.mixture->bic)},
                        {"start_index", r.mixture->start_index},
                        {"failed_starts", r.mixture->failed_starts},
                        {"components", comps}};
    } else {
        j["mixture"] = nullptr;
    }
    return j;
}

void write_report_text(std::ostream& out, const RunReport& r) {
    out << "model: " << r.model << " (" << r.estimator << "), n = " << r.n << ", dropped rows = " << r.dropped_rows
        << "\n\n";
    out << pad("parameter", 22) << pad("estimate", 16) << "se\n";
    for (const auto& p : r.parameters) {
        out << pad(p.name, 22) << pad(cell(p.estimate), 16) << (p.se ? cell(*p.se) : "—") << '\n';
    }
    out << "\nsigma_ustar2 identified set: " << bracket(r.sigma_lb, r.sigma_ub);
    if (r.sigma_ci) {
        out << "   " << cell(100.0 * (1.0 - r.alpha1)) << "% CI: " << bracket(r.sigma_ci);
    }
    out << "\n\n";
    if (!r.effects.empty()) {
        out << pad("effect", 10) << pad("covariate", 14) << pad("naive", 14) << pad("naive CI", 26)
            << pad("[LB, UB]", 26) << "CI\n";
        for (const auto& e : r.effects) {
            out << pad(e.kind, 10) << pad(e.covariate, 14) << pad(cell(e.naive), 14) << pad(bracket(e.naive_ci), 26)
                << pad(bracket(e.lb, e.ub), 26) << bracket(e.ci) << '\n';
        }
        out << '\n';
    }
    if (r.mixture) {
        out << "mixture: K = " << r.mixture->k << ", loglik = " << cell(r.mixture->loglik)
            << ", BIC = " << cell(r.mixture->bic) << ", best start = " << r.mixture->start_index
            << ", failed starts = " << r.mixture->failed_starts << "\n\n";
    }
    out << "rho_uv = " << cell(r.rho_uv) << ", sigma_eps2 upper = " << cell(r.epsilon_upper)
        << ", loglik = " << cell(r.loglik) << ", iterations = " << r.iterations << '\n';
    for (const auto& n : r.notes) out << "note: " << n << '\n';
}

void write_report_csv(std::ostream& out, const RunReport& r) {
    write_csv_row(out, {"section", "name", "covariate", "stat", "value"});
    auto row = [&](const std::string& section, const std::string& name, const std::string& cov,
                   const std::string& stat, double v) {
        write_csv_row(out, {section, name, cov, stat, format_double(v)});
    };
    row("meta", "format_version", "", "value", 1);
    row("meta", "n", "", "value", static_cast<double>(r.n));
    row("meta", "dropped_rows", "", "value", static_cast<double>(r.dropped_rows));
    row("meta", "alpha", "", "value", r.alpha);
    row("meta", "alpha1", "", "value", r.alpha1);
    for (const auto& p : r.parameters) {
        row("parameter", p.name, "", "estimate", p.estimate);
        row("parameter", p.name, "", "se", p.se ? *p.se : kNaN);
    }
    row("sigma_ustar2", "sigma_ustar2", "", "lb", r.sigma_lb);
    row("sigma_ustar2", "sigma_ustar2", "", "ub", r.sigma_ub);
    row("sigma_ustar2", "sigma_ustar2", "", "xi1", r.xi1);
    row("sigma_ustar2", "sigma_ustar2", "", "xi2", r.xi2);
    row("sigma_ustar2", "sigma_ustar2", "", "ci_lo", r.sigma_ci ? r.sigma_ci->lo : kNaN);
    row("sigma_ustar2", "sigma_ustar2", "", "ci_hi", r.sigma_ci ? r.sigma_ci->hi : kNaN);
    for (const auto& e : r.effects) {
        row("effect", e.kind, e.covariate, "naive", e.naive);
        row("effect", e.kind, e.covariate, "naive_ci_lo", e.naive_ci ? e.naive_ci->lo : kNaN);
        row("effect", e.kind, e.covariate, "naive_ci_hi", e.naive_ci ? e.naive_ci->hi : kNaN);
        row("effect", e.kind, e.covariate, "lb", e.lb);
        row("effect", e.kind, e.covariate, "ub", e.ub);
        row("effect", e.kind, e.covariate, "ci_lo", e.ci ? e.ci->lo : kNaN);
        row("effect", e.kind, e.covariate, "ci_hi", e.ci ? e.ci->hi : kNaN);
    }
    row("diagnostics", "rho_uv", "", "value", r.rho_uv);
    row("diagnostics", "sigma_eps2_upper", "", "value", r.epsilon_upper);
    row("diagnostics", "loglik", "", "value", r.loglik);
    row("diagnostics", "iterations", "", "value", r.iterations);
    if (r.mixture) {
        row("mixture", "k", "", "value", r.mixture->k);
        row("mixture", "bic", "", "value", r.mixture->bic);
    }
}

}  // namespace ivbounds
