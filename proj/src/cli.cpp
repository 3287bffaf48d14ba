#include "ivbounds/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "ivbounds/error.hpp"
#include "ivbounds/format.hpp"
#include "ivbounds/report.hpp"
#include "ivbounds/rng.hpp"
#include "ivbounds/simulate.hpp"

namespace ivbounds::cli {

namespace {

struct FitArgs {
    std::string data;
    std::string kind = "tobit";
    std::string y = "y", x = "x";
    std::vector<std::string> w{"1"};
    std::vector<std::string> z;
    std::vector<std::string> effects;
    std::string at = "means";
    double alpha = 0.05;
    double alpha1 = -1.0;
    std::string estimator = "mle";
    int mixture_k = 0;
    int mixture_starts = 8;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out_path;
    std::string out_format;
    int format_version = 1;
};

struct SimulateArgs {
    std::string design = "default";
    std::string kind = "tobit";
    DgpConfig dgp;
    std::vector<double> rho_grid{-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};
    int reps = 500;
    std::uint64_t seed = 0;
    std::string outdir = ".";
    unsigned threads = 1;
    bool ape = false;
    double alpha = 0.05;
    double alpha1 = -1.0;
    std::string export_data;
};

BonferroniConfig bonferroni(double alpha, double alpha1) {
    BonferroniConfig c = BonferroniConfig::with_alpha(alpha);
    if (alpha1 >= 0.0) c.alpha1 = alpha1;
    c.check();
    return c;
}

double parse_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw std::invalid_argument(what + ": '" + s + "' is not a number");
    return v;
}

EvaluationPoint parse_at(const std::string& text) {
    EvaluationPoint at;
    if (text == "means") return at;
    if (text.rfind("row:", 0) == 0) {
        at.mode = EvaluationPoint::Mode::row;
        const double r = parse_number(text.substr(4), "--at row");
        if (r < 0 || r != static_cast<double>(static_cast<Eigen::Index>(r))) {
            throw std::invalid_argument("--at row:N needs a non-negative integer");
        }
        at.row = static_cast<Eigen::Index>(r);
        return at;
    }
    if (text.rfind("values:", 0) == 0) {
        at.mode = EvaluationPoint::Mode::values;
        std::vector<double> v;
        std::stringstream ss(text.substr(7));
        for (std::string tok; std::getline(ss, tok, ',');) v.push_back(parse_number(tok, "--at values"));
        at.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        return at;
    }
    throw std::invalid_argument("--at must be 'means', 'row:N' or 'values:x,w1,...'");
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(DataErrorCode::bad_column, "cannot write '" + path + "'");
    f << content;
    if (!f) throw DataError(DataErrorCode::bad_column, "failed writing '" + path + "'");
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
    if (a.format_version != 1) throw std::invalid_argument("--format-version: only version 1 is supported");
    AnalysisOptions o;
    o.kind = parse_model_kind(a.kind);
    o.y_name = a.y;
    o.x_name = a.x;
    for (const auto& w : a.w) {
        if (w != "none") o.w_names.push_back(w == "1" ? "const" : w);
    }
    o.z_names = a.z;
    for (const auto& e : a.effects) o.effects.push_back(parse_effect_kind(e));
    o.at = parse_at(a.at);
    o.ci = bonferroni(a.alpha, a.alpha1);
    if (a.estimator == "mle") {
        o.joint_mle = true;
    } else if (a.estimator == "two-step") {
        o.joint_mle = false;
    } else {
        throw std::invalid_argument("--estimator must be 'mle' or 'two-step'");
    }
    o.mixture_k = a.mixture_k;
    o.mixture_starts = a.mixture_starts;
    o.seed = a.seed;
    o.threads = a.threads;

    std::vector<std::string> w_cols;
    for (const auto& w : a.w) {
        if (w != "none") w_cols.push_back(w);
    }
    const Dataset raw = dataset_from_table(read_csv_file(a.data), a.y, a.x, w_cols, a.z);
    const RunReport report = analyze(raw, o);
    write_report_text(out, report);

    if (!a.out_path.empty()) {
        std::string fmt = a.out_format;
        if (fmt.empty()) {
            fmt = std::filesystem::path(a.out_path).extension() == ".csv" ? "csv" : "json";
        }
        std::ostringstream buf;
        if (fmt == "json") {
            buf << report_json(report).dump(2) << '\n';
        } else if (fmt == "csv") {
            write_report_csv(buf, report);
        } else {
            throw std::invalid_argument("--out-format must be 'json' or 'csv'");
        }
        write_file(a.out_path, buf.str());
    }
    return ok;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    if (a.design != "default" && a.design != "custom") {
        throw std::invalid_argument("--design must be 'default' or 'custom'");
    }
    if (a.rho_grid.empty()) throw std::invalid_argument("--rho-grid is empty");
    McConfig mc;
    mc.design = a.dgp;
    mc.design.kind = parse_model_kind(a.kind);
    mc.design.rho_star = a.rho_grid.front();
    mc.design.check();
    mc.rho_grid = a.rho_grid;
    mc.reps = a.reps;
    mc.seed = a.seed;
    mc.threads = a.threads;
    mc.with_ape = a.ape;
    mc.ci = bonferroni(a.alpha, a.alpha1);
    if (mc.with_ape && mc.design.kind != ModelKind::tobit) {
        throw std::invalid_argument("--ape requires --kind tobit");
    }

    if (!a.export_data.empty()) {
        // The dataset of the first replication at the first grid point.
        const Dataset d = sample(mc.design, derive_seed(mc.seed, {0, 0}));
        std::ostringstream buf;
        std::vector<std::string> header{"y", "x"};
        for (Eigen::Index j = 0; j < d.dz(); ++j) header.push_back(d.dz() == 1 ? "z" : "z" + std::to_string(j + 1));
        write_csv_row(buf, header);
        for (Eigen::Index i = 0; i < d.n(); ++i) {
            std::vector<std::string> row{format_double(d.y(i)), format_double(d.x(i))};
            for (Eigen::Index j = 0; j < d.dz(); ++j) row.push_back(format_double(d.z(i, j)));
            write_csv_row(buf, row);
        }
        write_file(a.export_data, buf.str());
    }

    const McResult r = run_mc(mc);
    std::filesystem::create_directories(a.outdir);
    const std::filesystem::path dir(a.outdir);
    auto emit = [&](const std::string& name, auto&& writer) {
        std::ostringstream buf;
        writer(buf);
        write_file((dir / name).string(), buf.str());
    };
    emit("replications.csv", [&](std::ostream& s) { write_replications_csv(s, r, mc.with_ape); });
    emit("aggregate.csv", [&](std::ostream& s) { write_aggregate_csv(s, r, mc.with_ape); });
    if (mc.design.kind == ModelKind::tobit) {
        emit("plot_pe_mean.csv", [&](std::ostream& s) { write_plot_csv(s, r, "pe-mean"); });
    }
    emit("plot_pe_prob.csv", [&](std::ostream& s) { write_plot_csv(s, r, "pe-prob"); });
    if (mc.with_ape) emit("plot_ape_mean.csv", [&](std::ostream& s) { write_plot_csv(s, r, "ape-mean"); });

    const bool tobit = mc.design.kind == ModelKind::tobit;
    out << (tobit ? "pe-mean" : "pe-prob") << " of x at the population mean, " << mc.reps << " reps\n";
    out << "rho      true        median naive  median [LB, UB]              coverage  failures\n";
    for (const auto& row : r.aggregates) {
        const EffectAggregate& e = tobit ? row.pe_mean : row.pe_prob;
        char bounds[64], line[160];
        std::snprintf(bounds, sizeof bounds, "[%.5g, %.5g]", e.median_lb, e.median_ub);
        std::snprintf(line, sizeof line, "%-8.3g %-11.5g %-13.5g %-28s %-9.3f %d\n", row.rho, e.truth,
                      e.median_naive, bounds, e.coverage, row.failures);
        out << line;
    }
    return ok;
}

}  // namespace

Dataset dataset_from_table(const CsvTable& table, const std::string& y, const std::string& x,
                           const std::vector<std::string>& w, const std::vector<std::string>& z) {
    if (z.empty()) throw DataError(DataErrorCode::bad_column, "no instrument columns given (--z)");
    Dataset d;
    d.y = table.numeric(y);
    d.x = table.numeric(x);
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    d.w.resize(n, static_cast<Eigen::Index>(w.size()));
    for (std::size_t j = 0; j < w.size(); ++j) {
        d.w.col(static_cast<Eigen::Index>(j)) = w[j] == "1" ? Eigen::VectorXd::Ones(n) : table.numeric(w[j]);
    }
    d.z.resize(n, static_cast<Eigen::Index>(z.size()));
    for (std::size_t j = 0; j < z.size(); ++j) d.z.col(static_cast<Eigen::Index>(j)) = table.numeric(z[j]);
    return d;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bounds and confidence intervals for IV-Tobit / IV-Probit effects under measurement error",
                 "ivbounds"};
    app.require_subcommand(1);

    FitArgs f;
    CLI::App* fit = app.add_subcommand("fit", "Fit a model to a CSV file and report bounds");
    fit->add_option("--data", f.data, "Input CSV (header row required)")->required();
    fit->add_option("--kind", f.kind, "tobit or probit")->capture_default_str();
    fit->add_option("--y", f.y, "Outcome column")->capture_default_str();
    fit->add_option("--x", f.x, "Mismeasured endogenous regressor column")->capture_default_str();
    fit->add_option("--w", f.w, "Exogenous columns; '1' adds an intercept, 'none' for no W")
        ->delimiter(',')
        ->capture_default_str();
    fit->add_option("--z", f.z, "Instrument columns")->delimiter(',')->required();
    fit->add_option("--effects", f.effects, "pe-mean, pe-prob, ape-mean, ape-prob")->delimiter(',');
    fit->add_option("--at", f.at, "PE evaluation point: means, row:N or values:x,w1,...")->capture_default_str();
    fit->add_option("--alpha", f.alpha, "Overall CI level is 1 - alpha")->capture_default_str();
    fit->add_option("--alpha1", f.alpha1, "First-step level (default alpha / 10)");
    fit->add_option("--estimator", f.estimator, "mle or two-step")->capture_default_str();
    fit->add_option("--mixture-k", f.mixture_k, "Number of mixture components (0 = Gaussian)")
        ->capture_default_str();
    fit->add_option("--mixture-starts", f.mixture_starts, "Optimizer starts for the mixture fit")
        ->capture_default_str();
    fit->add_option("--seed", f.seed, "Seed for randomized internals")->capture_default_str();
    fit->add_option("--threads", f.threads, "Worker threads for mixture starts")->capture_default_str();
    fit->add_option("--out", f.out_path, "Write the machine-readable report here");
    fit->add_option("--out-format", f.out_format, "json or csv (default from the --out extension)");
    fit->add_option("--format-version", f.format_version, "Report format version")->capture_default_str();

    SimulateArgs s;
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study of the bounds and CIs");
    sim->add_option("--design", s.design, "default, or custom with the overrides below")->capture_default_str();
    sim->add_option("--kind", s.kind, "tobit or probit")->capture_default_str();
    sim->add_option("--theta1", s.dgp.theta1)->capture_default_str();
    sim->add_option("--theta2", s.dgp.theta2)->capture_default_str();
    sim->add_option("--sigma-vstar", s.dgp.sigma_vstar)->capture_default_str();
    sim->add_option("--sigma-ustar", s.dgp.sigma_ustar)->capture_default_str();
    sim->add_option("--sigma-eps", s.dgp.sigma_eps)->capture_default_str();
    sim->add_option("--pi1", s.dgp.pi1)->capture_default_str();
    sim->add_option("--pi2", s.dgp.pi2)->capture_default_str();
    sim->add_option("--n", s.dgp.n, "Sample size per replication")->capture_default_str();
    sim->add_option("--rho-grid", s.rho_grid, "Comma-separated correlations of U* and V*")->delimiter(',');
    sim->add_option("--reps", s.reps, "Replications per grid point")->capture_default_str();
    sim->add_option("--seed", s.seed)->capture_default_str();
    sim->add_option("--outdir", s.outdir)->capture_default_str();
    sim->add_option("--threads", s.threads)->capture_default_str();
    sim->add_flag("--ape", s.ape, "Also bound the APE of x on the conditional mean");
    sim->add_option("--alpha", s.alpha)->capture_default_str();
    sim->add_option("--alpha1", s.alpha1, "First-step level (default alpha / 10)");
    sim->add_option("--export-data", s.export_data, "Write the first replication's dataset as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? ok : input_error;
    }

    try {
        if (fit->parsed()) return cmd_fit(f, out);
        return cmd_simulate(s, out);
    } catch (const DataError& e) {
        err << "input error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return input_error;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << '\n';
        return input_error;
    } catch (const EmptyIntersectionError& e) {
        err << "error: " << e.what() << '\n';
        return empty_intersection;
    } catch (const ConvergenceError& e) {
        err << "convergence error: " << e.what() << '\n';
        return convergence_error;
    } catch (const EstimationError& e) {
        err << "estimation error: " << e.what() << '\n';
        return convergence_error;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << " (at " << format_double(e.where()) << ")\n";
        return convergence_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace ivbounds::cli
