#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nnmoe/analysis.hpp"
#include "nnmoe/io.hpp"
#include "nnmoe/moe.hpp"
#include "nnmoe/simulation.hpp"

namespace {

using namespace nnmoe;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitDegenerate = 4;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("NNMOE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw io::ParseError(std::string("NNMOE_SEED is not an integer: ") + env);
        }
    }
    return 0;
}

struct FitArgs {
    std::string input;
    std::string output = "fit";
    std::string family = "nmoe";
    int K = 2;
    int p = 1;
    int q = 1;
    FitOptions opts;
};

io::ModelFile model_from_fit(const FitResult& result, const MoESpec& spec,
                             const Dataset& data) {
    io::ModelFile model;
    model.spec = spec;
    model.params = result.params;
    model.loglik = result.loglik();
    const analysis::SelectionRow row = analysis::criteria(result, spec, data);
    model.eta = row.eta;
    model.bic = row.bic;
    model.aic = row.aic;
    model.icl = row.icl;
    model.converged = result.converged;
    model.n_iters = result.n_iters;
    model.seed = result.seed;
    return model;
}

std::string manifest_comment(const std::string& command, const FitArgs& a) {
    std::ostringstream out;
    out << "# command = " << command << "\n";
    out << "# input = " << a.input << "\n";
    out << "# starts = " << a.opts.n_starts << "\n";
    out << "# tol = " << io::format_double(a.opts.tol) << "\n";
    out << "# max_iters = " << a.opts.max_iters << "\n";
    out << "# seed = " << a.opts.seed << "\n";
    out << "# kent_sigma_divisor = " << (a.opts.kent_sigma_divisor ? 1 : 0) << "\n";
    out << "# strict_delta_iterate = " << (a.opts.strict_delta_iterate ? 1 : 0) << "\n";
    return out.str();
}

int run_fit(const FitArgs& args) {
    MoESpec spec;
    spec.family = family_from_name(args.family);
    spec.K = args.K;
    spec.p = args.p;
    spec.q = args.q;
    spec.validate();
    const io::XY xy = io::read_xy_csv(args.input);
    const Dataset data = Dataset::build(xy.x, xy.y, spec.p, spec.q);
    if (data.n() < spec.K * (spec.p + 2)) {
        throw std::invalid_argument("need at least K*(p+2) observations");
    }
    const FitResult result = fit(spec, data, args.opts);

    const io::ModelFile model = model_from_fit(result, spec, data);
    io::write_text_file(args.output + ".model",
                        manifest_comment("fit", args) + io::write_model(model));

    std::ostringstream tau_csv;
    tau_csv << "i";
    for (int k = 1; k <= spec.K; ++k) tau_csv << ",tau_" << k;
    tau_csv << ",label\n";
    const std::vector<int> labels = analysis::map_cluster(result.tau);
    for (int i = 0; i < data.n(); ++i) {
        tau_csv << (i + 1);
        for (int k = 0; k < spec.K; ++k) {
            tau_csv << "," << io::format_double(result.tau(i, k));
        }
        tau_csv << "," << labels[i] << "\n";
    }
    io::write_text_file(args.output + "_tau.csv", tau_csv.str());

    std::ostringstream trace_csv;
    trace_csv << "iter,loglik\n";
    for (std::size_t m = 0; m < result.loglik_trace.size(); ++m) {
        trace_csv << m << "," << io::format_double(result.loglik_trace[m]) << "\n";
    }
    io::write_text_file(args.output + "_trace.csv", trace_csv.str());

    std::cout << "loglik = " << io::format_double(model.loglik)
              << ", bic = " << io::format_double(model.bic)
              << ", converged = " << (model.converged ? "yes" : "no") << "\n";
    return result.converged ? kExitOk : kExitNoConvergence;
}

Eigen::VectorXd load_predictors(const std::string& input, const std::string& grid) {
    if (!grid.empty()) {
        double lo = 0.0;
        double hi = 0.0;
        int count = 0;
        char c1 = 0;
        char c2 = 0;
        std::istringstream iss(grid);
        if (!(iss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' ||
            count < 2 || !(lo < hi)) {
            throw std::invalid_argument("--grid must be lo:hi:count with count >= 2");
        }
        Eigen::VectorXd x(count);
        for (int i = 0; i < count; ++i) {
            x(i) = lo + (hi - lo) * i / (count - 1);
        }
        return x;
    }
    return io::read_xy_csv(input).x;
}

int run_predict(const std::string& model_path, const std::string& input,
                const std::string& grid, const std::string& output) {
    const io::ModelFile model = io::parse_model(io::read_text_file(model_path));
    const Eigen::VectorXd x = load_predictors(input, grid);
    const auto points = analysis::predict(model.params, model.spec, x);
    std::ostringstream csv;
    csv << "x,mean,var,lo,hi";
    for (int k = 1; k <= model.spec.K; ++k) csv << ",pi_" << k;
    for (int k = 1; k <= model.spec.K; ++k) csv << ",mu_" << k;
    csv << "\n";
    for (const auto& pt : points) {
        csv << io::format_double(pt.x) << "," << io::format_double(pt.mean);
        if (pt.variance) {
            const double sd = std::sqrt(*pt.variance);
            csv << "," << io::format_double(*pt.variance) << ","
                << io::format_double(pt.mean - 2.0 * sd) << ","
                << io::format_double(pt.mean + 2.0 * sd);
        } else {
            csv << ",,,";
        }
        for (int k = 0; k < model.spec.K; ++k) {
            csv << "," << io::format_double(pt.gate_probs(k));
        }
        for (int k = 0; k < model.spec.K; ++k) {
            csv << "," << io::format_double(pt.per_component_means(k));
        }
        csv << "\n";
    }
    io::write_text_file(output, csv.str());
    return kExitOk;
}

int run_cluster(const std::string& model_path, const std::string& input,
                const std::string& output) {
    const io::ModelFile model = io::parse_model(io::read_text_file(model_path));
    const io::XY xy = io::read_xy_csv(input);
    const Dataset data = Dataset::build(xy.x, xy.y, model.spec.p, model.spec.q);
    const EStepCache cache = e_step(model.params, model.spec.family, data);
    const std::vector<int> labels = analysis::map_cluster(cache.tau);
    std::ostringstream csv;
    csv << "i,x,y,label\n";
    for (int i = 0; i < data.n(); ++i) {
        csv << (i + 1) << "," << io::format_double(data.x(i)) << ","
            << io::format_double(data.y(i)) << "," << labels[i] << "\n";
    }
    io::write_text_file(output, csv.str());
    return kExitOk;
}

int run_select(const std::string& input, const std::string& family_name_arg,
               int Kmin, int Kmax, int p, int q, const FitOptions& opts,
               const std::string& output) {
    if (Kmin < 1 || Kmax < Kmin) {
        throw std::invalid_argument("need 1 <= Kmin <= Kmax");
    }
    const Family family = family_from_name(family_name_arg);
    const io::XY xy = io::read_xy_csv(input);
    const Dataset data = Dataset::build(xy.x, xy.y, p, q);
    std::vector<int> K_range;
    for (int K = Kmin; K <= Kmax; ++K) K_range.push_back(K);
    const analysis::SelectionTable table =
        analysis::select_K(family, data, K_range, p, q, opts);
    if (table.rows.empty()) {
        throw DegenerateFitError("no candidate K produced a usable fit");
    }
    std::ostringstream csv;
    csv << "K,loglik,eta,bic,aic,icl\n";
    for (const auto& row : table.rows) {
        csv << row.K << "," << io::format_double(row.loglik) << "," << row.eta << ","
            << io::format_double(row.bic) << "," << io::format_double(row.aic) << ","
            << io::format_double(row.icl) << "\n";
    }
    csv << "# best_bic = " << table.best_bic << "\n";
    csv << "# best_aic = " << table.best_aic << "\n";
    csv << "# best_icl = " << table.best_icl << "\n";
    for (const std::string& err : table.errors) {
        csv << "# skipped " << err << "\n";
    }
    io::write_text_file(output, csv.str());
    std::cout << "best K: bic = " << table.best_bic << ", aic = " << table.best_aic
              << ", icl = " << table.best_icl << "\n";
    return kExitOk;
}

int run_simulate(const std::string& family_name_arg, int n, double c,
                 double outlier_y, std::uint64_t seed, const std::string& output) {
    simulation::ScenarioConfig config =
        simulation::benchmark_scenario(family_from_name(family_name_arg), n, seed);
    config.outlier_rate = c;
    config.outlier_y = outlier_y;
    const simulation::GeneratedData gen = simulation::generate(config);

    std::ostringstream data_csv;
    data_csv << "x,y\n";
    for (int i = 0; i < gen.data.n(); ++i) {
        data_csv << io::format_double(gen.data.x(i)) << ","
                 << io::format_double(gen.data.y(i)) << "\n";
    }
    io::write_text_file(output + ".csv", data_csv.str());

    std::ostringstream label_csv;
    label_csv << "i,label\n";
    for (int i = 0; i < gen.data.n(); ++i) {
        label_csv << (i + 1) << "," << gen.labels[i] << "\n";
    }
    io::write_text_file(output + "_labels.csv", label_csv.str());

    std::ostringstream manifest;
    manifest << "command = simulate\n";
    manifest << "family = " << family_name(config.family) << "\n";
    manifest << "n = " << config.n << "\n";
    manifest << "outlier_rate = " << io::format_double(config.outlier_rate) << "\n";
    manifest << "outlier_y = " << io::format_double(config.outlier_y) << "\n";
    manifest << "seed = " << config.seed << "\n";
    manifest << "x_law = uniform " << io::format_double(config.x_lo) << " "
             << io::format_double(config.x_hi) << "\n";
    io::write_text_file(output + "_manifest.txt", manifest.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixtures of experts with normal, skew-normal, t, and skew-t "
                 "components: fitting, prediction, clustering, model selection, "
                 "and simulation"};
    app.require_subcommand(1);

    FitArgs fit_args;
    std::string model_path;
    std::string input;
    std::string grid;
    std::string output = "out.csv";
    int Kmin = 1;
    int Kmax = 4;
    int sim_n = 500;
    double sim_c = 0.0;
    double sim_outlier_y = -2.0;

    auto add_fit_options = [](CLI::App* cmd, FitOptions& opts) {
        cmd->add_option("--starts", opts.n_starts, "number of EM restarts")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--tol", opts.tol, "relative log-likelihood tolerance");
        cmd->add_option("--max-iters", opts.max_iters, "maximum EM iterations")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", opts.seed, "random seed (overrides NNMOE_SEED)");
        cmd->add_flag("--kent-sigma-divisor", opts.kent_sigma_divisor,
                      "divide the t-family scale update by sum(tau*w)");
        cmd->add_flag("--strict-delta-iterate", opts.strict_delta_iterate,
                      "recompute sigma^2 with the freshly updated delta");
    };

    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a mixture of experts to x,y data");
    fit_cmd->add_option("--input", fit_args.input, "input CSV with header x,y")->required();
    fit_cmd->add_option("--output", fit_args.output, "output prefix");
    fit_cmd->add_option("--family", fit_args.family, "nmoe|snmoe|tmoe|stmoe");
    fit_cmd->add_option("--K", fit_args.K, "number of experts")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--p", fit_args.p, "expert polynomial order")
        ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--q", fit_args.q, "gate polynomial order")
        ->check(CLI::NonNegativeNumber);
    add_fit_options(fit_cmd, fit_args.opts);

    CLI::App* predict_cmd = app.add_subcommand("predict", "evaluate mean and band curves");
    predict_cmd->add_option("--model", model_path, "model file from fit")->required();
    predict_cmd->add_option("--input", input, "CSV with x column");
    predict_cmd->add_option("--grid", grid, "lo:hi:count evaluation grid");
    predict_cmd->add_option("--output", output, "output CSV");

    CLI::App* cluster_cmd = app.add_subcommand("cluster", "MAP-partition a dataset");
    cluster_cmd->add_option("--model", model_path, "model file from fit")->required();
    cluster_cmd->add_option("--input", input, "input CSV with header x,y")->required();
    cluster_cmd->add_option("--output", output, "output CSV");

    FitOptions select_opts;
    std::string select_family = "nmoe";
    int select_p = 1;
    int select_q = 1;
    CLI::App* select_cmd = app.add_subcommand("select", "scan K by BIC/AIC/ICL");
    select_cmd->add_option("--input", input, "input CSV with header x,y")->required();
    select_cmd->add_option("--family", select_family, "nmoe|snmoe|tmoe|stmoe");
    select_cmd->add_option("--Kmin", Kmin, "smallest candidate K");
    select_cmd->add_option("--Kmax", Kmax, "largest candidate K");
    select_cmd->add_option("--p", select_p, "expert polynomial order");
    select_cmd->add_option("--q", select_q, "gate polynomial order");
    select_cmd->add_option("--output", output, "output CSV");
    add_fit_options(select_cmd, select_opts);

    std::string sim_family = "nmoe";
    std::uint64_t sim_seed = 0;
    bool sim_seed_given = false;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "generate benchmark data");
    sim_cmd->add_option("--family", sim_family, "nmoe|snmoe|tmoe|stmoe");
    sim_cmd->add_option("--n", sim_n, "sample size")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--c", sim_c, "outlier rate in [0,1]");
    sim_cmd->add_option("--outlier-y", sim_outlier_y, "outlier response value");
    sim_cmd->add_option("--seed", sim_seed, "random seed (overrides NNMOE_SEED)")
        ->each([&sim_seed_given](const std::string&) { sim_seed_given = true; });
    sim_cmd->add_option("--output", output, "output prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (fit_cmd->parsed()) {
            if (fit_cmd->count("--seed") == 0) fit_args.opts.seed = default_seed();
            return run_fit(fit_args);
        }
        if (predict_cmd->parsed()) {
            if (input.empty() == grid.empty()) {
                throw std::invalid_argument("predict needs exactly one of --input / --grid");
            }
            return run_predict(model_path, input, grid, output);
        }
        if (cluster_cmd->parsed()) {
            return run_cluster(model_path, input, output);
        }
        if (select_cmd->parsed()) {
            if (select_cmd->count("--seed") == 0) select_opts.seed = default_seed();
            return run_select(input, select_family, Kmin, Kmax, select_p, select_q,
                              select_opts, output);
        }
        if (sim_cmd->parsed()) {
            if (!sim_seed_given) sim_seed = default_seed();
            return run_simulate(sim_family, sim_n, sim_c, sim_outlier_y, sim_seed,
                                output);
        }
    } catch (const nnmoe::io::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nnmoe::io::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const nnmoe::DegenerateFitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const nnmoe::EvaluationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitValidation;
}
