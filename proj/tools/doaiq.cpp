// doaiq: space-filling designs on the simplex crossed with unconstrained
// factors, plus additive-GP surrogate fitting over the collected responses.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "doaiq/doaiq.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParameter = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

doaiq::CandidateSet load_candidates(const std::string& path) {
    doaiq::CandidateSet set;
    set.points = doaiq::read_points_csv(path);
    if (set.points.empty()) throw doaiq::IoError("candidate file '" + path + "' has no rows");
    set.dimension = set.points.front().dim();
    return set;
}

void cmd_candidates(std::size_t dim, std::size_t max_subset, const std::string& fractions,
                    std::size_t max_pairs, std::uint64_t seed, const std::string& out) {
    doaiq::CandidateConfig cfg;
    cfg.max_subset_size = max_subset;
    if (!fractions.empty())
        cfg.segment_fractions = doaiq::pipeline_detail::parse_double_list(fractions);
    if (max_pairs == 0) cfg.max_pairs.reset();
    else cfg.max_pairs = max_pairs;
    const doaiq::CandidateSet set = doaiq::generate_candidate_set(dim, cfg, seed);
    doaiq::write_points_csv(out, set.points);
    std::cout << set.size() << " candidate points -> " << out << "\n";
}

void cmd_design(const std::string& cand_file, std::size_t runs, std::size_t t, double eps,
                double delta2, std::uint64_t seed, const std::string& out,
                const std::string& trace_file) {
    const doaiq::CandidateSet pool = load_candidates(cand_file);
    doaiq::OptimizerConfig cfg;
    cfg.max_redundant_iters = t;
    cfg.convergence_tol = eps;
    cfg.delta2 = delta2;
    cfg.seed = seed;
    std::vector<doaiq::TraceEntry> trace;
    const doaiq::ConstrainedDesign design =
        doaiq::optimize_design(pool, runs, cfg, trace_file.empty() ? nullptr : &trace);
    doaiq::write_points_csv(out, design.rows);
    if (!trace_file.empty()) doaiq::write_trace_csv(trace_file, trace);
    std::cout << "criterion " << doaiq::format_double(design.criterion_value) << " -> " << out
              << "\n";
}

void cmd_metrics(const std::string& design_file) {
    const auto rows = doaiq::read_points_csv(design_file);
    std::cout << "pm1,pm2\n"
              << doaiq::format_double(doaiq::pm1_coverage(rows)) << ','
              << doaiq::format_double(doaiq::pm2_maximin(rows)) << "\n";
}

void cmd_ks(const std::string& cand_file, std::size_t runs, const std::string& out) {
    const doaiq::CandidateSet pool = load_candidates(cand_file);
    const doaiq::ConstrainedDesign design = doaiq::kennard_stone_select(pool, runs);
    doaiq::write_points_csv(out, design.rows);
    std::cout << runs << " rows selected -> " << out << "\n";
}

void cmd_assemble(const std::string& x_file, const std::string& zspec_file, std::size_t zruns,
                  const std::string& levels_csv, std::size_t replicates, std::uint64_t seed,
                  const std::string& out) {
    const auto x_rows = doaiq::read_points_csv(x_file);
    auto specs = doaiq::parse_factor_specs(zspec_file);
    for (const auto& s : specs)
        if (s.kind != doaiq::FactorSpec::Kind::Continuous)
            throw doaiq::ParameterError("assemble: factor '" + s.name +
                                        "' must be continuous (levels come from --levels)");
    const auto levels = doaiq::pipeline_detail::parse_string_list(levels_csv);
    if (levels.size() < 1) throw doaiq::ParameterError("assemble: --levels must be nonempty");
    const auto z = doaiq::latin_hypercube(specs, zruns, seed);
    const doaiq::FullDesign full = doaiq::cross_array(x_rows, z, levels, replicates);
    std::vector<std::string> z_names;
    for (const auto& s : specs) z_names.push_back(s.name);
    doaiq::write_csv(out, doaiq::full_design_table(full, z_names));
    std::cout << full.runs.size() << " runs -> " << out << "\n";
}

void cmd_fit(const std::string& data_file, const std::string& out, const std::string& response,
             int restarts, int max_iters, double grad_tol, std::uint64_t seed,
             const std::string& log_cols) {
    const doaiq::CsvTable data = doaiq::read_csv(data_file);
    doaiq::AgpFitOptions opts;
    opts.restarts = restarts;
    opts.max_iters = max_iters;
    opts.grad_tol = grad_tol;
    opts.seed = seed;
    const doaiq::AgpModel model = doaiq::agp_fit_table(
        data, response, opts, doaiq::pipeline_detail::parse_string_list(log_cols));
    doaiq::save_agp_model(out, model);
    std::cout << "fitted " << response << ": nll " << doaiq::format_double(model.report.final_nll)
              << ", tau2 " << doaiq::format_double(model.params.tau2) << " -> " << out << "\n";
}

void cmd_fit_linear(const std::string& data_file, const std::string& out,
                    const std::string& response, const std::string& log_cols) {
    const doaiq::CsvTable data = doaiq::read_csv(data_file);
    const doaiq::LinearModel model = doaiq::ols_fit_table(
        data, response, doaiq::pipeline_detail::parse_string_list(log_cols));
    doaiq::save_linear_model(out, model);
    std::cout << "fitted " << response << " (" << model.coefficients.size()
              << " coefficients) -> " << out << "\n";
}

std::string detect_model_kind(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw doaiq::IoError("cannot open model file '" + path + "'");
    std::string magic;
    in >> magic;
    return magic;
}

void cmd_predict(const std::string& model_file, const std::string& points_file,
                 const std::string& out) {
    const doaiq::CsvTable points = doaiq::read_csv(points_file);
    const bool has_id = points.has_column("run_id");
    doaiq::CsvTable result;
    const std::string kind = detect_model_kind(model_file);
    if (kind == "doaiq-agp-model") {
        const doaiq::AgpModel model = doaiq::load_agp_model(model_file);
        if (model.encoder.cont_cols.empty())
            throw doaiq::ParameterError("model was fitted without an encoder; cannot map CSV rows");
        const std::size_t cc = points.column(model.encoder.cat_col);
        result.header = has_id ? std::vector<std::string>{"run_id", "mean", "variance"}
                               : std::vector<std::string>{"mean", "variance"};
        for (std::size_t i = 0; i < points.rows.size(); ++i) {
            const auto raw = doaiq::raw_continuous_row(points, i, model.encoder);
            const auto pd = doaiq::agp_predict(
                model, doaiq::encode_input(model.encoder, raw, points.rows[i][cc]));
            std::vector<std::string> row;
            if (has_id) row.push_back(points.rows[i][points.column("run_id")]);
            row.push_back(doaiq::format_double(pd.mean));
            row.push_back(doaiq::format_double(pd.variance));
            result.rows.push_back(std::move(row));
        }
    } else if (kind == "doaiq-linear-model") {
        const doaiq::LinearModel model = doaiq::load_linear_model(model_file);
        const std::size_t cc = points.column(model.encoder.cat_col);
        result.header = has_id ? std::vector<std::string>{"run_id", "mean"}
                               : std::vector<std::string>{"mean"};
        for (std::size_t i = 0; i < points.rows.size(); ++i) {
            const auto raw = doaiq::raw_continuous_row(points, i, model.encoder);
            const double mean =
                model.predict_encoded(model.encoder.encode_continuous(raw),
                                      model.encoder.encode_level(points.rows[i][cc]));
            std::vector<std::string> row;
            if (has_id) row.push_back(points.rows[i][points.column("run_id")]);
            row.push_back(doaiq::format_double(mean));
            result.rows.push_back(std::move(row));
        }
    } else {
        throw doaiq::IoError("'" + model_file + "' is not a doaiq model file");
    }
    doaiq::write_csv(out, result);
    std::cout << result.rows.size() << " predictions -> " << out << "\n";
}

void cmd_pipeline(const std::string& config_file) {
    const doaiq::PipelineConfig cfg = doaiq::parse_pipeline_config(config_file);
    const doaiq::EvaluationReport report = doaiq::run_pipeline(cfg);
    for (const auto& rr : report.responses)
        std::cout << rr.response << ": agp mse " << doaiq::format_double(rr.agp_mse)
                  << ", linear mse " << doaiq::format_double(rr.linear_mse) << "\n";
    std::cout << "artifacts in " << cfg.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-filling mixture designs and additive-GP surrogates"};
    app.require_subcommand(1);

    // candidates
    std::size_t dim = 10, max_subset = 0, max_pairs = 50000, runs = 50, zruns = 20,
                replicates = 5, t = 10000;
    double eps = 1e-8, delta2 = 1e-6, grad_tol = 1e-5;
    std::uint64_t seed = 0;
    int restarts = 5, max_iters = 150;
    std::string out, trace_file, cand_file, design_file, x_file, zspec_file, data_file,
        model_file, points_file, config_file;
    std::string fractions = "0.25,0.5,0.75", levels_csv, response = "y1", log_cols = "z1";

    auto* c = app.add_subcommand("candidates", "generate the simplex candidate pool");
    c->add_option("--dim", dim, "mixture dimension m")->required();
    c->add_option("--max-subset", max_subset, "largest centroid subset size (0 = m)");
    c->add_option("--fractions", fractions, "segment fractions, comma separated");
    c->add_option("--max-pairs", max_pairs, "cap on interpolated pairs (0 = unlimited)");
    c->add_option("--seed", seed, "pair subsampling seed");
    c->add_option("--out", out, "output CSV")->required();

    auto* d = app.add_subcommand("design", "optimize a constrained MaxPro design");
    d->add_option("--candidates", cand_file, "candidate pool CSV")->required();
    d->add_option("--runs", runs, "design size N")->required();
    d->add_option("--t", t, "failed-exchange budget");
    d->add_option("--eps", eps, "relative convergence tolerance");
    d->add_option("--delta2", delta2, "criterion regularizer");
    d->add_option("--seed", seed, "optimizer seed");
    d->add_option("--out", out, "design CSV")->required();
    d->add_option("--trace", trace_file, "optimizer trace CSV");

    auto* me = app.add_subcommand("metrics", "print pm1,pm2 for a design");
    me->add_option("--design", design_file, "design CSV")->required();

    auto* k = app.add_subcommand("ks", "Kennard-Stone benchmark selection");
    k->add_option("--candidates", cand_file, "candidate pool CSV")->required();
    k->add_option("--runs", runs, "selection size N")->required();
    k->add_option("--out", out, "design CSV")->required();

    auto* a = app.add_subcommand("assemble", "cross array of design components");
    a->add_option("--x", x_file, "constrained design CSV")->required();
    a->add_option("--zspec", zspec_file, "continuous factor spec file")->required();
    a->add_option("--zruns", zruns, "Latin hypercube size")->required();
    a->add_option("--levels", levels_csv, "categorical levels, comma separated")->required();
    a->add_option("--replicates", replicates, "replicates per setting");
    a->add_option("--seed", seed, "Latin hypercube seed");
    a->add_option("--out", out, "full design CSV")->required();

    auto* f = app.add_subcommand("fit", "fit the additive GP surrogate");
    f->add_option("--data", data_file, "dataset CSV (design columns + y1,y2)")->required();
    f->add_option("--out", out, "model file")->required();
    f->add_option("--response", response, "response column (default y1)");
    f->add_option("--restarts", restarts, "number of fit restarts");
    f->add_option("--max-iters", max_iters, "BFGS iteration cap");
    f->add_option("--grad-tol", grad_tol, "gradient tolerance");
    f->add_option("--seed", seed, "restart seed");
    f->add_option("--log-cols", log_cols, "columns log-transformed before normalization");

    auto* fl = app.add_subcommand("fit-linear", "fit the linear regression benchmark");
    fl->add_option("--data", data_file, "dataset CSV")->required();
    fl->add_option("--out", out, "model file")->required();
    fl->add_option("--response", response, "response column (default y1)");
    fl->add_option("--log-cols", log_cols, "columns log-transformed before normalization");

    auto* p = app.add_subcommand("predict", "predict at new design points");
    p->add_option("--model", model_file, "model file from fit / fit-linear")->required();
    p->add_option("--points", points_file, "points CSV (full design schema)")->required();
    p->add_option("--out", out, "predictions CSV")->required();

    auto* pl = app.add_subcommand("pipeline", "run the end-to-end evaluation");
    pl->add_option("--config", config_file, "flat key-value config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParameter;
    }

    try {
        if (c->parsed()) cmd_candidates(dim, max_subset, fractions, max_pairs, seed, out);
        else if (d->parsed()) cmd_design(cand_file, runs, t, eps, delta2, seed, out, trace_file);
        else if (me->parsed()) cmd_metrics(design_file);
        else if (k->parsed()) cmd_ks(cand_file, runs, out);
        else if (a->parsed())
            cmd_assemble(x_file, zspec_file, zruns, levels_csv, replicates, seed, out);
        else if (f->parsed())
            cmd_fit(data_file, out, response, restarts, max_iters, grad_tol, seed, log_cols);
        else if (fl->parsed()) cmd_fit_linear(data_file, out, response, log_cols);
        else if (p->parsed()) cmd_predict(model_file, points_file, out);
        else if (pl->parsed()) cmd_pipeline(config_file);
    } catch (const doaiq::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitParameter;
    } catch (const doaiq::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const doaiq::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
