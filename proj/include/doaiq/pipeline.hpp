#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doaiq/agp.hpp"
#include "doaiq/candidates.hpp"
#include "doaiq/csv.hpp"
#include "doaiq/design_io.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/factors.hpp"
#include "doaiq/linreg.hpp"
#include "doaiq/maxpro.hpp"
#include "doaiq/oracle.hpp"

namespace doaiq {

// End-to-end configuration.  Defaults are the desk-scale setup: a 5-part
// mixture, 12 constrained rows, 8 unconstrained rows, two datasets, three
// replicates.
struct PipelineConfig {
    std::size_t m = 5;
    CandidateConfig candidates;
    std::size_t x_runs = 12;
    OptimizerConfig design_opt;
    std::vector<FactorSpec> z_factors;  // continuous, in column order
    std::size_t z_runs = 8;
    std::vector<std::string> levels = {"MNIST", "FashionMNIST"};
    std::size_t replicates = 3;
    SyntheticOracle oracle;
    double train_fraction = 0.8;
    AgpFitOptions fit;
    std::uint64_t seed = 1;
    std::string out_dir = "pipeline_out";

    static std::vector<FactorSpec> default_z_factors() {
        FactorSpec z1{"z1", FactorSpec::Kind::Continuous, 1.0 / 500.0, 500.0,
                      FactorSpec::Scale::Log, {}};
        FactorSpec z2{"z2", FactorSpec::Kind::Continuous, 1.0, 3.0,
                      FactorSpec::Scale::Linear, {}};
        FactorSpec z3{"z3", FactorSpec::Kind::Continuous, 0.1, 0.5,
                      FactorSpec::Scale::Linear, {}};
        return {z1, z2, z3};
    }

    PipelineConfig() {
        z_factors = default_z_factors();
        fit.max_iters = 120;
        fit.grad_tol = 1e-5;
    }
};

struct ResponseReport {
    std::string response;
    double agp_mse = 0.0;
    double linear_mse = 0.0;
    std::vector<double> agp_residuals;     // observed minus predicted, test rows
    std::vector<double> linear_residuals;
};

struct EvaluationReport {
    std::vector<ResponseReport> responses;
    double train_fraction = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

namespace pipeline_detail {

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, ',')) {
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw ParameterError("cannot parse number '" + token + "'");
        }
    }
    return out;
}

inline std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(s);
    while (std::getline(in, token, ',')) {
        const auto b = token.find_first_not_of(" \t");
        const auto e = token.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(token.substr(b, e - b + 1));
    }
    return out;
}

template <typename F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const ParameterError& e) {
        throw ParameterError(name + ": " + e.what());
    } catch (const DegenerateDesignError& e) {
        throw DegenerateDesignError(name + ": " + e.what());
    } catch (const ConditioningError& e) {
        throw ConditioningError(name + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(name + ": " + e.what());
    }
}

inline FactorSpec parse_factor_value(const std::string& name, const std::string& value) {
    FactorSpec spec;
    spec.name = name;
    std::istringstream in(value);
    std::string kind;
    in >> kind;
    if (kind == "continuous") {
        std::string scale;
        if (!(in >> spec.lower >> spec.upper))
            throw ParameterError("factor '" + name + "': expected bounds");
        if (in >> scale) {
            if (scale == "log") spec.scale = FactorSpec::Scale::Log;
            else if (scale != "linear")
                throw ParameterError("factor '" + name + "': unknown scale '" + scale + "'");
        }
    } else if (kind == "categorical") {
        spec.kind = FactorSpec::Kind::Categorical;
        std::string level;
        while (in >> level) spec.levels.push_back(level);
    } else {
        throw ParameterError("factor '" + name + "': unknown kind '" + kind + "'");
    }
    spec.validate();
    return spec;
}

}  // namespace pipeline_detail

// Flat key-value config: `key = value` lines, '#' comments.  Continuous factor
// lines (`z1 = continuous 0.002 500 log`) replace the default factor of the
// same name; `z4 = categorical A B` is shorthand for `levels`.
inline PipelineConfig parse_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    PipelineConfig cfg;
    std::vector<FactorSpec> custom_factors;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("config line " + std::to_string(lineno) + " missing '='");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "m") cfg.m = std::stoul(value);
            else if (key == "x_runs") cfg.x_runs = std::stoul(value);
            else if (key == "z_runs") cfg.z_runs = std::stoul(value);
            else if (key == "replicates") cfg.replicates = std::stoul(value);
            else if (key == "levels") cfg.levels = pipeline_detail::parse_string_list(value);
            else if (key == "oracle") cfg.oracle.oracle_id = value;
            else if (key == "noise_sd") cfg.oracle.noise_sd = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "train_fraction") cfg.train_fraction = std::stod(value);
            else if (key == "out_dir") cfg.out_dir = value;
            else if (key == "max_subset_size") cfg.candidates.max_subset_size = std::stoul(value);
            else if (key == "fractions")
                cfg.candidates.segment_fractions = pipeline_detail::parse_double_list(value);
            else if (key == "max_pairs") cfg.candidates.max_pairs = std::stoul(value);
            else if (key == "t") cfg.design_opt.max_redundant_iters = std::stoul(value);
            else if (key == "eps") cfg.design_opt.convergence_tol = std::stod(value);
            else if (key == "delta2") cfg.design_opt.delta2 = std::stod(value);
            else if (key == "restarts") cfg.fit.restarts = std::stoi(value);
            else if (key == "max_iters") cfg.fit.max_iters = std::stoi(value);
            else if (key == "grad_tol") cfg.fit.grad_tol = std::stod(value);
            else if (value.rfind("continuous", 0) == 0 || value.rfind("categorical", 0) == 0) {
                FactorSpec spec = pipeline_detail::parse_factor_value(key, value);
                if (spec.kind == FactorSpec::Kind::Categorical) cfg.levels = spec.levels;
                else custom_factors.push_back(std::move(spec));
            } else {
                throw ParameterError("unknown config key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ParameterError("config key '" + key + "': cannot parse value '" + value + "'");
        } catch (const std::out_of_range&) {
            throw ParameterError("config key '" + key + "': value '" + value + "' out of range");
        }
    }
    for (auto& spec : custom_factors) {
        bool replaced = false;
        for (auto& existing : cfg.z_factors)
            if (existing.name == spec.name) {
                existing = spec;
                replaced = true;
                break;
            }
        if (!replaced) cfg.z_factors.push_back(std::move(spec));
    }
    return cfg;
}

// Replicate-grouped train/test split over settings: all replicates of one
// setting land on the same side.
inline std::vector<int> split_settings(std::size_t n_settings, double train_fraction,
                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ParameterError("train_fraction must be in (0,1)");
    if (n_settings < 2) throw ParameterError("need at least 2 settings to split");
    std::vector<std::size_t> order(n_settings);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n_settings)));
    n_train = std::clamp<std::size_t>(n_train, 1, n_settings - 1);
    std::vector<int> is_train(n_settings, 0);
    for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = 1;
    return is_train;
}

namespace pipeline_detail {

inline CsvTable subset_rows(const CsvTable& t, const std::vector<std::size_t>& rows) {
    CsvTable out;
    out.header = t.header;
    out.rows.reserve(rows.size());
    for (std::size_t r : rows) out.rows.push_back(t.rows[r]);
    return out;
}

inline void write_histogram(const std::string& path, const std::vector<double>& values,
                            double lo, double hi, std::size_t bins) {
    CsvTable t;
    t.header = {"bin_lo", "bin_hi", "count"};
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double v : values) {
        auto b = static_cast<long long>(std::floor((v - lo) / width));
        b = std::clamp<long long>(b, 0, static_cast<long long>(bins) - 1);
        counts[static_cast<std::size_t>(b)]++;
    }
    for (std::size_t b = 0; b < bins; ++b)
        t.rows.push_back({format_double(lo + width * static_cast<double>(b)),
                          format_double(lo + width * static_cast<double>(b + 1)),
                          std::to_string(counts[b])});
    write_csv(path, t);
}

}  // namespace pipeline_detail

// Runs the whole desk-scale evaluation: candidate pool, constrained design,
// unconstrained design, cross array, synthetic responses, replicate-grouped
// split, AGP and linear fits per response, and test MSE comparison.  Every
// intermediate artifact is written under cfg.out_dir.
inline EvaluationReport run_pipeline(const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    using pipeline_detail::stage;

    if (cfg.out_dir.empty()) throw ParameterError("pipeline: out_dir must be set");
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("pipeline: cannot create out_dir '" + cfg.out_dir + "'");
    const auto path = [&](const std::string& name) {
        return (fs::path(cfg.out_dir) / name).string();
    };

    // 1. candidate pool
    const CandidateSet pool = stage("candidates", [&] {
        return generate_candidate_set(cfg.m, cfg.candidates, mix_seed(cfg.seed, 1));
    });
    write_points_csv(path("candidates.csv"), pool.points);

    // 2. constrained design
    std::vector<TraceEntry> trace;
    const ConstrainedDesign design = stage("design", [&] {
        OptimizerConfig opt = cfg.design_opt;
        opt.seed = mix_seed(cfg.seed, 2);
        return optimize_design(pool, cfg.x_runs, opt, &trace);
    });
    write_points_csv(path("design.csv"), design.rows);
    write_trace_csv(path("design_trace.csv"), trace);

    // 3. unconstrained design
    const auto z_rows = stage("latin-hypercube", [&] {
        return latin_hypercube(cfg.z_factors, cfg.z_runs, mix_seed(cfg.seed, 3));
    });
    {
        CsvTable zt;
        for (const auto& s : cfg.z_factors) zt.header.push_back(s.name);
        for (const auto& row : z_rows) {
            std::vector<std::string> cells;
            for (double v : row) cells.push_back(format_double(v));
            zt.rows.push_back(std::move(cells));
        }
        write_csv(path("zdesign.csv"), zt);
    }

    // 4. cross array
    const FullDesign full = stage("cross-array", [&] {
        return cross_array(design.rows, z_rows, cfg.levels, cfg.replicates);
    });
    std::vector<std::string> z_names;
    for (const auto& s : cfg.z_factors) z_names.push_back(s.name);
    write_csv(path("full_design.csv"), full_design_table(full, z_names));

    // 5. synthetic responses
    SyntheticOracle oracle = cfg.oracle;
    oracle.seed = mix_seed(cfg.seed, 4);
    std::vector<double> y1(full.runs.size()), y2(full.runs.size());
    stage("oracle", [&] {
        for (std::size_t i = 0; i < full.runs.size(); ++i) {
            const auto [a, b] = synthetic_response(full.runs[i], oracle, cfg.levels);
            y1[i] = a;
            y2[i] = b;
        }
        return 0;
    });
    const CsvTable dataset = full_design_table(full, z_names, {{"y1", y1}, {"y2", y2}});
    write_csv(path("dataset.csv"), dataset);

    // plot-ready analysis table: factors, the imbalance feature z5, responses
    {
        CsvTable at;
        at.header = {"run_id", "z4"};
        for (const auto& n : z_names) at.header.push_back(n);
        at.header.insert(at.header.end(), {"z5", "y1", "y2"});
        for (std::size_t i = 0; i < full.runs.size(); ++i) {
            const auto& run = full.runs[i];
            std::vector<std::string> row = {std::to_string(run.run_id), run.z_cat};
            for (double z : run.z_cont) row.push_back(format_double(z));
            row.push_back(format_double(variance_feature(run.x)));
            row.push_back(format_double(y1[i]));
            row.push_back(format_double(y2[i]));
            at.rows.push_back(std::move(row));
        }
        write_csv(path("analysis.csv"), at);
    }

    // 6. replicate-grouped split
    const std::vector<int> is_train = stage("split", [&] {
        return split_settings(full.n_settings(), cfg.train_fraction, mix_seed(cfg.seed, 5));
    });
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < full.runs.size(); ++i)
        (is_train[full.setting_of(i)] ? train_rows : test_rows).push_back(i);
    {
        CsvTable st;
        st.header = {"setting_id", "split"};
        for (std::size_t s = 0; s < is_train.size(); ++s)
            st.rows.push_back({std::to_string(s), is_train[s] ? "train" : "test"});
        write_csv(path("split.csv"), st);
    }
    const CsvTable train = pipeline_detail::subset_rows(dataset, train_rows);
    const CsvTable test = pipeline_detail::subset_rows(dataset, test_rows);

    // 7. per-response fits and test evaluation
    EvaluationReport report;
    report.train_fraction = cfg.train_fraction;
    report.seed = cfg.seed;
    report.n_train = train_rows.size();
    report.n_test = test_rows.size();

    const std::vector<std::string> responses = {"y1", "y2"};
    for (std::size_t r = 0; r < responses.size(); ++r) {
        const std::string& resp = responses[r];
        AgpFitOptions fit = cfg.fit;
        fit.seed = mix_seed(cfg.seed, 10 + r);
        const AgpModel agp = stage("agp-fit-" + resp, [&] {
            return agp_fit_table(train, resp, fit);
        });
        save_agp_model(path("agp_" + resp + ".model"), agp);
        const LinearModel lin = stage("linear-fit-" + resp, [&] {
            return ols_fit_table(train, resp);
        });
        save_linear_model(path("linear_" + resp + ".model"), lin);

        ResponseReport rr;
        rr.response = resp;
        const std::size_t yc = test.column(resp);
        const std::size_t cc = test.column(agp.encoder.cat_col);
        CsvTable pt;
        pt.header = {"run_id", resp, "agp_mean", "agp_variance", "linear_pred"};
        std::vector<double> agp_pred(test.rows.size()), lin_pred(test.rows.size()),
            truth(test.rows.size());
        stage("predict-" + resp, [&] {
            for (std::size_t i = 0; i < test.rows.size(); ++i) {
                const auto raw = raw_continuous_row(test, i, agp.encoder);
                const MixedInput w = encode_input(agp.encoder, raw, test.rows[i][cc]);
                const PredictiveDistribution pd = agp_predict(agp, w);
                agp_pred[i] = pd.mean;
                lin_pred[i] = lin.predict_encoded(lin.encoder.encode_continuous(raw),
                                                  lin.encoder.encode_level(test.rows[i][cc]));
                truth[i] = test.num(i, yc);
                pt.rows.push_back({test.rows[i][test.column("run_id")], format_double(truth[i]),
                                   format_double(pd.mean), format_double(pd.variance),
                                   format_double(lin_pred[i])});
            }
            return 0;
        });
        write_csv(path("predictions_" + resp + ".csv"), pt);

        rr.agp_mse = mse(agp_pred, truth);
        rr.linear_mse = mse(lin_pred, truth);
        rr.agp_residuals.resize(test.rows.size());
        rr.linear_residuals.resize(test.rows.size());
        double max_abs = 0.0;
        for (std::size_t i = 0; i < test.rows.size(); ++i) {
            rr.agp_residuals[i] = truth[i] - agp_pred[i];
            rr.linear_residuals[i] = truth[i] - lin_pred[i];
            max_abs = std::max({max_abs, std::abs(rr.agp_residuals[i]),
                                std::abs(rr.linear_residuals[i])});
        }
        if (max_abs == 0.0) max_abs = 1e-12;
        pipeline_detail::write_histogram(path("residual_hist_" + resp + "_agp.csv"),
                                         rr.agp_residuals, -max_abs, max_abs, 20);
        pipeline_detail::write_histogram(path("residual_hist_" + resp + "_linear.csv"),
                                         rr.linear_residuals, -max_abs, max_abs, 20);
        report.responses.push_back(std::move(rr));
    }

    // 8. report files
    {
        CsvTable rt;
        rt.header = {"response", "model", "mse", "n_test"};
        for (const auto& rr : report.responses) {
            rt.rows.push_back({rr.response, "agp", format_double(rr.agp_mse),
                               std::to_string(report.n_test)});
            rt.rows.push_back({rr.response, "linear", format_double(rr.linear_mse),
                               std::to_string(report.n_test)});
        }
        write_csv(path("report.csv"), rt);
    }
    {
        std::ofstream out(path("summary.txt"));
        out << "doaiq pipeline summary\n";
        out << "seed " << cfg.seed << "\n";
        out << "design: " << cfg.x_runs << " constrained rows (m=" << cfg.m << "), "
            << cfg.z_runs << " unconstrained rows, " << cfg.levels.size() << " levels, "
            << cfg.replicates << " replicates -> " << full.runs.size() << " runs\n";
        out << "criterion " << format_double(design.criterion_value) << "\n";
        out << "split: " << report.n_train << " train / " << report.n_test
            << " test rows (fraction " << format_double(cfg.train_fraction) << ")\n";
        for (const auto& rr : report.responses)
            out << rr.response << ": agp mse " << format_double(rr.agp_mse) << ", linear mse "
                << format_double(rr.linear_mse) << "\n";
    }
    return report;
}

}  // namespace doaiq
