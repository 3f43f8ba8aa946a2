#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "doaiq/csv.hpp"
#include "doaiq/encoding.hpp"
#include "doaiq/errors.hpp"

namespace doaiq {

inline double mse(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size())
        throw ParameterError("mse: prediction and truth lengths differ");
    if (predictions.empty()) throw ParameterError("mse: empty inputs");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - truths[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predictions.size());
}

// First-order least-squares benchmark sharing the AGP covariate transforms.
// The simplex proportions sum to one and would be collinear with the
// intercept, so one proportion column is dropped from the design matrix.
struct LinearModel {
    Eigen::VectorXd coefficients;          // intercept first
    std::vector<std::string> term_names;   // aligned with coefficients
    CovariateEncoder encoder;
    std::size_t dropped_simplex_col = 0;   // 0-based index into encoder's x block
    std::string response_name = "y";

    double predict_encoded(const std::vector<double>& x_cont,
                           const std::vector<int>& z_bin) const {
        double v = coefficients(0);
        Eigen::Index k = 1;
        for (std::size_t j = 0; j < x_cont.size(); ++j) {
            if (j < encoder.n_simplex && j == dropped_simplex_col) continue;
            v += coefficients(k++) * x_cont[j];
        }
        for (int z : z_bin) v += coefficients(k++) * static_cast<double>(z);
        return v;
    }
};

// Least squares via column-pivoted QR.  Throws a singularity error naming the
// dependent columns when the design matrix is rank deficient.
inline Eigen::VectorXd ols_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names) {
    if (design.rows() <= design.cols())
        throw ParameterError("ols: need more observations than coefficients");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols()) {
        std::ostringstream msg;
        msg << "ols: rank-deficient design matrix; dependent columns:";
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) {
            const Eigen::Index col = perm(k);
            msg << ' ' << (static_cast<std::size_t>(col) < names.size()
                               ? names[static_cast<std::size_t>(col)]
                               : std::to_string(col));
        }
        throw ConditioningError(msg.str());
    }
    return qr.solve(y);
}

namespace linreg_detail {

inline Eigen::RowVectorXd build_design_row(const LinearModel& model, Eigen::Index ncoef,
                                           const std::vector<double>& x_cont,
                                           const std::vector<int>& z_bin) {
    Eigen::RowVectorXd row(ncoef);
    row(0) = 1.0;
    Eigen::Index k = 1;
    for (std::size_t j = 0; j < x_cont.size(); ++j) {
        if (j < model.encoder.n_simplex && j == model.dropped_simplex_col) continue;
        row(k++) = x_cont[j];
    }
    for (int z : z_bin) row(k++) = static_cast<double>(z);
    return row;
}

}  // namespace linreg_detail

// Fits the benchmark regression on encoded covariates.  `drop_col` selects
// which proportion column leaves the design matrix (the fitted subspace does
// not depend on the choice).
inline LinearModel ols_fit_encoded(const CovariateEncoder& enc,
                                   const std::vector<std::vector<double>>& x_cont,
                                   const std::vector<std::vector<int>>& z_bin,
                                   const Eigen::VectorXd& y, std::size_t drop_col = 0) {
    if (x_cont.size() != z_bin.size() || static_cast<Eigen::Index>(x_cont.size()) != y.size())
        throw ParameterError("ols: input row counts differ");
    if (x_cont.empty()) throw ParameterError("ols: empty data");
    if (enc.n_simplex < 1 || drop_col >= enc.n_simplex)
        throw ParameterError("ols: invalid proportion column to drop");

    LinearModel model;
    model.encoder = enc;
    model.dropped_simplex_col = drop_col;

    model.term_names.push_back("intercept");
    for (std::size_t j = 0; j < enc.cont_cols.size(); ++j) {
        if (j < enc.n_simplex && j == drop_col) continue;
        model.term_names.push_back(enc.cont_cols[j].name);
    }
    for (std::size_t h = 1; h < enc.levels.size(); ++h)
        model.term_names.push_back(enc.cat_col + "=" + enc.levels[h]);

    const Eigen::Index ncoef = static_cast<Eigen::Index>(model.term_names.size());
    Eigen::MatrixXd design(x_cont.size(), ncoef);
    for (std::size_t i = 0; i < x_cont.size(); ++i)
        design.row(static_cast<Eigen::Index>(i)) =
            linreg_detail::build_design_row(model, ncoef, x_cont[i], z_bin[i]);

    model.coefficients = ols_solve(design, y, model.term_names);
    return model;
}

inline LinearModel ols_fit_table(const CsvTable& data, const std::string& response,
                                 const std::vector<std::string>& log_cols = {"z1"},
                                 std::size_t drop_col_plus1 = 0) {
    CovariateEncoder enc = build_encoder(data, log_cols);
    const std::size_t n = data.rows.size();
    std::vector<std::vector<double>> xs(n);
    std::vector<std::vector<int>> zs(n);
    Eigen::VectorXd y(n);
    const std::size_t yc = data.column(response);
    const std::size_t cc = enc.cat_col.empty() ? 0 : data.column(enc.cat_col);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = enc.encode_continuous(raw_continuous_row(data, i, enc));
        zs[i] = enc.cat_col.empty() ? std::vector<int>{} : enc.encode_level(data.rows[i][cc]);
        y(i) = data.num(i, yc);
    }
    const std::size_t drop = drop_col_plus1 == 0 ? enc.n_simplex - 1 : drop_col_plus1 - 1;
    LinearModel model = ols_fit_encoded(enc, xs, zs, y, drop);
    model.response_name = response;
    return model;
}

inline void save_linear_model(const std::string& path, const LinearModel& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "doaiq-linear-model v1\n";
    out << "response " << model.response_name << "\n";
    out << "dropped " << model.dropped_simplex_col << "\n";
    out << "coefficients " << model.coefficients.size() << "\n";
    for (Eigen::Index k = 0; k < model.coefficients.size(); ++k)
        out << model.term_names[static_cast<std::size_t>(k)] << ' '
            << format_double(model.coefficients(k)) << "\n";
    write_encoder(out, model.encoder);
    out << "end\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline LinearModel load_linear_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string magic, version, tag;
    in >> magic >> version;
    if (magic != "doaiq-linear-model" || version != "v1")
        throw IoError("'" + path + "' is not a doaiq linear model file");
    LinearModel model;
    std::size_t ncoef = 0;
    in >> tag >> model.response_name;
    in >> tag >> model.dropped_simplex_col;
    in >> tag >> ncoef;
    model.coefficients.resize(ncoef);
    model.term_names.resize(ncoef);
    for (std::size_t k = 0; k < ncoef; ++k) in >> model.term_names[k] >> model.coefficients(k);
    model.encoder = read_encoder(in);
    in >> tag;
    if (!in || tag != "end") throw IoError("linear model file: truncated");
    return model;
}

}  // namespace doaiq
