#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "doaiq/csv.hpp"
#include "doaiq/errors.hpp"

namespace doaiq {

// Dummy coding with the first level as reference: level 1 -> all zeros,
// level h+1 -> unit vector e_h of length k-1.
inline std::vector<int> encode_categorical(const std::string& level,
                                           const std::vector<std::string>& levels) {
    if (levels.size() < 2) throw ParameterError("encode_categorical: need >= 2 levels");
    const auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end())
        throw ParameterError("encode_categorical: unknown level '" + level + "'");
    std::vector<int> z(levels.size() - 1, 0);
    const std::size_t idx = static_cast<std::size_t>(it - levels.begin());
    if (idx > 0) z[idx - 1] = 1;
    return z;
}

// One continuous column: optional log transform, then an affine map of the
// training range onto [0,1] (stored so new points encode consistently).
struct EncodedColumn {
    std::string name;
    bool log_scale = false;
    double lo = 0.0;
    double hi = 1.0;

    double encode(double v) const {
        if (log_scale) {
            if (!(v > 0.0))
                throw ParameterError("column '" + name + "': log transform needs positive values");
            v = std::log(v);
        }
        const double span = hi - lo;
        return span > 0.0 ? (v - lo) / span : 0.0;
    }
};

// Maps raw design-table rows to the model covariate spaces.  The continuous
// block is the simplex proportions followed by the unconstrained factors, all
// normalized by training ranges; the categorical factor is dummy-coded.
struct CovariateEncoder {
    std::vector<EncodedColumn> cont_cols;  // x1..xm first, then z columns
    std::size_t n_simplex = 0;
    std::string cat_col;  // empty when the data has no categorical factor
    std::vector<std::string> levels;

    std::size_t p() const { return cont_cols.size(); }
    std::size_t q() const { return levels.empty() ? 0 : levels.size() - 1; }

    std::vector<double> encode_continuous(const std::vector<double>& raw) const {
        if (raw.size() != cont_cols.size())
            throw ParameterError("encoder: expected " + std::to_string(cont_cols.size()) +
                                 " continuous values, got " + std::to_string(raw.size()));
        std::vector<double> out(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) out[i] = cont_cols[i].encode(raw[i]);
        return out;
    }

    std::vector<int> encode_level(const std::string& level) const {
        return encode_categorical(level, levels);
    }
};

namespace detail {

inline bool is_x_column(const std::string& name, std::size_t& index_out) {
    if (name.size() < 2 || name[0] != 'x') return false;
    std::size_t idx = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
        if (name[i] < '0' || name[i] > '9') return false;
        idx = idx * 10 + static_cast<std::size_t>(name[i] - '0');
    }
    index_out = idx;
    return idx >= 1;
}

inline bool is_response_column(const std::string& name) {
    if (name.empty() || name[0] != 'y') return false;
    for (std::size_t i = 1; i < name.size(); ++i)
        if (name[i] < '0' || name[i] > '9') return false;
    return true;
}

}  // namespace detail

// Builds an encoder from a design/data table.  Column roles follow the
// pipeline schema: x1..xm are the proportions, z4 the categorical factor,
// run_id/rep bookkeeping, y* responses; everything else is a continuous
// factor.  log_cols lists columns to log-transform before normalization.
inline CovariateEncoder build_encoder(const CsvTable& data,
                                      const std::vector<std::string>& log_cols = {"z1"}) {
    CovariateEncoder enc;
    std::vector<std::pair<std::size_t, std::string>> x_cols;  // (index, name)
    std::vector<std::string> z_cols;
    for (const auto& name : data.header) {
        std::size_t xi = 0;
        if (name == "run_id" || name == "rep" || detail::is_response_column(name)) continue;
        if (name == "z4") {
            enc.cat_col = name;
            continue;
        }
        if (detail::is_x_column(name, xi)) x_cols.emplace_back(xi, name);
        else z_cols.push_back(name);
    }
    if (x_cols.empty()) throw ParameterError("encoder: no proportion columns x1..xm found");
    std::sort(x_cols.begin(), x_cols.end());
    enc.n_simplex = x_cols.size();

    auto add_col = [&](const std::string& name) {
        EncodedColumn col;
        col.name = name;
        col.log_scale = std::find(log_cols.begin(), log_cols.end(), name) != log_cols.end();
        const std::size_t c = data.column(name);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < data.rows.size(); ++r) {
            double v = data.num(r, c);
            if (col.log_scale) {
                if (!(v > 0.0))
                    throw ParameterError("column '" + name + "': log transform needs positive values");
                v = std::log(v);
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        col.lo = lo;
        col.hi = hi;
        enc.cont_cols.push_back(std::move(col));
    };
    for (const auto& [idx, name] : x_cols) add_col(name);
    for (const auto& name : z_cols) add_col(name);

    if (!enc.cat_col.empty()) {
        const std::size_t c = data.column(enc.cat_col);
        // first-appearance order: in cross-array data the first level seen is
        // the first declared level, which stays the encoding reference
        std::vector<std::string> seen;
        for (const auto& row : data.rows)
            if (std::find(seen.begin(), seen.end(), row[c]) == seen.end())
                seen.push_back(row[c]);
        if (seen.size() < 2)
            throw ParameterError("encoder: categorical column '" + enc.cat_col +
                                 "' has fewer than 2 observed levels");
        enc.levels = std::move(seen);
    }
    if (data.rows.empty()) throw ParameterError("encoder: data table has no rows");
    return enc;
}

// Raw continuous values for one table row, in encoder column order.
inline std::vector<double> raw_continuous_row(const CsvTable& data, std::size_t row,
                                              const CovariateEncoder& enc) {
    std::vector<double> raw;
    raw.reserve(enc.cont_cols.size());
    for (const auto& col : enc.cont_cols) raw.push_back(data.num(row, data.column(col.name)));
    return raw;
}

inline void write_encoder(std::ostream& out, const CovariateEncoder& enc) {
    out << "encoder n_simplex " << enc.n_simplex << " cols " << enc.cont_cols.size() << "\n";
    for (const auto& c : enc.cont_cols)
        out << "col " << c.name << ' ' << (c.log_scale ? 1 : 0) << ' ' << format_double(c.lo)
            << ' ' << format_double(c.hi) << "\n";
    out << "cat " << (enc.cat_col.empty() ? "-" : enc.cat_col);
    for (const auto& l : enc.levels) out << ' ' << l;
    out << "\n";
}

inline CovariateEncoder read_encoder(std::istream& in) {
    CovariateEncoder enc;
    std::string tag, word;
    std::size_t ncols = 0;
    in >> tag >> word >> enc.n_simplex >> word >> ncols;
    if (tag != "encoder") throw IoError("model file: expected encoder block");
    for (std::size_t i = 0; i < ncols; ++i) {
        EncodedColumn c;
        int log_flag = 0;
        in >> tag >> c.name >> log_flag >> c.lo >> c.hi;
        if (tag != "col") throw IoError("model file: malformed encoder column");
        c.log_scale = log_flag != 0;
        enc.cont_cols.push_back(std::move(c));
    }
    in >> tag >> enc.cat_col;
    if (tag != "cat") throw IoError("model file: malformed encoder categorical line");
    if (enc.cat_col == "-") enc.cat_col.clear();
    std::string rest;
    std::getline(in, rest);
    std::istringstream levels_in(rest);
    std::string level;
    while (levels_in >> level) enc.levels.push_back(level);
    if (!enc.cat_col.empty() && enc.levels.size() < 2)
        throw IoError("model file: categorical encoder needs >= 2 levels");
    return enc;
}

}  // namespace doaiq
