#pragma once

#include <string>
#include <vector>

#include "doaiq/csv.hpp"
#include "doaiq/errors.hpp"
#include "doaiq/factors.hpp"
#include "doaiq/maxpro.hpp"
#include "doaiq/simplex.hpp"

namespace doaiq {

// x1,...,xm one row per point, 17 significant digits
inline void write_points_csv(const std::string& path, const std::vector<SimplexPoint>& points) {
    if (points.empty()) throw ParameterError("write_points_csv: no points");
    CsvTable t;
    const std::size_t m = points.front().dim();
    for (std::size_t l = 1; l <= m; ++l) t.header.push_back("x" + std::to_string(l));
    for (const auto& p : points) {
        std::vector<std::string> row;
        row.reserve(m);
        for (std::size_t l = 0; l < m; ++l) row.push_back(format_double(p[l]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline std::vector<SimplexPoint> read_points_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    std::vector<SimplexPoint> points;
    points.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<double> coords(t.header.size());
        for (std::size_t c = 0; c < t.header.size(); ++c) coords[c] = t.num(r, c);
        points.emplace_back(std::move(coords));
    }
    return points;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceEntry>& trace) {
    CsvTable t;
    t.header = {"step", "action", "criterion"};
    for (const auto& e : trace)
        t.rows.push_back({std::to_string(e.step), e.action, format_double(e.criterion)});
    write_csv(path, t);
}

// run_id,rep,z4,<z names...>,x1..xm with optional response columns appended
inline CsvTable full_design_table(const FullDesign& design,
                                  const std::vector<std::string>& z_names,
                                  const std::vector<std::pair<std::string, std::vector<double>>>&
                                      responses = {}) {
    if (design.runs.empty()) throw ParameterError("full design is empty");
    const std::size_t m = design.runs.front().x.dim();
    CsvTable t;
    t.header = {"run_id", "rep", "z4"};
    for (const auto& n : z_names) t.header.push_back(n);
    for (std::size_t l = 1; l <= m; ++l) t.header.push_back("x" + std::to_string(l));
    for (const auto& r : responses) {
        if (r.second.size() != design.runs.size())
            throw ParameterError("response column '" + r.first + "' length mismatch");
        t.header.push_back(r.first);
    }
    for (std::size_t i = 0; i < design.runs.size(); ++i) {
        const auto& run = design.runs[i];
        std::vector<std::string> row;
        row.push_back(std::to_string(run.run_id));
        row.push_back(std::to_string(run.replicate_index));
        row.push_back(run.z_cat);
        for (double z : run.z_cont) row.push_back(format_double(z));
        for (std::size_t l = 0; l < m; ++l) row.push_back(format_double(run.x[l]));
        for (const auto& r : responses) row.push_back(format_double(r.second[i]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace doaiq
