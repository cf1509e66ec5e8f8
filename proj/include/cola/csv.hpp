#ifndef COLA_CSV_HPP
#define COLA_CSV_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cola/errors.hpp"
#include "cola/experiment.hpp"
#include "cola/scores.hpp"

namespace cola {

struct IngestedScores {
    ScoreMatrix matrix;
    std::vector<double> labels;  // present iff has_labels
    bool has_labels = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line_no) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw DataError("scores csv: non-finite or non-numeric cell '" + cell + "' at line " +
                        std::to_string(line_no));
    }
    return value;
}

inline std::string format_g6(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace detail

/// Read a score matrix CSV with header `s1,...,sK[,y]`, one row per holdout
/// point. Parse failures name the offending line.
inline IngestedScores ingest_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("scores csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("scores csv: missing header in '" + path + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = detail::split_csv_line(line);
    bool has_labels = !header.empty() && header.back() == "y";
    std::size_t num_scores = header.size() - (has_labels ? 1 : 0);
    if (num_scores == 0) throw DataError("scores csv: header has no score columns");
    for (std::size_t k = 0; k < num_scores; ++k) {
        if (header[k] != "s" + std::to_string(k + 1)) {
            throw DataError("scores csv: expected header s1,...,sK[,y], got '" + header[k] +
                            "' at column " + std::to_string(k + 1));
        }
    }

    std::vector<std::vector<double>> columns(num_scores);
    std::vector<double> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("scores csv: ragged row at line " + std::to_string(line_no) +
                            " (expected " + std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()) + ")");
        }
        for (std::size_t k = 0; k < num_scores; ++k) {
            columns[k].push_back(detail::parse_cell(cells[k], line_no));
        }
        if (has_labels) labels.push_back(detail::parse_cell(cells.back(), line_no));
    }
    if (columns.front().empty()) throw DataError("scores csv: no data rows in '" + path + "'");

    IngestedScores out;
    out.matrix = ScoreMatrix(std::move(columns));
    out.labels = std::move(labels);
    out.has_labels = has_labels;
    return out;
}

/// Write trial records as CSV: header `method,trial,coverage,avg_size,wall_ms,alloc`,
/// floats with 6 significant digits, rows sorted by (method, trial), LF endings.
inline void write_results_csv(const std::vector<TrialRecord>& records, const std::string& path) {
    if (records.empty()) throw std::invalid_argument("write_results_csv: no records");
    std::vector<TrialRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const TrialRecord& a, const TrialRecord& b) {
        return a.method < b.method || (a.method == b.method && a.trial < b.trial);
    });

    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw DataError("results csv: cannot open '" + path + "' for writing");
    out << "method,trial,coverage,avg_size,wall_ms,alloc\n";
    for (const TrialRecord& r : sorted) {
        out << r.method << ',' << r.trial << ',' << detail::format_g6(r.coverage) << ','
            << detail::format_g6(r.avg_size) << ',' << detail::format_g6(r.wall_ms) << ',';
        for (std::size_t k = 0; k < r.alloc.size(); ++k) {
            if (k) out << '/';
            out << r.alloc[k];
        }
        out << '\n';
    }
    if (!out) throw DataError("results csv: write failed for '" + path + "'");
}

/// Loss oracle for an ingested score matrix. Sublevel geometry is not
/// recoverable from scores alone, so external columns are treated as
/// residual-type scores with a common center: every sublevel set is a centered
/// interval of length 2t and the intersection length is 2 min over active
/// thresholds. Coverage statistics computed from the matrix are exact.
inline LossOracle make_external_oracle(const ScoreMatrix& matrix, double alpha) {
    const int n = static_cast<int>(matrix.rows());
    const int budget = budget_units(alpha, n);
    const std::size_t num_scores = matrix.cols();

    std::vector<std::vector<double>> sorted_cols(num_scores);
    std::vector<std::vector<double>> thresholds(num_scores, std::vector<double>(budget + 1));
    std::vector<std::vector<SublevelGeometry>> geometry(num_scores);
    for (std::size_t k = 0; k < num_scores; ++k) {
        sorted_cols[k] = matrix.column(k);
        std::sort(sorted_cols[k].begin(), sorted_cols[k].end());
        thresholds[k][0] = kInf;
        for (int u = 1; u <= budget; ++u) thresholds[k][u] = sorted_cols[k][n - u];
        geometry[k].assign(matrix.rows(), SublevelGeometry{0.0, 0.0, 1.0});
    }
    return LossOracle(std::move(thresholds), std::move(geometry), n, std::move(sorted_cols));
}

} // namespace cola

#endif // COLA_CSV_HPP
