#pragma once

// Accuracy bookkeeping for sequential task evaluation: the lower-triangular
// matrix A[j][i] of per-task test accuracies after each task, the ACC/BWT
// summary metrics, and CSV round-tripping at fixed 6-digit precision.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "codecl/errors.hpp"

namespace codecl {

/// A[j][i] = accuracy on task i after training task j, for i <= j.
class AccuracyMatrix {
  public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(int t_count) : rows_(static_cast<std::size_t>(t_count)) {
        if (t_count < 1) throw ParameterError("AccuracyMatrix: T must be >= 1");
    }

    int task_count() const { return static_cast<int>(rows_.size()); }

    void set(int j, int i, double value) { row(j).at(static_cast<std::size_t>(i)) = value; }
    double at(int j, int i) const {
        if (j < 0 || j >= task_count() || i < 0 || i > j)
            throw ParameterError("AccuracyMatrix: index outside lower triangle");
        return rows_[static_cast<std::size_t>(j)].at(static_cast<std::size_t>(i));
    }

    bool complete() const {
        for (std::size_t j = 0; j < rows_.size(); ++j)
            if (rows_[j].size() != j + 1) return false;
        return !rows_.empty();
    }

    /// Marks row j as filled; must be called with j+1 values.
    void set_row(int j, std::vector<double> values) {
        if (static_cast<int>(values.size()) != j + 1)
            throw ParameterError("AccuracyMatrix: row length must be j+1");
        rows_.at(static_cast<std::size_t>(j)) = std::move(values);
    }

    const std::vector<double>& row(int j) const { return rows_.at(static_cast<std::size_t>(j)); }

  private:
    std::vector<double>& row(int j) {
        auto& r = rows_.at(static_cast<std::size_t>(j));
        if (r.size() != static_cast<std::size_t>(j) + 1) r.resize(static_cast<std::size_t>(j) + 1);
        return r;
    }
    std::vector<std::vector<double>> rows_;
};

/// Final average accuracy: mean of the last row.
inline double acc(const AccuracyMatrix& a) {
    if (!a.complete()) throw StateError("acc: accuracy matrix incomplete");
    const int t = a.task_count();
    double sum = 0.0;
    for (int i = 0; i < t; ++i) sum += a.at(t - 1, i);
    return sum / t;
}

/// Backward transfer: mean of A[T-1][i] - A[i][i] over the first T-1 tasks.
/// Returns 0 for a single task by convention.
inline double bwt(const AccuracyMatrix& a) {
    if (!a.complete()) throw StateError("bwt: accuracy matrix incomplete");
    const int t = a.task_count();
    if (t < 2) return 0.0;
    double sum = 0.0;
    for (int i = 0; i < t - 1; ++i) sum += a.at(t - 1, i) - a.at(i, i);
    return sum / (t - 1);
}

/// Writes the matrix as a T x T CSV with empty cells above the diagonal.
/// Values carry exactly 6 fractional digits; reading reproduces those
/// rounded values bit-exactly.
inline std::string accuracy_matrix_to_csv(const AccuracyMatrix& a) {
    std::ostringstream out;
    const int t = a.task_count();
    for (int j = 0; j < t; ++j) {
        for (int i = 0; i < t; ++i) {
            if (i > 0) out << ',';
            if (i <= j && static_cast<int>(a.row(j).size()) == j + 1) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.6f", a.at(j, i));
                out << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

inline AccuracyMatrix accuracy_matrix_from_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) break;
            vals.push_back(std::stod(cell));
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw DataError("accuracy matrix CSV is empty");
    AccuracyMatrix a(static_cast<int>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != j + 1)
            throw DataError("accuracy matrix CSV is not lower-triangular");
        a.set_row(static_cast<int>(j), std::move(rows[j]));
    }
    return a;
}

}  // namespace codecl
