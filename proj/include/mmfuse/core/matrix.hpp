#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfuse {

// Raised when a computation produces or receives non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major numeric table with named columns. All arithmetic in the
// toolkit runs in 64-bit reals.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;          // rows * cols, row-major
    std::vector<std::string> col_names;  // size cols (may be empty names)

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill), col_names(c) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    const double* row(std::size_t r) const { return values.data() + r * cols; }
    double* row(std::size_t r) { return values.data() + r * cols; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

struct ZScoreStats {
    std::vector<double> mean;
    std::vector<double> stddev;        // population (1/n) standard deviation
    std::vector<bool> is_constant;     // stddev == 0
};

inline ZScoreStats zscore_fit(const FeatureMatrix& m) {
    if (m.rows == 0) throw std::invalid_argument("zscore_fit: empty input");
    ZScoreStats s;
    s.mean.assign(m.cols, 0.0);
    s.stddev.assign(m.cols, 0.0);
    s.is_constant.assign(m.cols, false);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) s.mean[c] += m.at(r, c);
    const double n = static_cast<double>(m.rows);
    for (std::size_t c = 0; c < m.cols; ++c) s.mean[c] /= n;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            const double d = m.at(r, c) - s.mean[c];
            s.stddev[c] += d * d;
        }
    for (std::size_t c = 0; c < m.cols; ++c) {
        s.stddev[c] = std::sqrt(s.stddev[c] / n);
        s.is_constant[c] = (s.stddev[c] == 0.0);
    }
    return s;
}

// Constant columns map to 0 rather than NaN.
inline FeatureMatrix zscore_apply(const FeatureMatrix& m, const ZScoreStats& s) {
    if (m.cols != s.mean.size())
        throw std::invalid_argument("zscore_apply: column count mismatch");
    FeatureMatrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            out.at(r, c) = s.is_constant[c] ? 0.0 : (m.at(r, c) - s.mean[c]) / s.stddev[c];
    return out;
}

inline FeatureMatrix zscore_invert(const FeatureMatrix& m, const ZScoreStats& s) {
    if (m.cols != s.mean.size())
        throw std::invalid_argument("zscore_invert: column count mismatch");
    FeatureMatrix out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            out.at(r, c) = m.at(r, c) * s.stddev[c] + s.mean[c];
    return out;
}

inline FeatureMatrix concat_columns(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.rows != b.rows)
        throw std::invalid_argument("concat_columns: row count mismatch");
    FeatureMatrix out(a.rows, a.cols + b.cols);
    for (std::size_t c = 0; c < a.cols; ++c) out.col_names[c] = a.col_names[c];
    for (std::size_t c = 0; c < b.cols; ++c) out.col_names[a.cols + c] = b.col_names[c];
    for (std::size_t r = 0; r < a.rows; ++r) {
        double* dst = out.row(r);
        const double* pa = a.row(r);
        const double* pb = b.row(r);
        for (std::size_t c = 0; c < a.cols; ++c) dst[c] = pa[c];
        for (std::size_t c = 0; c < b.cols; ++c) dst[a.cols + c] = pb[c];
    }
    return out;
}

inline FeatureMatrix pad_columns(const FeatureMatrix& m, std::size_t target) {
    if (m.cols > target) throw std::invalid_argument("pad_columns: cannot truncate");
    if (m.cols == target) return m;
    FeatureMatrix out(m.rows, target);
    for (std::size_t c = 0; c < m.cols; ++c) out.col_names[c] = m.col_names[c];
    for (std::size_t c = m.cols; c < target; ++c)
        out.col_names[c] = "pad_" + std::to_string(c - m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* src = m.row(r);
        double* dst = out.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
    }
    return out;
}

// Row subset in the given order (duplicates allowed).
inline FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<std::size_t>& idx) {
    FeatureMatrix out(idx.size(), m.cols);
    out.col_names = m.col_names;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = m.row(idx[r]);
        double* dst = out.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) dst[c] = src[c];
    }
    return out;
}

}  // namespace mmfuse
