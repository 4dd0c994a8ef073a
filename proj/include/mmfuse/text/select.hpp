#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

struct SelectionMask {
    std::vector<std::size_t> indices;  // strictly increasing
    std::string provenance;            // "lasso" or "rfe"
};

inline FeatureMatrix apply_mask(const FeatureMatrix& m, const SelectionMask& mask) {
    FeatureMatrix out(m.rows, mask.indices.size());
    for (std::size_t c = 0; c < mask.indices.size(); ++c)
        out.col_names[c] = m.col_names[mask.indices[c]];
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < mask.indices.size(); ++c)
            out.at(r, c) = m.at(r, mask.indices[c]);
    return out;
}

namespace detail {

// Cyclic coordinate descent for 0.5*||y - X b||^2 + lambda*||b||_1.
inline std::vector<double> lasso_cd(const FeatureMatrix& X, const std::vector<double>& y,
                                    double lambda, std::size_t max_iter) {
    const std::size_t n = X.rows, p = X.cols;
    std::vector<double> beta(p, 0.0);
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < p; ++c) col_sq[c] += X.at(r, c) * X.at(r, c);
    std::vector<double> resid(y);  // y - X*beta
    for (std::size_t it = 0; it < max_iter; ++it) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (col_sq[j] == 0.0) continue;
            double rho = 0.0;
            for (std::size_t r = 0; r < n; ++r) rho += X.at(r, j) * resid[r];
            rho += col_sq[j] * beta[j];
            double b;
            if (rho > lambda) b = (rho - lambda) / col_sq[j];
            else if (rho < -lambda) b = (rho + lambda) / col_sq[j];
            else b = 0.0;
            const double delta = b - beta[j];
            if (delta != 0.0) {
                for (std::size_t r = 0; r < n; ++r) resid[r] -= delta * X.at(r, j);
                beta[j] = b;
            }
            max_change = std::max(max_change, std::fabs(delta));
        }
        if (max_change < 1e-6) break;
    }
    return beta;
}

// Solve (A + ridge*I) x = b in place via Gaussian elimination with partial
// pivoting. A is p x p row-major.
inline std::vector<double> solve_ridge(std::vector<double> A, std::vector<double> b,
                                       std::size_t p, double ridge) {
    for (std::size_t i = 0; i < p; ++i) A[i * p + i] += ridge;
    for (std::size_t k = 0; k < p; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < p; ++r)
            if (std::fabs(A[r * p + k]) > std::fabs(A[piv * p + k])) piv = r;
        if (piv != k) {
            for (std::size_t c = 0; c < p; ++c) std::swap(A[k * p + c], A[piv * p + c]);
            std::swap(b[k], b[piv]);
        }
        const double d = A[k * p + k];
        if (d == 0.0) throw std::runtime_error("singular system in ridge solve");
        for (std::size_t r = k + 1; r < p; ++r) {
            const double f = A[r * p + k] / d;
            if (f == 0.0) continue;
            for (std::size_t c = k; c < p; ++c) A[r * p + c] -= f * A[k * p + c];
            b[r] -= f * b[k];
        }
    }
    std::vector<double> x(p, 0.0);
    for (std::size_t k = p; k-- > 0;) {
        double s = b[k];
        for (std::size_t c = k + 1; c < p; ++c) s -= A[k * p + c] * x[c];
        x[k] = s / A[k * p + k];
    }
    return x;
}

inline std::size_t n_classes_of(const std::vector<int>& y) {
    int k = 0;
    for (int v : y) k = std::max(k, v + 1);
    return static_cast<std::size_t>(k);
}

}  // namespace detail

// One-vs-rest L1 least squares on +/-1 targets; mask = union of features with
// a nonzero coefficient in any class.
inline SelectionMask lasso_select(const FeatureMatrix& X, const std::vector<int>& y,
                                  double lambda, std::size_t max_iter = 1000) {
    if (lambda < 0.0) throw std::invalid_argument("lasso_select: lambda must be >= 0");
    if (X.rows != y.size()) throw std::invalid_argument("lasso_select: row/label mismatch");
    const std::size_t K = detail::n_classes_of(y);
    std::vector<bool> keep(X.cols, false);
    for (std::size_t c = 0; c < K; ++c) {
        std::vector<double> t(X.rows);
        for (std::size_t r = 0; r < X.rows; ++r)
            t[r] = (static_cast<std::size_t>(y[r]) == c) ? 1.0 : -1.0;
        const auto beta = detail::lasso_cd(X, t, lambda, max_iter);
        for (std::size_t j = 0; j < X.cols; ++j)
            if (beta[j] != 0.0) keep[j] = true;
    }
    SelectionMask mask;
    mask.provenance = "lasso";
    for (std::size_t j = 0; j < X.cols; ++j)
        if (keep[j]) mask.indices.push_back(j);
    return mask;
}

// Recursive feature elimination under a ridge-regularized one-vs-rest linear
// scorer: rank by summed |coefficient| across classes, drop the lowest
// ceil(step_fraction * remaining) per round until `keep` remain.
inline SelectionMask rfe_select(const FeatureMatrix& X, const std::vector<int>& y,
                                std::size_t keep, double step_fraction,
                                double ridge = 1e-3) {
    if (keep < 1 || keep > X.cols) throw std::invalid_argument("rfe_select: keep out of range");
    if (!(step_fraction > 0.0 && step_fraction <= 0.5))
        throw std::invalid_argument("rfe_select: step_fraction must be in (0, 0.5]");
    const std::size_t K = detail::n_classes_of(y);
    std::vector<std::size_t> alive(X.cols);
    for (std::size_t j = 0; j < X.cols; ++j) alive[j] = j;

    while (alive.size() > keep) {
        const std::size_t p = alive.size();
        // Gram matrix and per-class rhs on surviving columns.
        std::vector<double> gram(p * p, 0.0);
        for (std::size_t r = 0; r < X.rows; ++r)
            for (std::size_t a = 0; a < p; ++a) {
                const double xa = X.at(r, alive[a]);
                if (xa == 0.0) continue;
                for (std::size_t b = a; b < p; ++b)
                    gram[a * p + b] += xa * X.at(r, alive[b]);
            }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < a; ++b) gram[a * p + b] = gram[b * p + a];

        std::vector<double> score(p, 0.0);
        for (std::size_t c = 0; c < K; ++c) {
            std::vector<double> rhs(p, 0.0);
            for (std::size_t r = 0; r < X.rows; ++r) {
                const double t = (static_cast<std::size_t>(y[r]) == c) ? 1.0 : -1.0;
                for (std::size_t a = 0; a < p; ++a) rhs[a] += X.at(r, alive[a]) * t;
            }
            const auto beta = detail::solve_ridge(gram, rhs, p, ridge);
            for (std::size_t a = 0; a < p; ++a) score[a] += std::fabs(beta[a]);
        }

        std::size_t drop = static_cast<std::size_t>(
            std::ceil(step_fraction * static_cast<double>(p)));
        drop = std::min(drop, p - keep);
        // Sort positions by score ascending, ties toward the higher column
        // index so low-index columns survive longer (deterministic).
        std::vector<std::size_t> order(p);
        for (std::size_t a = 0; a < p; ++a) order[a] = a;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (score[a] != score[b]) return score[a] < score[b];
            return alive[a] > alive[b];
        });
        std::vector<bool> dead(p, false);
        for (std::size_t d = 0; d < drop; ++d) dead[order[d]] = true;
        std::vector<std::size_t> next;
        for (std::size_t a = 0; a < p; ++a)
            if (!dead[a]) next.push_back(alive[a]);
        alive = std::move(next);
    }
    SelectionMask mask;
    mask.provenance = "rfe";
    mask.indices = std::move(alive);
    return mask;
}

}  // namespace mmfuse
