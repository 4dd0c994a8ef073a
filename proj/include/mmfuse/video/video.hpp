#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/matrix.hpp"
#include "mmfuse/core/rng.hpp"
#include "mmfuse/gbdt/gbdt.hpp"

namespace mmfuse {

// Per-column linear interpolation between nearest finite neighbors in row
// order; leading/trailing gaps take the nearest finite value.
inline FeatureMatrix interpolate_missing(const FeatureMatrix& t) {
    FeatureMatrix out = t;
    for (std::size_t c = 0; c < t.cols; ++c) {
        std::vector<std::size_t> finite;
        for (std::size_t r = 0; r < t.rows; ++r)
            if (std::isfinite(t.at(r, c))) finite.push_back(r);
        if (finite.empty())
            throw std::runtime_error("interpolate_missing: column '" +
                                     (t.col_names[c].empty() ? std::to_string(c) : t.col_names[c]) +
                                     "' has no finite values");
        std::size_t k = 0;  // index into finite
        for (std::size_t r = 0; r < t.rows; ++r) {
            if (std::isfinite(t.at(r, c))) continue;
            while (k + 1 < finite.size() && finite[k + 1] < r) ++k;
            if (r < finite.front()) {
                out.at(r, c) = t.at(finite.front(), c);
            } else if (r > finite.back()) {
                out.at(r, c) = t.at(finite.back(), c);
            } else {
                const std::size_t lo = finite[k], hi = finite[k + 1];
                const double w = static_cast<double>(r - lo) / static_cast<double>(hi - lo);
                out.at(r, c) = (1.0 - w) * t.at(lo, c) + w * t.at(hi, c);
            }
        }
    }
    return out;
}

// Column-median fill for tables with no meaningful row ordering.
inline FeatureMatrix median_fill_missing(const FeatureMatrix& t) {
    FeatureMatrix out = t;
    for (std::size_t c = 0; c < t.cols; ++c) {
        std::vector<double> finite;
        for (std::size_t r = 0; r < t.rows; ++r)
            if (std::isfinite(t.at(r, c))) finite.push_back(t.at(r, c));
        if (finite.empty())
            throw std::runtime_error("median_fill_missing: column '" +
                                     (t.col_names[c].empty() ? std::to_string(c) : t.col_names[c]) +
                                     "' has no finite values");
        std::sort(finite.begin(), finite.end());
        const double med = finite.size() % 2 ? finite[finite.size() / 2]
                                             : 0.5 * (finite[finite.size() / 2 - 1] +
                                                      finite[finite.size() / 2]);
        for (std::size_t r = 0; r < t.rows; ++r)
            if (!std::isfinite(t.at(r, c))) out.at(r, c) = med;
    }
    return out;
}

struct VideoStacker {
    GbdtModel model;

    // Training-time stacking. With out_of_fold=true the probability block is
    // produced by 5-fold out-of-fold prediction so the downstream encoder
    // never sees probabilities fitted on its own row; the whole-data model is
    // kept for inference.
    FeatureMatrix fit_transform(const FeatureMatrix& t, const std::vector<int>& y,
                                const GbdtConfig& cfg, SeededRng& rng,
                                bool out_of_fold = true, std::size_t n_folds = 5) {
        if (t.rows != y.size()) throw std::invalid_argument("stack_with_gbdt: row/label mismatch");
        model = gbdt_fit(t, y, cfg);
        FeatureMatrix proba;
        if (out_of_fold && t.rows >= n_folds) {
            std::vector<std::size_t> perm(t.rows);
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            rng.shuffle(perm);
            proba = FeatureMatrix(t.rows, model.n_classes);
            for (std::size_t c = 0; c < model.n_classes; ++c)
                proba.col_names[c] = "gbdt_proba_" + std::to_string(c);
            for (std::size_t fold = 0; fold < n_folds; ++fold) {
                std::vector<std::size_t> train_idx, hold_idx;
                for (std::size_t i = 0; i < perm.size(); ++i)
                    (i % n_folds == fold ? hold_idx : train_idx).push_back(perm[i]);
                std::vector<int> y_train(train_idx.size());
                for (std::size_t i = 0; i < train_idx.size(); ++i) y_train[i] = y[train_idx[i]];
                const auto fold_model = gbdt_fit(take_rows(t, train_idx), y_train, cfg);
                const auto fold_proba = gbdt_predict_proba(fold_model, take_rows(t, hold_idx));
                for (std::size_t i = 0; i < hold_idx.size(); ++i)
                    for (std::size_t c = 0; c < model.n_classes; ++c)
                        proba.at(hold_idx[i], c) = fold_proba.at(i, c);
            }
        } else {
            proba = gbdt_predict_proba(model, t);
        }
        return concat_columns(t, proba);
    }

    FeatureMatrix transform(const FeatureMatrix& t) const {
        if (!model.fitted()) throw std::runtime_error("stack_with_gbdt: model not fitted");
        return concat_columns(t, gbdt_predict_proba(model, t));
    }
};

}  // namespace mmfuse
