#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

inline std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& y_true,
                                                              const std::vector<int>& y_pred,
                                                              std::size_t K) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("confusion_matrix: size mismatch");
    std::vector<std::vector<std::size_t>> cm(K, std::vector<std::size_t>(K, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || static_cast<std::size_t>(y_true[i]) >= K ||
            y_pred[i] < 0 || static_cast<std::size_t>(y_pred[i]) >= K)
            throw std::invalid_argument("confusion_matrix: label out of range");
        ++cm[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    }
    return cm;
}

struct PrfScores {
    std::vector<double> precision, recall, f1;
    std::vector<std::size_t> support;  // per-class true counts
    double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
};

// Zero-denominator cases are 0 by convention.
inline PrfScores prf_scores(const std::vector<std::vector<std::size_t>>& cm) {
    const std::size_t K = cm.size();
    PrfScores s;
    s.precision.resize(K);
    s.recall.resize(K);
    s.f1.resize(K);
    s.support.resize(K);
    std::size_t total = 0;
    for (std::size_t c = 0; c < K; ++c) {
        std::size_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < K; ++j) {
            row_sum += cm[c][j];
            col_sum += cm[j][c];
        }
        s.support[c] = row_sum;
        total += row_sum;
        const double tp = static_cast<double>(cm[c][c]);
        s.precision[c] = col_sum ? tp / static_cast<double>(col_sum) : 0.0;
        s.recall[c] = row_sum ? tp / static_cast<double>(row_sum) : 0.0;
        s.f1[c] = (s.precision[c] + s.recall[c]) > 0.0
                      ? 2.0 * s.precision[c] * s.recall[c] / (s.precision[c] + s.recall[c])
                      : 0.0;
    }
    for (std::size_t c = 0; c < K; ++c) {
        const double w = total ? static_cast<double>(s.support[c]) / static_cast<double>(total) : 0.0;
        s.weighted_precision += w * s.precision[c];
        s.weighted_recall += w * s.recall[c];
        s.weighted_f1 += w * s.f1[c];
        s.macro_precision += s.precision[c] / static_cast<double>(K);
        s.macro_recall += s.recall[c] / static_cast<double>(K);
        s.macro_f1 += s.f1[c] / static_cast<double>(K);
    }
    return s;
}

inline double accuracy_from_cm(const std::vector<std::vector<std::size_t>>& cm) {
    std::size_t trace = 0, total = 0;
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t j = 0; j < cm.size(); ++j) {
            total += cm[i][j];
            if (i == j) trace += cm[i][j];
        }
    return total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
}

inline double log_loss(const FeatureMatrix& probs, const std::vector<int>& y_true) {
    if (probs.rows != y_true.size()) throw std::invalid_argument("log_loss: size mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        if (y_true[r] < 0 || static_cast<std::size_t>(y_true[r]) >= probs.cols)
            throw std::invalid_argument("log_loss: label out of range");
        acc -= std::log(std::max(probs.at(r, static_cast<std::size_t>(y_true[r])), 1e-12));
    }
    return acc / static_cast<double>(probs.rows);
}

// Argmax with ties toward the lowest class id.
inline std::vector<int> argmax_predictions(const FeatureMatrix& probs) {
    std::vector<int> out(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c)
            if (probs.at(r, c) > probs.at(r, best)) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

struct RocCurve {
    std::vector<double> fpr, tpr, thresholds;
    double auc = 0.0;
    bool defined = false;
};

// One-vs-rest AUC via the pairwise (Mann-Whitney) statistic with ties counted
// 0.5; curve points at every distinct score threshold, descending.
inline RocCurve roc_one_vs_rest(const std::vector<double>& scores,
                                const std::vector<bool>& positive) {
    RocCurve out;
    std::size_t n_pos = 0, n_neg = 0;
    for (bool p : positive) (p ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return out;
    out.defined = true;

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // AUC by rank statistic (ties get averaged ranks).
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    // rank 1 = highest score; Mann-Whitney on descending ranks
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (positive[k]) pos_rank_sum += static_cast<double>(scores.size()) - rank[k] + 1.0;
    out.auc = (pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
              (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    // Curve points.
    out.fpr.push_back(0.0);
    out.tpr.push_back(0.0);
    out.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0, fp = 0;
    i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) (positive[order[k]] ? tp : fp)++;
        out.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
        out.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
        out.thresholds.push_back(scores[order[i]]);
        i = j + 1;
    }
    return out;
}

struct PrCurve {
    std::vector<double> recall, precision, thresholds;
};

inline PrCurve pr_curve(const std::vector<double>& scores, const std::vector<bool>& positive) {
    std::size_t n_pos = 0;
    for (bool p : positive)
        if (p) ++n_pos;
    if (n_pos == 0) throw std::invalid_argument("pr_curve: class has no positives");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    PrCurve out;
    std::size_t tp = 0, predicted = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            ++predicted;
            if (positive[order[k]]) ++tp;
        }
        out.recall.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
        out.precision.push_back(static_cast<double>(tp) / static_cast<double>(predicted));
        out.thresholds.push_back(scores[order[i]]);
        i = j + 1;
    }
    return out;
}

struct EvalReport {
    double accuracy = 0.0;
    PrfScores prf;
    double log_loss_value = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<RocCurve> roc;  // per class
    double macro_auc = 0.0;
    std::vector<bool> auc_defined;
    std::vector<PrCurve> pr;  // per class with >= 1 positive; empty otherwise
    std::vector<bool> pr_defined;
};

inline EvalReport evaluate_predictions(const FeatureMatrix& probs,
                                       const std::vector<int>& y_true) {
    if (probs.rows == 0) throw std::invalid_argument("evaluate: empty input");
    const std::size_t K = probs.cols;
    EvalReport rep;
    const auto y_pred = argmax_predictions(probs);
    rep.confusion = confusion_matrix(y_true, y_pred, K);
    rep.accuracy = accuracy_from_cm(rep.confusion);
    rep.prf = prf_scores(rep.confusion);
    rep.log_loss_value = log_loss(probs, y_true);

    rep.roc.resize(K);
    rep.auc_defined.resize(K, false);
    rep.pr.resize(K);
    rep.pr_defined.resize(K, false);
    double auc_sum = 0.0;
    std::size_t auc_n = 0;
    for (std::size_t c = 0; c < K; ++c) {
        std::vector<double> scores(probs.rows);
        std::vector<bool> pos(probs.rows);
        std::size_t n_pos = 0;
        for (std::size_t r = 0; r < probs.rows; ++r) {
            scores[r] = probs.at(r, c);
            pos[r] = (static_cast<std::size_t>(y_true[r]) == c);
            if (pos[r]) ++n_pos;
        }
        rep.roc[c] = roc_one_vs_rest(scores, pos);
        rep.auc_defined[c] = rep.roc[c].defined;
        if (rep.roc[c].defined) {
            auc_sum += rep.roc[c].auc;
            ++auc_n;
        }
        if (n_pos > 0) {
            rep.pr[c] = pr_curve(scores, pos);
            rep.pr_defined[c] = true;
        }
    }
    if (auc_n == 0) throw std::runtime_error("evaluate: AUC undefined for every class");
    rep.macro_auc = auc_sum / static_cast<double>(auc_n);
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < r.prf.precision.size(); ++c)
        per_class.push_back({{"class", c},
                             {"precision", r.prf.precision[c]},
                             {"recall", r.prf.recall[c]},
                             {"f1", r.prf.f1[c]},
                             {"support", r.prf.support[c]},
                             {"auc", r.auc_defined[c] ? nlohmann::json(r.roc[c].auc)
                                                      : nlohmann::json(nullptr)}});
    return {{"format", "mmfuse-report"},
            {"version", 1},
            {"accuracy", r.accuracy},
            {"log_loss", r.log_loss_value},
            {"macro_auc", r.macro_auc},
            {"weighted_precision", r.prf.weighted_precision},
            {"weighted_recall", r.prf.weighted_recall},
            {"weighted_f1", r.prf.weighted_f1},
            {"macro_precision", r.prf.macro_precision},
            {"macro_recall", r.prf.macro_recall},
            {"macro_f1", r.prf.macro_f1},
            {"per_class", per_class},
            {"confusion", r.confusion}};
}

}  // namespace mmfuse
