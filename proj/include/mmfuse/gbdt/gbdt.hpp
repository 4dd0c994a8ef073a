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
#include "mmfuse/core/rng.hpp"

namespace mmfuse {

struct GbdtConfig {
    std::size_t n_rounds = 50;
    std::size_t max_depth = 4;
    double learning_rate = 0.3;
    double l2_reg = 1.0;
    std::size_t min_samples_leaf = 5;
};

// Flat tree storage. Splits send x[feature] < threshold left, >= right.
// Leaf ids are dense in [0, n_leaves) in left-to-right order.
struct GbdtTree {
    struct Node {
        bool is_leaf = true;
        std::size_t feature = 0;
        double threshold = 0.0;
        std::ptrdiff_t left = -1;
        std::ptrdiff_t right = -1;
        double value = 0.0;      // leaf only
        std::size_t leaf_id = 0; // leaf only
    };
    std::vector<Node> nodes;  // nodes[0] is the root
    std::size_t n_leaves = 0;

    std::size_t descend(const double* x) const {
        std::size_t i = 0;
        while (!nodes[i].is_leaf)
            i = static_cast<std::size_t>(x[nodes[i].feature] < nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        return i;
    }
};

struct GbdtModel {
    std::vector<GbdtTree> trees;  // (round, class) order: round r, class c at r*K + c
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<double> base_score;  // per-class initial logit
    GbdtConfig config;

    bool fitted() const { return n_classes >= 2; }
};

namespace detail {

struct SplitResult {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

// Exact greedy split over sorted unique values; ties broken by lowest
// feature index, then lowest threshold.
inline SplitResult best_split(const FeatureMatrix& X, const std::vector<std::size_t>& idx,
                              const std::vector<double>& grad, const std::vector<double>& hess,
                              const GbdtConfig& cfg) {
    SplitResult best;
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i : idx) {
        g_total += grad[i];
        h_total += hess[i];
    }
    const double parent = leaf_objective(g_total, h_total, cfg.l2_reg);

    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < X.cols; ++f) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return X.at(a, f) < X.at(b, f);
        });
        double g_left = 0.0, h_left = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            g_left += grad[order[k]];
            h_left += hess[order[k]];
            const double lo = X.at(order[k], f);
            const double hi = X.at(order[k + 1], f);
            if (lo == hi) continue;
            if (k + 1 < cfg.min_samples_leaf || order.size() - k - 1 < cfg.min_samples_leaf)
                continue;
            const double threshold = lo + (hi - lo) / 2.0;
            const double gain = 0.5 * (leaf_objective(g_left, h_left, cfg.l2_reg) +
                                       leaf_objective(g_total - g_left, h_total - h_left, cfg.l2_reg) -
                                       parent);
            const bool better =
                gain > best.gain ||
                (gain == best.gain && best.found &&
                 (f < best.feature || (f == best.feature && threshold < best.threshold)));
            if (gain > 0.0 && (!best.found || better)) {
                best.found = true;
                best.feature = f;
                best.threshold = threshold;
                best.gain = gain;
            }
        }
    }
    return best;
}

inline std::ptrdiff_t build_node(GbdtTree& tree, const FeatureMatrix& X,
                                 std::vector<std::size_t>& idx, const std::vector<double>& grad,
                                 const std::vector<double>& hess, const GbdtConfig& cfg,
                                 std::size_t depth) {
    double g = 0.0, h = 0.0;
    for (std::size_t i : idx) {
        g += grad[i];
        h += hess[i];
    }
    SplitResult split;
    if (depth < cfg.max_depth && idx.size() >= 2 * cfg.min_samples_leaf)
        split = best_split(X, idx, grad, hess, cfg);

    const auto node_index = static_cast<std::ptrdiff_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (!split.found) {
        tree.nodes[static_cast<std::size_t>(node_index)].value = -g / (h + cfg.l2_reg);
        return node_index;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
        if (X.at(i, split.feature) < split.threshold) left.push_back(i);
        else right.push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const auto l = build_node(tree, X, left, grad, hess, cfg, depth + 1);
    const auto r = build_node(tree, X, right, grad, hess, cfg, depth + 1);
    auto& n = tree.nodes[static_cast<std::size_t>(node_index)];
    n.is_leaf = false;
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l;
    n.right = r;
    return node_index;
}

inline void assign_leaf_ids(GbdtTree& tree, std::size_t node, std::size_t& next) {
    auto& n = tree.nodes[node];
    if (n.is_leaf) {
        n.leaf_id = next++;
        return;
    }
    assign_leaf_ids(tree, static_cast<std::size_t>(n.left), next);
    assign_leaf_ids(tree, static_cast<std::size_t>(n.right), next);
}

inline void softmax_rows(std::vector<double>& logits, std::size_t rows, std::size_t K) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = logits.data() + r * K;
        double mx = p[0];
        for (std::size_t c = 1; c < K; ++c) mx = std::max(mx, p[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            p[c] = std::exp(p[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < K; ++c) p[c] /= sum;
    }
}

}  // namespace detail

// Multiclass softmax boosting: per round and class, second-order gradient
// tree on g_i = p_i - 1{y_i = c}, h_i = p_i (1 - p_i); leaf value -G/(H+l2);
// tree output scaled by the learning rate into the class logit.
inline GbdtModel gbdt_fit(const FeatureMatrix& X, const std::vector<int>& y,
                          const GbdtConfig& cfg) {
    if (X.rows != y.size()) throw std::invalid_argument("gbdt_fit: row/label mismatch");
    if (!X.all_finite()) throw std::invalid_argument("gbdt_fit: non-finite features");
    std::size_t K = 0;
    for (int v : y) {
        if (v < 0) throw std::invalid_argument("gbdt_fit: negative label");
        K = std::max(K, static_cast<std::size_t>(v) + 1);
    }
    if (K < 2) throw std::invalid_argument("gbdt_fit: need at least 2 classes");

    GbdtModel model;
    model.n_classes = K;
    model.n_features = X.cols;
    model.base_score.assign(K, 0.0);
    model.config = cfg;
    model.trees.reserve(cfg.n_rounds * K);

    const std::size_t n = X.rows;
    std::vector<double> logits(n * K, 0.0);
    std::vector<double> proba(n * K);
    std::vector<double> grad(n), hess(n);

    for (std::size_t round = 0; round < cfg.n_rounds; ++round) {
        proba = logits;
        detail::softmax_rows(proba, n, K);
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = proba[i * K + c];
                grad[i] = p - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
                hess[i] = p * (1.0 - p);
            }
            GbdtTree tree;
            std::vector<std::size_t> all(n);
            for (std::size_t i = 0; i < n; ++i) all[i] = i;
            detail::build_node(tree, X, all, grad, hess, cfg, 0);
            std::size_t next_leaf = 0;
            detail::assign_leaf_ids(tree, 0, next_leaf);
            tree.n_leaves = next_leaf;
            for (std::size_t i = 0; i < n; ++i)
                logits[i * K + c] += cfg.learning_rate * tree.nodes[tree.descend(X.row(i))].value;
            model.trees.push_back(std::move(tree));
        }
    }
    return model;
}

inline std::vector<double> gbdt_raw_logits(const GbdtModel& m, const FeatureMatrix& X) {
    if (!m.fitted()) throw std::runtime_error("gbdt: model not fitted");
    if (X.cols != m.n_features) throw std::invalid_argument("gbdt: feature width mismatch");
    const std::size_t K = m.n_classes;
    std::vector<double> logits(X.rows * K);
    for (std::size_t r = 0; r < X.rows; ++r)
        for (std::size_t c = 0; c < K; ++c) logits[r * K + c] = m.base_score[c];
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        const std::size_t c = t % K;
        const auto& tree = m.trees[t];
        for (std::size_t r = 0; r < X.rows; ++r)
            logits[r * K + c] += m.config.learning_rate * tree.nodes[tree.descend(X.row(r))].value;
    }
    return logits;
}

inline FeatureMatrix gbdt_predict_proba(const GbdtModel& m, const FeatureMatrix& X) {
    auto logits = gbdt_raw_logits(m, X);
    detail::softmax_rows(logits, X.rows, m.n_classes);
    FeatureMatrix out(X.rows, m.n_classes);
    for (std::size_t c = 0; c < m.n_classes; ++c)
        out.col_names[c] = "gbdt_proba_" + std::to_string(c);
    out.values = std::move(logits);
    return out;
}

// Per row, the leaf id reached in every tree, in fixed (round, class) order.
inline std::vector<std::vector<std::size_t>> gbdt_leaf_indices(const GbdtModel& m,
                                                               const FeatureMatrix& X) {
    if (!m.fitted()) throw std::runtime_error("gbdt: model not fitted");
    if (X.cols != m.n_features) throw std::invalid_argument("gbdt: feature width mismatch");
    std::vector<std::vector<std::size_t>> out(X.rows, std::vector<std::size_t>(m.trees.size()));
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        const auto& tree = m.trees[t];
        for (std::size_t r = 0; r < X.rows; ++r)
            out[r][t] = tree.nodes[tree.descend(X.row(r))].leaf_id;
    }
    return out;
}

// One-hot leaf encoding: width = sum of per-tree leaf counts, exactly one 1
// per tree per row.
inline FeatureMatrix gbdt_leaf_onehot(const GbdtModel& m, const FeatureMatrix& X) {
    const auto indices = gbdt_leaf_indices(m, X);
    std::size_t width = 0;
    std::vector<std::size_t> offsets(m.trees.size());
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        offsets[t] = width;
        width += m.trees[t].n_leaves;
    }
    FeatureMatrix out(X.rows, width);
    for (std::size_t t = 0; t < m.trees.size(); ++t)
        for (std::size_t l = 0; l < m.trees[t].n_leaves; ++l)
            out.col_names[offsets[t] + l] =
                "leaf_t" + std::to_string(t) + "_l" + std::to_string(l);
    for (std::size_t r = 0; r < X.rows; ++r)
        for (std::size_t t = 0; t < m.trees.size(); ++t)
            out.at(r, offsets[t] + indices[r][t]) = 1.0;
    return out;
}

inline double gbdt_train_loss(const GbdtModel& m, const FeatureMatrix& X,
                              const std::vector<int>& y) {
    const auto proba = gbdt_predict_proba(m, X);
    double loss = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r)
        loss -= std::log(std::max(proba.at(r, static_cast<std::size_t>(y[r])), 1e-12));
    return loss / static_cast<double>(X.rows);
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json gbdt_tree_to_json(const GbdtTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
        if (n.is_leaf)
            nodes.push_back({{"leaf", true}, {"value", n.value}, {"leaf_id", n.leaf_id}});
        else
            nodes.push_back({{"leaf", false}, {"feature", n.feature}, {"threshold", n.threshold},
                             {"left", n.left}, {"right", n.right}});
    }
    return {{"n_leaves", t.n_leaves}, {"nodes", nodes}};
}

inline nlohmann::json gbdt_to_json(const GbdtModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) trees.push_back(gbdt_tree_to_json(t));
    return {{"format", "mmfuse-gbdt"},
            {"version", 1},
            {"n_classes", m.n_classes},
            {"n_features", m.n_features},
            {"base_score", m.base_score},
            {"config",
             {{"n_rounds", m.config.n_rounds},
              {"max_depth", m.config.max_depth},
              {"learning_rate", m.config.learning_rate},
              {"l2_reg", m.config.l2_reg},
              {"min_samples_leaf", m.config.min_samples_leaf}}},
            {"trees", trees}};
}

inline GbdtModel gbdt_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mmfuse-gbdt" || j.value("version", 0) != 1)
        throw std::runtime_error("gbdt: unrecognized model document");
    GbdtModel m;
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.base_score = j.at("base_score").get<std::vector<double>>();
    const auto& c = j.at("config");
    m.config.n_rounds = c.at("n_rounds").get<std::size_t>();
    m.config.max_depth = c.at("max_depth").get<std::size_t>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.l2_reg = c.at("l2_reg").get<double>();
    m.config.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
    for (const auto& tj : j.at("trees")) {
        GbdtTree t;
        t.n_leaves = tj.at("n_leaves").get<std::size_t>();
        for (const auto& nj : tj.at("nodes")) {
            GbdtTree::Node n;
            n.is_leaf = nj.at("leaf").get<bool>();
            if (n.is_leaf) {
                n.value = nj.at("value").get<double>();
                n.leaf_id = nj.at("leaf_id").get<std::size_t>();
            } else {
                n.feature = nj.at("feature").get<std::size_t>();
                n.threshold = nj.at("threshold").get<double>();
                n.left = nj.at("left").get<std::ptrdiff_t>();
                n.right = nj.at("right").get<std::ptrdiff_t>();
            }
            t.nodes.push_back(n);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace mmfuse
