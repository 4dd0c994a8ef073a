#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

struct Vocabulary {
    std::unordered_map<std::string, std::size_t> index;  // term -> column
    std::vector<std::string> terms;                      // column -> term
    std::vector<std::size_t> df;                         // per column
    std::size_t n_docs = 0;

    std::size_t size() const { return terms.size(); }
};

// Vocabulary = top max_vocab terms by collection frequency, ties broken
// lexicographically; column order follows that ranking.
inline Vocabulary tfidf_fit(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t max_vocab) {
    if (corpus.empty()) throw std::invalid_argument("tfidf_fit: empty corpus");
    std::map<std::string, std::size_t> cf;  // collection frequency
    std::map<std::string, std::size_t> df;
    for (const auto& doc : corpus) {
        std::map<std::string, std::size_t> seen;
        for (const auto& tok : doc) {
            ++cf[tok];
            ++seen[tok];
        }
        for (const auto& [tok, _] : seen) ++df[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(cf.begin(), cf.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_vocab) ranked.resize(max_vocab);

    Vocabulary v;
    v.n_docs = corpus.size();
    for (const auto& [term, _] : ranked) {
        v.index[term] = v.terms.size();
        v.terms.push_back(term);
        v.df.push_back(df[term]);
    }
    return v;
}

// weight(t) = tf(t) * (ln((1+N)/(1+df(t))) + 1), then L2 row normalization.
// Out-of-vocabulary tokens are ignored; all-zero rows stay zero.
inline std::vector<double> tfidf_transform(const std::vector<std::string>& doc,
                                           const Vocabulary& v) {
    std::vector<double> row(v.size(), 0.0);
    for (const auto& tok : doc) {
        const auto it = v.index.find(tok);
        if (it != v.index.end()) row[it->second] += 1.0;
    }
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
        if (row[c] == 0.0) continue;
        const double idf =
            std::log((1.0 + static_cast<double>(v.n_docs)) / (1.0 + static_cast<double>(v.df[c]))) + 1.0;
        row[c] *= idf;
        norm_sq += row[c] * row[c];
    }
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : row) x *= inv;
    }
    return row;
}

inline FeatureMatrix tfidf_transform_all(const std::vector<std::vector<std::string>>& docs,
                                         const Vocabulary& v) {
    FeatureMatrix out(docs.size(), v.size());
    for (std::size_t c = 0; c < v.size(); ++c) out.col_names[c] = "tfidf_" + v.terms[c];
    for (std::size_t r = 0; r < docs.size(); ++r) {
        const auto row = tfidf_transform(docs[r], v);
        std::copy(row.begin(), row.end(), out.row(r));
    }
    return out;
}

inline nlohmann::json vocabulary_to_json(const Vocabulary& v) {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t c = 0; c < v.size(); ++c)
        terms.push_back({{"term", v.terms[c]}, {"index", c}, {"df", v.df[c]}});
    return {{"n_docs", v.n_docs}, {"terms", terms}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
    Vocabulary v;
    v.n_docs = j.at("n_docs").get<std::size_t>();
    for (const auto& t : j.at("terms")) {
        const auto term = t.at("term").get<std::string>();
        const auto idx = t.at("index").get<std::size_t>();
        if (idx != v.terms.size()) throw std::runtime_error("vocabulary: non-dense indices");
        v.index[term] = idx;
        v.terms.push_back(term);
        v.df.push_back(t.at("df").get<std::size_t>());
    }
    return v;
}

}  // namespace mmfuse
