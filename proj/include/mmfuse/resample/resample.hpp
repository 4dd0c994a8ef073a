#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/matrix.hpp"
#include "mmfuse/core/rng.hpp"

namespace mmfuse {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

// Three aligned modality views plus labels; split_tag is populated by
// stratified_split.
struct LabeledDataset {
    FeatureMatrix text;
    FeatureMatrix audio;
    FeatureMatrix video;
    std::vector<int> labels;
    std::vector<Split> split_tag;  // empty until split

    std::size_t rows() const { return labels.size(); }

    void check_aligned() const {
        if (text.rows != labels.size() || audio.rows != labels.size() ||
            video.rows != labels.size())
            throw std::invalid_argument("LabeledDataset: modality row counts disagree");
    }

    std::vector<std::size_t> indices_of(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < split_tag.size(); ++i)
            if (split_tag[i] == s) out.push_back(i);
        return out;
    }

    LabeledDataset take(const std::vector<std::size_t>& idx) const {
        LabeledDataset out;
        out.text = take_rows(text, idx);
        out.audio = take_rows(audio, idx);
        out.video = take_rows(video, idx);
        out.labels.reserve(idx.size());
        for (std::size_t i : idx) out.labels.push_back(labels[i]);
        if (!split_tag.empty())
            for (std::size_t i : idx) out.split_tag.push_back(split_tag[i]);
        return out;
    }
};

using LabelMap = std::map<int, int>;
using TargetCounts = std::map<int, std::size_t>;

inline LabelMap default_label_map() {
    return {{0, 0}, {1, 1}, {2, 1}, {3, 2}, {4, 2}, {5, 3}, {6, 4}, {7, 5}};
}

inline TargetCounts default_target_counts() {
    return {{0, 2933}, {1, 2933}, {2, 5000}, {3, 2933}, {4, 2933}, {5, 4000}};
}

inline std::vector<int> remap_labels(const std::vector<int>& y, const LabelMap& m) {
    std::vector<int> out;
    out.reserve(y.size());
    for (int v : y) {
        const auto it = m.find(v);
        if (it == m.end())
            throw std::invalid_argument("remap_labels: label " + std::to_string(v) +
                                        " not in map");
        out.push_back(it->second);
    }
    return out;
}

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Per class: shuffle, then assign round(fraction * class size) rows to val
// and test, remainder to train.
inline void stratified_split(LabeledDataset& ds, const SplitFractions& f, SeededRng& rng) {
    if (std::fabs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw std::invalid_argument("stratified_split: fractions must sum to 1");
    ds.check_aligned();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);
    ds.split_tag.assign(ds.labels.size(), Split::kTrain);
    for (auto& [cls, idx] : by_class) {
        if (idx.size() < 3)
            throw std::invalid_argument("stratified_split: class " + std::to_string(cls) +
                                        " has fewer than 3 samples");
        rng.shuffle(idx);
        const auto n = static_cast<double>(idx.size());
        const auto n_val = static_cast<std::size_t>(std::llround(f.val * n));
        const auto n_test = static_cast<std::size_t>(std::llround(f.test * n));
        std::size_t k = 0;
        for (; k < n_val; ++k) ds.split_tag[idx[k]] = Split::kVal;
        for (; k < n_val + n_test; ++k) ds.split_tag[idx[k]] = Split::kTest;
        // remainder stays train
    }
}

// Expand deficient classes of a train split to their target counts by uniform
// sampling with replacement; classes at or above target are untouched. All
// three modality views and the label are duplicated together. Output order is
// a seeded shuffle of original + appended rows.
inline LabeledDataset oversample_to_targets(const LabeledDataset& train,
                                            const TargetCounts& targets, SeededRng& rng) {
    train.check_aligned();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.labels.size(); ++i)
        by_class[train.labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (!targets.count(cls))
            throw std::invalid_argument("oversample_to_targets: class " + std::to_string(cls) +
                                        " missing from target counts");
    std::vector<std::size_t> out_idx;
    for (std::size_t i = 0; i < train.labels.size(); ++i) out_idx.push_back(i);
    for (const auto& [cls, idx] : by_class) {
        const std::size_t target = targets.at(cls);
        for (std::size_t k = idx.size(); k < target; ++k)
            out_idx.push_back(idx[static_cast<std::size_t>(rng.below(idx.size()))]);
    }
    rng.shuffle(out_idx);
    return train.take(out_idx);
}

}  // namespace mmfuse
