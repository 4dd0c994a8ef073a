#pragma once

#include <chrono>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/rng.hpp"
#include "mmfuse/neural/model.hpp"
#include "mmfuse/resample/resample.hpp"
#include "mmfuse/traineval/metrics.hpp"

namespace mmfuse {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    std::size_t early_stop_patience = 5;
    std::size_t plateau_patience = 3;
    double plateau_factor = 0.5;
    double min_lr = 1e-6;
    double improvement_threshold = 1e-4;
    std::uint64_t seed = 0;
    std::string checkpoint_path;  // written on every val-loss improvement when set
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
    std::size_t best_epoch = 0;  // 1-based
    double best_val_loss = 0.0;
    bool early_stopped = false;
};

// Early-stopping and plateau bookkeeping. Kept separate from the training
// loop so the rules can be driven with prescribed validation-loss sequences.
// Early stopping monitors val loss with an absolute improvement threshold;
// the plateau rule halves the learning rate after `plateau_patience` stagnant
// epochs with its own counter, reset on improvement or on reduction, never
// below min_lr.
struct CallbackController {
    double improvement_threshold;
    std::size_t early_stop_patience;
    std::size_t plateau_patience;
    double plateau_factor;
    double min_lr;

    double lr;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;  // 1-based
    std::size_t stop_counter = 0;
    std::size_t plateau_counter = 0;
    bool stop = false;

    explicit CallbackController(const TrainConfig& cfg)
        : improvement_threshold(cfg.improvement_threshold),
          early_stop_patience(cfg.early_stop_patience),
          plateau_patience(cfg.plateau_patience),
          plateau_factor(cfg.plateau_factor),
          min_lr(cfg.min_lr),
          lr(cfg.learning_rate) {}

    // Observe one epoch's validation loss; returns true on improvement.
    bool observe(std::size_t epoch, double val_loss) {
        const bool improved = val_loss < best_val - improvement_threshold;
        if (improved) {
            best_val = val_loss;
            best_epoch = epoch;
            stop_counter = 0;
            plateau_counter = 0;
        } else {
            ++stop_counter;
            ++plateau_counter;
            if (plateau_counter >= plateau_patience && lr > min_lr) {
                lr = std::max(lr * plateau_factor, min_lr);
                plateau_counter = 0;
            }
            if (stop_counter >= early_stop_patience) stop = true;
        }
        return improved;
    }
};

inline Batch make_batch(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
    Batch b;
    b.audio = take_rows(ds.audio, idx);
    b.video = take_rows(ds.video, idx);
    b.text = take_rows(ds.text, idx);
    b.labels.reserve(idx.size());
    for (std::size_t i : idx) b.labels.push_back(ds.labels[i]);
    return b;
}

inline FeatureMatrix predict_proba(FusionModel& m, const LabeledDataset& ds,
                                   const std::vector<std::size_t>& idx) {
    SeededRng unused(0);  // eval mode draws nothing
    const auto batch = make_batch(ds, idx);
    return forward(m, batch, Mode::kEval, unused).probs;
}

// Callback semantics: early stopping monitors val loss with an absolute
// improvement threshold and restores the best epoch's weights; the plateau
// rule halves the learning rate after `plateau_patience` stagnant epochs
// with its own counter, reset on improvement or reduction, never below
// min_lr.
inline TrainHistory train_loop(FusionModel& model, const LabeledDataset& ds,
                               const TrainConfig& cfg) {
    const auto train_idx = ds.indices_of(Split::kTrain);
    const auto val_idx = ds.indices_of(Split::kVal);
    if (train_idx.empty()) throw std::invalid_argument("train_loop: empty train split");
    if (val_idx.empty()) throw std::invalid_argument("train_loop: empty val split");

    SeededRng rng(cfg.seed);
    AdamState adam = AdamState::shaped(model, cfg.learning_rate);
    TrainHistory history;
    FusionModel best_model = model;
    CallbackController callbacks(cfg);

    std::vector<std::size_t> order(train_idx);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        adam.lr = callbacks.lr;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            const auto batch = make_batch(ds, idx);
            auto cache = forward(model, batch, Mode::kTrain, rng);
            auto grads = backward(model, batch, cache);
            adam_step(model, grads, adam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = callbacks.lr;
        {
            const auto probs = predict_proba(model, ds, train_idx);
            std::vector<int> y;
            for (std::size_t i : train_idx) y.push_back(ds.labels[i]);
            rec.train_loss = log_loss(probs, y);
            const auto pred = argmax_predictions(probs);
            std::size_t hit = 0;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (pred[i] == y[i]) ++hit;
            rec.train_acc = static_cast<double>(hit) / static_cast<double>(y.size());
        }
        {
            const auto probs = predict_proba(model, ds, val_idx);
            std::vector<int> y;
            for (std::size_t i : val_idx) y.push_back(ds.labels[i]);
            rec.val_loss = log_loss(probs, y);
            const auto pred = argmax_predictions(probs);
            std::size_t hit = 0;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (pred[i] == y[i]) ++hit;
            rec.val_acc = static_cast<double>(hit) / static_cast<double>(y.size());
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.records.push_back(rec);

        if (callbacks.observe(epoch, rec.val_loss)) {
            history.best_epoch = epoch;
            best_model = model;
            if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
        }
        if (callbacks.stop) {
            history.early_stopped = true;
            break;
        }
    }
    model = best_model;
    history.best_val_loss = callbacks.best_val;
    return history;
}

inline EvalReport evaluate(FusionModel& model, const LabeledDataset& ds, Split split) {
    const auto idx = ds.indices_of(split);
    if (idx.empty()) throw std::invalid_argument("evaluate: empty split");
    const auto probs = predict_proba(model, ds, idx);
    std::vector<int> y;
    for (std::size_t i : idx) y.push_back(ds.labels[i]);
    return evaluate_predictions(probs, y);
}

}  // namespace mmfuse
