#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/audio/features.hpp"
#include "mmfuse/audio/wav.hpp"
#include "mmfuse/cli/config.hpp"
#include "mmfuse/core/io.hpp"
#include "mmfuse/core/matrix.hpp"
#include "mmfuse/core/rng.hpp"
#include "mmfuse/gbdt/gbdt.hpp"
#include "mmfuse/neural/model.hpp"
#include "mmfuse/resample/resample.hpp"
#include "mmfuse/synth/synthgen.hpp"
#include "mmfuse/text/normalize.hpp"
#include "mmfuse/text/select.hpp"
#include "mmfuse/text/tfidf.hpp"
#include "mmfuse/traineval/export.hpp"
#include "mmfuse/traineval/train.hpp"
#include "mmfuse/video/video.hpp"

namespace mmfuse {

struct Corpus {
    std::vector<std::string> transcripts;
    std::vector<std::string> clip_paths;  // absolute or relative to data dir
    FeatureMatrix video_raw;              // NaN = missing
    std::vector<int> labels;
};

inline Corpus load_corpus(const std::string& data_dir) {
    Corpus corpus;
    {
        std::ifstream in(data_dir + "/transcripts.csv");
        if (!in) throw std::runtime_error("cannot open " + data_dir + "/transcripts.csv");
        std::string line;
        std::getline(in, line);
        const auto header = parse_csv_line(line);
        if (header.size() != 3 || header[1] != "text" || header[2] != "label")
            throw std::runtime_error("transcripts.csv: expected header id,text,label");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto f = parse_csv_line(line);
            if (f.size() != 3)
                throw std::runtime_error("transcripts.csv row " + std::to_string(line_no) +
                                         ": expected 3 fields");
            corpus.transcripts.push_back(f[1]);
            corpus.labels.push_back(std::stoi(f[2]));
        }
    }
    {
        std::ifstream in(data_dir + "/audio_manifest.csv");
        if (!in) throw std::runtime_error("cannot open " + data_dir + "/audio_manifest.csv");
        std::string line;
        std::getline(in, line);
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = parse_csv_line(line);
            if (f.size() != 2) throw std::runtime_error("audio_manifest.csv: expected 2 fields");
            corpus.clip_paths.push_back(data_dir + "/" + f[0]);
            if (row >= corpus.labels.size() || std::stoi(f[1]) != corpus.labels[row])
                throw std::runtime_error("audio_manifest.csv: label disagrees with transcripts.csv");
            ++row;
        }
    }
    {
        auto table = load_csv_table(data_dir + "/video.csv", "label");
        corpus.video_raw = std::move(table.matrix);
        if (!table.labels || *table.labels != corpus.labels)
            throw std::runtime_error("video.csv: labels disagree with transcripts.csv");
    }
    if (corpus.transcripts.size() != corpus.clip_paths.size() ||
        corpus.transcripts.size() != corpus.video_raw.rows)
        throw std::runtime_error("corpus: modality row counts disagree");
    return corpus;
}

namespace detail {

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

inline nlohmann::json zscore_to_json(const ZScoreStats& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

}  // namespace detail

inline GbdtConfig gbdt_config_from(const RunConfig& cfg, const std::string& section) {
    GbdtConfig g;
    g.n_rounds = cfg.get_size(section + ".gbdt_rounds", section == "audio" ? 15 : 15);
    g.max_depth = cfg.get_size(section + ".gbdt_depth", 3);
    g.learning_rate = cfg.get_double(section + ".gbdt_learning_rate", 0.3);
    g.l2_reg = cfg.get_double(section + ".gbdt_l2", 1.0);
    g.min_samples_leaf = cfg.get_size(section + ".gbdt_min_leaf", 5);
    return g;
}

// Transcripts -> normalized tokens -> TF-IDF -> LASSO -> RFE -> zero pad.
// Writes text_features.csv (selected) and text_features_plain.csv (full
// TF-IDF) plus fitted artifacts.
inline void featurize_text(const RunConfig& cfg, const Corpus& corpus,
                           const std::string& out_dir) {
    const auto norm_cfg = [&] {
        const auto sw = cfg.get_string("text.stopword_file");
        const auto lr = cfg.get_string("text.lemma_rule_file");
        if (sw.empty() && lr.empty()) return TextNormConfig::defaults();
        auto c = load_norm_config(sw, lr);
        if (sw.empty()) c.stopwords = TextNormConfig::defaults().stopwords;
        if (lr.empty()) {
            const auto d = TextNormConfig::defaults();
            c.suffix_rules = d.suffix_rules;
            c.exceptions = d.exceptions;
        }
        return c;
    }();

    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.transcripts.size());
    for (const auto& t : corpus.transcripts) docs.push_back(normalize_text(t, norm_cfg));

    const auto vocab = tfidf_fit(docs, cfg.get_size("text.max_vocab", 2000));
    const auto tfidf = tfidf_transform_all(docs, vocab);

    const double lambda = cfg.get_double("text.lasso_lambda", 0.01);
    const auto lasso = lasso_select(tfidf, corpus.labels, lambda,
                                    cfg.get_size("text.lasso_max_iter", 200));
    FeatureMatrix selected = lasso.indices.empty() ? tfidf : apply_mask(tfidf, lasso);
    if (lasso.indices.empty())
        std::fprintf(stderr, "warning: lasso selected no features; keeping all columns\n");

    const std::size_t keep =
        std::min(cfg.get_size("text.rfe_keep", 256), selected.cols);
    const auto rfe = rfe_select(selected, corpus.labels, keep,
                                cfg.get_double("text.rfe_step_fraction", 0.25));
    selected = apply_mask(selected, rfe);
    const std::size_t pad = std::max(cfg.get_size("text.pad_width", 512), selected.cols);
    selected = pad_columns(selected, pad);

    save_csv_table(selected, out_dir + "/text_features.csv", &corpus.labels);
    save_csv_table(tfidf, out_dir + "/text_features_plain.csv", &corpus.labels);
    detail::write_json(out_dir + "/text_vocab.json", vocabulary_to_json(vocab));
    detail::write_json(out_dir + "/text_selection.json",
                       {{"lasso", lasso.indices}, {"rfe", rfe.indices}, {"pad_width", pad}});
}

// WAV clips -> 77-wide acoustic vectors -> z-score -> GBDT leaf one-hots
// appended. Plain variant is the z-scored vector without leaf embeddings.
inline void featurize_audio(const RunConfig& cfg, const Corpus& corpus,
                            const std::string& out_dir) {
    FrameConfig fc;
    fc.frame_length = cfg.get_size("audio.frame_length", 1024);
    fc.hop_length = cfg.get_size("audio.hop_length", 512);

    FeatureMatrix X(corpus.clip_paths.size(), kAudioFeatureWidth);
    const auto names = audio_feature_names();
    for (std::size_t c = 0; c < names.size(); ++c) X.col_names[c] = names[c];
    for (std::size_t r = 0; r < corpus.clip_paths.size(); ++r) {
        const auto clip = read_wav(corpus.clip_paths[r]);
        const auto feats = extract_audio_features(clip, fc);
        std::copy(feats.begin(), feats.end(), X.row(r));
    }

    const auto stats = zscore_fit(X);
    const auto Xz = zscore_apply(X, stats);

    const auto gcfg = gbdt_config_from(cfg, "audio");
    const auto model = gbdt_fit(Xz, corpus.labels, gcfg);
    const auto enriched = concat_columns(Xz, gbdt_leaf_onehot(model, Xz));

    save_csv_table(enriched, out_dir + "/audio_features.csv", &corpus.labels);
    save_csv_table(Xz, out_dir + "/audio_features_plain.csv", &corpus.labels);
    detail::write_json(out_dir + "/audio_zscore.json", detail::zscore_to_json(stats));
    detail::write_json(out_dir + "/audio_gbdt.json", gbdt_to_json(model));
}

// Video table -> missing-value fill -> z-score -> GBDT softmax probabilities
// stacked. Plain variant is the z-scored table alone.
inline void featurize_video(const RunConfig& cfg, const Corpus& corpus,
                            const std::string& out_dir) {
    const auto mode = cfg.get_string("video.interpolation", "linear");
    FeatureMatrix filled;
    if (mode == "linear") filled = interpolate_missing(corpus.video_raw);
    else if (mode == "median") filled = median_fill_missing(corpus.video_raw);
    else throw std::runtime_error("video.interpolation must be linear or median");

    const auto stats = zscore_fit(filled);
    const auto Xz = zscore_apply(filled, stats);

    VideoStacker stacker;
    SeededRng rng(cfg.get_u64("run.seed", 0) ^ 0x76696465u);
    const auto stacked = stacker.fit_transform(Xz, corpus.labels,
                                               gbdt_config_from(cfg, "video"), rng,
                                               cfg.get_bool("video.out_of_fold", true));

    save_csv_table(stacked, out_dir + "/video_features.csv", &corpus.labels);
    save_csv_table(Xz, out_dir + "/video_features_plain.csv", &corpus.labels);
    detail::write_json(out_dir + "/video_zscore.json", detail::zscore_to_json(stats));
    detail::write_json(out_dir + "/video_gbdt.json", gbdt_to_json(stacker.model));
}

struct PreparedIndices {
    std::vector<std::size_t> train;  // post-oversample source rows, shuffled
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::vector<int> labels;  // per source row, after any remap
};

inline void write_index_csv(const std::string& path, const std::vector<std::size_t>& idx) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "source_row\n";
    for (std::size_t i : idx) out << i << '\n';
}

inline std::vector<std::size_t> read_index_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<std::size_t> idx;
    while (std::getline(in, line))
        if (!line.empty()) idx.push_back(std::stoull(line));
    return idx;
}

// Remap (optional), stratified split, train-only oversampling. The emitted
// tagged dataset is the labels file plus per-split source-row index files, so
// every feature variant can be assembled with the identical assignment.
inline PreparedIndices prepare_dataset(const RunConfig& cfg, const std::vector<int>& raw_labels,
                                       const std::string& out_dir) {
    PreparedIndices prep;
    prep.labels = cfg.get_bool("resample.apply_label_map", false)
                      ? remap_labels(raw_labels, cfg.label_map())
                      : raw_labels;

    LabeledDataset shell;  // labels only; matrices stay empty-width
    shell.labels = prep.labels;
    shell.text = FeatureMatrix(prep.labels.size(), 0);
    shell.audio = FeatureMatrix(prep.labels.size(), 0);
    shell.video = FeatureMatrix(prep.labels.size(), 0);

    SplitFractions fr;
    fr.train = cfg.get_double("resample.train_fraction", 0.8);
    fr.val = cfg.get_double("resample.val_fraction", 0.1);
    fr.test = cfg.get_double("resample.test_fraction", 0.1);
    SeededRng rng(cfg.get_u64("run.seed", 0) ^ 0x73706c69u);
    stratified_split(shell, fr, rng);

    prep.val = shell.indices_of(Split::kVal);
    prep.test = shell.indices_of(Split::kTest);
    auto train_idx = shell.indices_of(Split::kTrain);

    if (cfg.get_bool("resample.oversample", false)) {
        const auto targets = cfg.target_counts();
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i : train_idx) by_class[prep.labels[i]].push_back(i);
        for (const auto& [cls, idx] : by_class)
            if (!targets.count(cls))
                throw std::runtime_error("oversample: class " + std::to_string(cls) +
                                         " missing from target counts");
        for (const auto& [cls, idx] : by_class) {
            const std::size_t target = targets.at(cls);
            for (std::size_t k = idx.size(); k < target; ++k)
                train_idx.push_back(idx[static_cast<std::size_t>(rng.below(idx.size()))]);
        }
        rng.shuffle(train_idx);
    }
    prep.train = std::move(train_idx);

    std::filesystem::create_directories(out_dir + "/prepared");
    {
        std::ofstream out(out_dir + "/prepared/labels.csv");
        out << "source_row,label,split\n";
        for (std::size_t i = 0; i < prep.labels.size(); ++i) {
            const char* tag = shell.split_tag[i] == Split::kTrain ? "train"
                              : shell.split_tag[i] == Split::kVal ? "val"
                                                                  : "test";
            out << i << ',' << prep.labels[i] << ',' << tag << '\n';
        }
    }
    write_index_csv(out_dir + "/prepared/train_indices.csv", prep.train);
    write_index_csv(out_dir + "/prepared/val_indices.csv", prep.val);
    write_index_csv(out_dir + "/prepared/test_indices.csv", prep.test);
    return prep;
}

inline PreparedIndices load_prepared(const std::string& out_dir) {
    PreparedIndices prep;
    prep.train = read_index_csv(out_dir + "/prepared/train_indices.csv");
    prep.val = read_index_csv(out_dir + "/prepared/val_indices.csv");
    prep.test = read_index_csv(out_dir + "/prepared/test_indices.csv");
    std::ifstream in(out_dir + "/prepared/labels.csv");
    if (!in) throw std::runtime_error("cannot open prepared labels");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = parse_csv_line(line);
        prep.labels.push_back(std::stoi(f[1]));
    }
    return prep;
}

enum class BaselineKind { kFused, kText, kAudio, kVideo, kEarly, kLateSimple };

inline BaselineKind baseline_from_string(const std::string& s) {
    if (s == "fused") return BaselineKind::kFused;
    if (s == "text") return BaselineKind::kText;
    if (s == "audio") return BaselineKind::kAudio;
    if (s == "video") return BaselineKind::kVideo;
    if (s == "early") return BaselineKind::kEarly;
    if (s == "late-simple") return BaselineKind::kLateSimple;
    throw std::runtime_error("unknown baseline '" + s +
                             "' (expected text|audio|video|early|late-simple|fused)");
}

// Assemble the modality views for a run variant from featurize outputs, in
// fixed [audio, video, text] wiring. Unused modalities get zero-width
// matrices and empty encoders.
inline LabeledDataset assemble_dataset(const std::string& out_dir, BaselineKind kind,
                                       const PreparedIndices& prep) {
    auto load = [&](const std::string& name) {
        return load_csv_table(out_dir + "/" + name, "label").matrix;
    };
    const std::size_t n = prep.labels.size();
    FeatureMatrix text, audio, video;
    switch (kind) {
        case BaselineKind::kFused:
            text = load("text_features.csv");
            audio = load("audio_features.csv");
            video = load("video_features.csv");
            break;
        case BaselineKind::kText:
            text = load("text_features.csv");
            break;
        case BaselineKind::kAudio:
            audio = load("audio_features.csv");
            break;
        case BaselineKind::kVideo:
            video = load("video_features.csv");
            break;
        case BaselineKind::kEarly: {
            // raw (un-enriched) modality features concatenated into one network
            auto all = concat_columns(
                concat_columns(load("audio_features_plain.csv"), load("video_features_plain.csv")),
                load("text_features_plain.csv"));
            text = std::move(all);
            break;
        }
        case BaselineKind::kLateSimple:
            text = load("text_features_plain.csv");
            audio = load("audio_features_plain.csv");
            video = load("video_features_plain.csv");
            break;
    }
    if (text.rows == 0) text = FeatureMatrix(n, 0);
    if (audio.rows == 0) audio = FeatureMatrix(n, 0);
    if (video.rows == 0) video = FeatureMatrix(n, 0);
    if (text.rows != n || audio.rows != n || video.rows != n)
        throw std::runtime_error("assemble_dataset: feature files disagree with prepared labels");

    LabeledDataset ds;
    ds.text = std::move(text);
    ds.audio = std::move(audio);
    ds.video = std::move(video);
    ds.labels = prep.labels;
    // split tags from prepared indices; oversampled train handled by take()
    ds.split_tag.assign(n, Split::kTrain);
    for (std::size_t i : prep.val) ds.split_tag[i] = Split::kVal;
    for (std::size_t i : prep.test) ds.split_tag[i] = Split::kTest;

    // materialize the oversampled training rows: final order = train indices,
    // then val, then test
    std::vector<std::size_t> order(prep.train);
    order.insert(order.end(), prep.val.begin(), prep.val.end());
    order.insert(order.end(), prep.test.begin(), prep.test.end());
    LabeledDataset out = ds.take(order);
    out.split_tag.assign(order.size(), Split::kTrain);
    for (std::size_t i = prep.train.size(); i < prep.train.size() + prep.val.size(); ++i)
        out.split_tag[i] = Split::kVal;
    for (std::size_t i = prep.train.size() + prep.val.size(); i < order.size(); ++i)
        out.split_tag[i] = Split::kTest;
    return out;
}

inline FusionSpec spec_for(const RunConfig& cfg, BaselineKind kind, const LabeledDataset& ds) {
    const auto K = cfg.get_size("model.n_classes", 6);
    FusionSpec spec = FusionSpec::defaults(ds.audio.cols, ds.video.cols, ds.text.cols,
                                           cfg.get_bool("model.project_video", false), K);
    switch (kind) {
        case BaselineKind::kFused:
        case BaselineKind::kLateSimple:
            break;
        case BaselineKind::kText:
        case BaselineKind::kEarly:
            spec.audio.layers.clear();
            spec.video.layers.clear();
            break;
        case BaselineKind::kAudio:
            spec.text.layers.clear();
            spec.video.layers.clear();
            break;
        case BaselineKind::kVideo:
            spec.text.layers.clear();
            spec.audio.layers.clear();
            break;
    }
    return spec;
}

inline TrainConfig train_config_from(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_size("train.epochs", 50);
    t.batch_size = cfg.get_size("train.batch_size", 64);
    t.learning_rate = cfg.get_double("train.learning_rate", 0.001);
    t.early_stop_patience = cfg.get_size("train.early_stop_patience", 5);
    t.plateau_patience = cfg.get_size("train.plateau_patience", 3);
    t.plateau_factor = cfg.get_double("train.plateau_factor", 0.5);
    t.min_lr = cfg.get_double("train.min_lr", 1e-6);
    t.seed = cfg.get_u64("run.seed", 0);
    return t;
}

struct RunResult {
    TrainHistory history;
    EvalReport report;
};

// Train the selected variant on the prepared dataset and evaluate on test;
// writes ckpt_best.bin, history/report files, curve CSVs and SVGs, and a
// resolved-config copy into out_dir.
inline RunResult run_training(const RunConfig& cfg, BaselineKind kind,
                              const std::string& out_dir) {
    const auto prep = load_prepared(out_dir);
    const auto ds = assemble_dataset(out_dir, kind, prep);
    const auto spec = spec_for(cfg, kind, ds);

    SeededRng init_rng(cfg.get_u64("run.seed", 0) ^ 0x696e6974u);
    FusionModel model = init_model(spec, init_rng);
    TrainConfig tc = train_config_from(cfg);
    tc.checkpoint_path = out_dir + "/ckpt_best.bin";

    RunResult res;
    res.history = train_loop(model, ds, tc);
    // wall-clock epoch timing is not reproducible; zero it so every exported
    // artifact is byte-stable for identical config + seed
    for (auto& r : res.history.records) r.seconds = 0.0;
    save_checkpoint(model, tc.checkpoint_path);  // best weights, final state
    res.report = evaluate(model, ds, Split::kTest);
    export_history(res.history, res.report, out_dir);
    detail::write_json(out_dir + "/report.json", report_to_json(res.report));
    write_text_file(out_dir + "/resolved_config.txt",
                    cfg.to_string() + "baseline = " +
                        (kind == BaselineKind::kFused ? "fused" : "variant") + "\n");
    return res;
}

inline EvalReport run_evaluate(const RunConfig& cfg, BaselineKind kind,
                               const std::string& out_dir, const std::string& checkpoint) {
    const auto prep = load_prepared(out_dir);
    const auto ds = assemble_dataset(out_dir, kind, prep);
    const auto spec = spec_for(cfg, kind, ds);
    FusionModel model = FusionModel::shaped(spec);
    load_checkpoint(model, checkpoint);
    auto report = evaluate(model, ds, Split::kTest);
    detail::write_json(out_dir + "/report.json", report_to_json(report));
    return report;
}

}  // namespace mmfuse
