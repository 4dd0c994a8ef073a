// mmfuse: multimodal sentiment classification toolkit CLI.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmfuse/cli/pipeline.hpp"

namespace {

using namespace mmfuse;

SynthSpec synth_spec_from(const RunConfig& cfg) {
    SynthSpec spec;
    spec.n_classes = cfg.get_size("synth.classes", 6);
    spec.class_counts.assign(spec.n_classes, cfg.get_size("synth.per_class", 600));
    spec.separation = cfg.get_double("synth.separation", 3.0);
    spec.theme_words = cfg.get_size("synth.theme_words", 8);
    spec.filler_words = cfg.get_size("synth.filler_words", 20);
    spec.sample_rate = cfg.get_double("synth.sample_rate", 16000.0);
    spec.clip_seconds = cfg.get_double("synth.clip_seconds", 1.0);
    spec.noise_sigma = cfg.get_double("synth.noise_sigma", 0.05);
    spec.video_dim = cfg.get_size("synth.video_dim", 16);
    spec.missing_rate = cfg.get_double("synth.missing_rate", 0.05);
    spec.seed = cfg.get_u64("synth.seed", cfg.get_u64("run.seed", 0));
    return spec;
}

void cmd_compare(const std::vector<std::string>& run_dirs) {
    std::printf("| run | accuracy | weighted F1 | macro AUC |\n");
    std::printf("|-----|----------|-------------|-----------|\n");
    for (const auto& dir : run_dirs) {
        const auto j = detail::read_json(dir + "/report.json");
        std::printf("| %s | %.4f | %.4f | %.4f |\n", dir.c_str(),
                    j.at("accuracy").get<double>(), j.at("weighted_f1").get<double>(),
                    j.at("macro_auc").get<double>());
    }
}

const char* kConfigKeyHelp = R"(Config file keys (flat "section.key = value" lines, '#' comments):
  run.seed                  master RNG seed (default 0)
  run.out_dir               run output directory (required unless --out given)
  data.dir                  corpus directory with transcripts.csv, audio_manifest.csv, video.csv
  text.max_vocab            TF-IDF vocabulary cap (default 2000)
  text.lasso_lambda         L1 strength for LASSO selection (default 0.01)
  text.lasso_max_iter       coordinate-descent iteration cap (default 200)
  text.rfe_keep             features kept by recursive elimination (default 256)
  text.rfe_step_fraction    fraction dropped per RFE round (default 0.25)
  text.pad_width            zero-pad selected features to this width (default 512)
  text.stopword_file        stopword list path (default: built-in list)
  text.lemma_rule_file      suffix-rule lemmatizer path (default: built-in rules)
  audio.frame_length        STFT frame length in samples (default 1024)
  audio.hop_length          STFT hop in samples (default 512)
  audio.gbdt_rounds         boosting rounds for leaf embeddings (default 15)
  audio.gbdt_depth          tree depth (default 3)
  audio.gbdt_learning_rate  shrinkage (default 0.3)
  audio.gbdt_l2             leaf L2 regularization (default 1.0)
  audio.gbdt_min_leaf       min samples per leaf (default 5)
  video.gbdt_rounds         boosting rounds for probability stacking (default 15)
  video.gbdt_depth          tree depth (default 3)
  video.gbdt_learning_rate  shrinkage (default 0.3)
  video.gbdt_l2             leaf L2 regularization (default 1.0)
  video.gbdt_min_leaf       min samples per leaf (default 5)
  video.out_of_fold         out-of-fold stacking on the train rows (default true)
  video.interpolation       missing-value fill: linear | median (default linear)
  resample.apply_label_map  collapse raw labels through the label map (default false)
  resample.label_map        "raw:coarse,..." (default 0:0,1:1,2:1,3:2,4:2,5:3,6:4,7:5)
  resample.train_fraction   stratified split fraction (default 0.8)
  resample.val_fraction     stratified split fraction (default 0.1)
  resample.test_fraction    stratified split fraction (default 0.1)
  resample.oversample       oversample deficient train classes (default false)
  resample.target_counts    "class:count,..." (default 0:2933,1:2933,2:5000,3:2933,4:2933,5:4000)
  model.project_video       linear projection on the video encoder input (default false)
  model.n_classes           output classes (default 6)
  train.epochs              epoch cap (default 50)
  train.batch_size          minibatch size (default 64)
  train.learning_rate       Adam learning rate (default 0.001)
  train.early_stop_patience epochs without val-loss improvement before stopping (default 5)
  train.plateau_patience    stagnant epochs before halving the lr (default 3)
  train.plateau_factor      lr multiplier on plateau (default 0.5)
  train.min_lr              lr floor (default 1e-6)
  synth.classes             synthetic corpus classes (default 6)
  synth.per_class           samples per class (default 600)
  synth.separation          video offset scale (default 3.0)
  synth.theme_words         per-class theme vocabulary size (default 8)
  synth.filler_words        shared filler vocabulary size (default 20)
  synth.sample_rate         clip sample rate in Hz (default 16000)
  synth.clip_seconds        clip duration (default 1.0)
  synth.noise_sigma         Gaussian noise level (default 0.05)
  synth.video_dim           video feature dimension (default 16)
  synth.missing_rate        probability a video cell is missing (default 0.05)
  synth.seed                generator seed (default: run.seed)
)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mmfuse: multimodal sentiment classification toolkit"};
    app.require_subcommand(1);
    app.footer(kConfigKeyHelp);

    std::string config_path, out_override, spec_path, out_dir_arg, checkpoint, which = "fused",
                modality;
    std::vector<std::string> run_dirs;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic multimodal corpus");
    synth->add_option("--spec", spec_path, "Synthesis spec file (synth.* keys)")->required();
    synth->add_option("--out", out_dir_arg, "Output corpus directory")->required();

    auto* featurize = app.add_subcommand("featurize", "Fit and apply a modality feature pipeline");
    featurize->add_option("modality", modality, "text | audio | video")->required();
    featurize->add_option("--config", config_path, "Run config file")->required();
    featurize->add_option("--out", out_override, "Override run.out_dir");

    auto* prepare = app.add_subcommand("prepare", "Remap labels, split, and oversample");
    prepare->add_option("--config", config_path, "Run config file")->required();
    prepare->add_option("--out", out_override, "Override run.out_dir");

    auto* train = app.add_subcommand("train", "Train the fused model");
    train->add_option("--config", config_path, "Run config file")->required();
    train->add_option("--out", out_override, "Override run.out_dir");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    evaluate->add_option("--config", config_path, "Run config file")->required();
    evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    evaluate->add_option("--out", out_override, "Override run.out_dir");

    auto* baseline = app.add_subcommand("baseline", "Train and evaluate a baseline variant");
    baseline->add_option("--which", which, "text | audio | video | early | late-simple")
        ->required();
    baseline->add_option("--config", config_path, "Run config file")->required();
    baseline->add_option("--out", out_override, "Override run.out_dir");

    auto* compare = app.add_subcommand("compare", "Markdown comparison table across runs");
    compare->add_option("--runs", run_dirs, "Run directories containing report.json")
        ->required()
        ->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            const auto cfg = RunConfig::load(spec_path);
            std::filesystem::create_directories(out_dir_arg);
            write_corpus(generate(synth_spec_from(cfg)), out_dir_arg);
            return 0;
        }

        const auto cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
        std::string out_dir = out_override.empty() ? cfg.get_string("run.out_dir") : out_override;

        if (featurize->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("run.out_dir not set");
            std::filesystem::create_directories(out_dir);
            const auto corpus = load_corpus(cfg.get_string("data.dir"));
            if (modality == "text") featurize_text(cfg, corpus, out_dir);
            else if (modality == "audio") featurize_audio(cfg, corpus, out_dir);
            else if (modality == "video") featurize_video(cfg, corpus, out_dir);
            else {
                std::fprintf(stderr, "error: unknown modality '%s'\n", modality.c_str());
                return 1;
            }
            return 0;
        }
        if (prepare->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("run.out_dir not set");
            const auto corpus = load_corpus(cfg.get_string("data.dir"));
            prepare_dataset(cfg, corpus.labels, out_dir);
            return 0;
        }
        if (train->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("run.out_dir not set");
            const auto res = run_training(cfg, BaselineKind::kFused, out_dir);
            std::printf("trained %zu epochs, best val loss %.6f, test accuracy %.4f\n",
                        res.history.records.size(), res.history.best_val_loss,
                        res.report.accuracy);
            return 0;
        }
        if (evaluate->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("run.out_dir not set");
            const auto report = run_evaluate(cfg, BaselineKind::kFused, out_dir, checkpoint);
            std::printf("test accuracy %.4f, weighted F1 %.4f, macro AUC %.4f\n",
                        report.accuracy, report.prf.weighted_f1, report.macro_auc);
            return 0;
        }
        if (baseline->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("run.out_dir not set");
            const auto kind = baseline_from_string(which);
            const auto res = run_training(cfg, kind, out_dir);
            std::printf("baseline %s: test accuracy %.4f, weighted F1 %.4f\n", which.c_str(),
                        res.report.accuracy, res.report.prf.weighted_f1);
            return 0;
        }
        if (compare->parsed()) {
            cmd_compare(run_dirs);
            return 0;
        }
    } catch (const mmfuse::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
