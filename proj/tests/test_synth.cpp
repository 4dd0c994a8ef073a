#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "mmfuse/cli/config.hpp"
#include "mmfuse/cli/pipeline.hpp"
#include "mmfuse/synth/synthgen.hpp"

using namespace mmfuse;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec spec;
    spec.class_counts.assign(6, 8);
    spec.clip_seconds = 0.2;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("generate is deterministic for a fixed seed") {
    const auto a = generate(small_spec(42));
    const auto b = generate(small_spec(42));
    CHECK(a.transcripts == b.transcripts);
    CHECK(a.labels == b.labels);
    REQUIRE(a.clips.size() == b.clips.size());
    for (std::size_t i = 0; i < a.clips.size(); ++i)
        CHECK(a.clips[i].samples == b.clips[i].samples);
    // NaNs compare unequal; compare bit patterns via isnan-aware loop
    REQUIRE(a.video.values.size() == b.video.values.size());
    for (std::size_t i = 0; i < a.video.values.size(); ++i) {
        if (std::isnan(a.video.values[i])) CHECK(std::isnan(b.video.values[i]));
        else CHECK(a.video.values[i] == b.video.values[i]);
    }

    const auto c = generate(small_spec(43));
    CHECK(a.transcripts != c.transcripts);
}

TEST_CASE("class counts in the output match the spec exactly") {
    auto spec = small_spec(7);
    spec.class_counts = {3, 5, 2, 7, 4, 6};
    const auto corpus = generate(spec);
    std::map<int, std::size_t> counts;
    for (int l : corpus.labels) ++counts[l];
    for (std::size_t c = 0; c < 6; ++c) CHECK(counts[static_cast<int>(c)] == spec.class_counts[c]);
    CHECK(corpus.transcripts.size() == 27);
    CHECK(corpus.clips.size() == 27);
    CHECK(corpus.video.rows == 27);

    auto bad = spec;
    bad.class_counts.pop_back();
    CHECK_THROWS_AS(generate(bad), std::invalid_argument);
}

TEST_CASE("rotating degradation blinds the designated class pairs") {
    const auto corpus = generate(small_spec(11));
    for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
        const int c = corpus.labels[i];
        // text-blind classes 0 and 1 produce filler-only transcripts
        const bool has_theme = corpus.transcripts[i].find("theme") != std::string::npos;
        if (c <= 1) CHECK_FALSE(has_theme);

        // audio-blind classes 2 and 3 emit noise-only clips (rms near sigma)
        double rms = 0.0;
        for (double x : corpus.clips[i].samples) rms += x * x;
        rms = std::sqrt(rms / static_cast<double>(corpus.clips[i].samples.size()));
        if (c == 2 || c == 3) CHECK(rms < 0.1);
        else CHECK(rms > 0.2);  // two tones at amplitude 0.3 dominate
    }
}

TEST_CASE("video offsets separate the sighted classes") {
    auto spec = small_spec(3);
    spec.class_counts.assign(6, 60);
    spec.missing_rate = 0.0;
    const auto corpus = generate(spec);
    // per class, mean of the designated dimension
    std::vector<double> mean(6, 0.0);
    std::vector<std::size_t> n(6, 0);
    for (std::size_t r = 0; r < corpus.video.rows; ++r) {
        const auto c = static_cast<std::size_t>(corpus.labels[r]);
        mean[c] += corpus.video.at(r, c % spec.video_dim);
        ++n[c];
    }
    for (std::size_t c = 0; c < 6; ++c) {
        mean[c] /= static_cast<double>(n[c]);
        if (c >= 4) CHECK(std::fabs(mean[c]) < 1.0);        // video-blind pair
        else CHECK(mean[c] == Catch::Approx(3.0).margin(1.0));
    }
}

TEST_CASE("missing rate is honored approximately") {
    auto spec = small_spec(5);
    spec.class_counts.assign(6, 50);
    spec.missing_rate = 0.1;
    const auto corpus = generate(spec);
    std::size_t missing = 0;
    for (double v : corpus.video.values)
        if (std::isnan(v)) ++missing;
    const double rate = static_cast<double>(missing) / static_cast<double>(corpus.video.values.size());
    CHECK(rate == Catch::Approx(0.1).margin(0.02));
}

TEST_CASE("write_corpus emits the formats the pipelines ingest") {
    namespace fs = std::filesystem;
    const auto dir = (fs::temp_directory_path() / "mmfuse_synth_corpus").string();
    fs::remove_all(dir);
    const auto corpus = generate(small_spec(17));
    write_corpus(corpus, dir);

    const auto back = load_corpus(dir);
    CHECK(back.labels == corpus.labels);
    REQUIRE(back.transcripts.size() == corpus.transcripts.size());
    CHECK(back.transcripts == corpus.transcripts);
    REQUIRE(back.clip_paths.size() == corpus.clips.size());
    for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
        const auto clip = read_wav(back.clip_paths[i]);
        REQUIRE(clip.samples.size() == corpus.clips[i].samples.size());
        for (std::size_t s = 0; s < corpus.clips[i].samples.size(); ++s)
            CHECK(std::fabs(clip.samples[s] - corpus.clips[i].samples[s]) <= 1.0 / 32767.0);
    }
    REQUIRE(back.video_raw.cols == corpus.video.cols);
    for (std::size_t i = 0; i < corpus.video.values.size(); ++i) {
        if (std::isnan(corpus.video.values[i])) CHECK(std::isnan(back.video_raw.values[i]));
        else CHECK(back.video_raw.values[i] == corpus.video.values[i]);
    }
    fs::remove_all(dir);
}

TEST_CASE("RunConfig parses key-value files and rejects unknown keys") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "mmfuse_cfg_t.cfg").string();
    std::ofstream(path) << "# comment line\n"
                        << "run.seed = 7\n"
                        << "run.out_dir = \"/tmp/run\"  # trailing comment\n"
                        << "train.learning_rate = 0.01\n"
                        << "resample.label_map = 0:0,1:1,2:1\n"
                        << "video.out_of_fold = false\n";
    const auto cfg = RunConfig::load(path);
    CHECK(cfg.get_u64("run.seed", 0) == 7);
    CHECK(cfg.get_string("run.out_dir") == "/tmp/run");
    CHECK(cfg.get_double("train.learning_rate", 0.0) == 0.01);
    CHECK_FALSE(cfg.get_bool("video.out_of_fold", true));
    const auto m = cfg.label_map();
    CHECK(m.at(2) == 1);
    CHECK(cfg.get_size("train.epochs", 50) == 50);  // default passthrough
    std::remove(path.c_str());

    const auto bad = (fs::temp_directory_path() / "mmfuse_cfg_bad.cfg").string();
    std::ofstream(bad) << "train.eopchs = 10\n";
    CHECK_THROWS_WITH(RunConfig::load(bad), Catch::Matchers::ContainsSubstring("unknown config key"));
    std::remove(bad.c_str());

    const auto malformed = (fs::temp_directory_path() / "mmfuse_cfg_m.cfg").string();
    std::ofstream(malformed) << "just some words\n";
    CHECK_THROWS_WITH(RunConfig::load(malformed),
                      Catch::Matchers::ContainsSubstring("expected key = value"));
    std::remove(malformed.c_str());
}

TEST_CASE("RunConfig defaults mirror the rebalancing tables") {
    RunConfig cfg;
    CHECK(cfg.label_map() == default_label_map());
    CHECK(cfg.target_counts() == default_target_counts());
    CHECK_THROWS_AS(cfg.set("no.such_key", "1"), std::runtime_error);
}
