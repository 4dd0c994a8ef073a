#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/audio/wav.hpp"
#include "mmfuse/core/io.hpp"
#include "mmfuse/core/matrix.hpp"
#include "mmfuse/core/rng.hpp"

namespace mmfuse {

// Synthetic multimodal corpus with rotating per-modality degradation: each
// modality carries no class signal for one designated class pair, so only the
// fused model sees every class cleanly.
struct SynthSpec {
    std::size_t n_classes = 6;
    std::vector<std::size_t> class_counts;      // per class; required
    double separation = 3.0;                    // video offset scale
    std::size_t theme_words = 8;                // per-class vocabulary size
    std::size_t filler_words = 20;              // shared vocabulary size
    std::vector<std::vector<double>> tones;     // per class, Hz; empty = derive defaults
    double sample_rate = 16000.0;
    double clip_seconds = 1.0;
    double noise_sigma = 0.05;
    std::size_t video_dim = 16;
    double missing_rate = 0.05;
    std::uint64_t seed = 0;
    // class pairs each modality is blind to (defaults rotate over 6 classes)
    std::vector<std::size_t> text_blind = {0, 1};
    std::vector<std::size_t> audio_blind = {2, 3};
    std::vector<std::size_t> video_blind = {4, 5};
};

struct SynthCorpus {
    std::vector<std::string> transcripts;
    std::vector<AudioClip> clips;
    FeatureMatrix video;  // NaN marks missing entries
    std::vector<int> labels;
};

namespace detail {

inline constexpr double kSynthPi = 3.14159265358979323846;

inline bool contains(const std::vector<std::size_t>& v, std::size_t x) {
    for (std::size_t e : v)
        if (e == x) return true;
    return false;
}

}  // namespace detail

inline SynthCorpus generate(const SynthSpec& spec) {
    if (spec.class_counts.size() != spec.n_classes)
        throw std::invalid_argument("generate: class_counts size must equal n_classes");
    std::size_t total = 0;
    for (std::size_t c : spec.class_counts) total += c;

    std::vector<std::vector<double>> tones = spec.tones;
    if (tones.empty()) {
        tones.resize(spec.n_classes);
        for (std::size_t c = 0; c < spec.n_classes; ++c)
            tones[c] = {300.0 + 500.0 * static_cast<double>(c),
                        550.0 + 500.0 * static_cast<double>(c)};
    }

    SynthCorpus corpus;
    corpus.transcripts.reserve(total);
    corpus.clips.reserve(total);
    corpus.labels.reserve(total);
    corpus.video = FeatureMatrix(total, spec.video_dim);
    for (std::size_t d = 0; d < spec.video_dim; ++d)
        corpus.video.col_names[d] = "v" + std::to_string(d);

    const SeededRng root(spec.seed);
    const auto n_clip = static_cast<std::size_t>(spec.sample_rate * spec.clip_seconds);

    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const bool text_ok = !detail::contains(spec.text_blind, c);
        const bool audio_ok = !detail::contains(spec.audio_blind, c);
        const bool video_ok = !detail::contains(spec.video_blind, c);
        for (std::size_t k = 0; k < spec.class_counts[c]; ++k, ++row) {
            SeededRng rng = root.split(row);
            corpus.labels.push_back(static_cast<int>(c));

            // transcript: 5-15 tokens, theme words only when text is informative
            const std::size_t n_tok = 5 + static_cast<std::size_t>(rng.below(11));
            std::string text;
            for (std::size_t t = 0; t < n_tok; ++t) {
                if (t) text += ' ';
                const bool theme = text_ok && rng.next_double() < 0.5;
                if (theme)
                    text += "theme" + std::to_string(c) + "w" +
                            std::to_string(rng.below(spec.theme_words));
                else
                    text += "fillerw" + std::to_string(rng.below(spec.filler_words));
            }
            corpus.transcripts.push_back(std::move(text));

            // audio: class tone mixture plus Gaussian noise
            AudioClip clip;
            clip.sample_rate = spec.sample_rate;
            clip.samples.resize(n_clip);
            const double phase = rng.next_double() * 2.0 * detail::kSynthPi;
            for (std::size_t i = 0; i < n_clip; ++i) {
                double v = rng.normal() * spec.noise_sigma;
                if (audio_ok)
                    for (double f : tones[c])
                        v += 0.3 * std::sin(2.0 * detail::kSynthPi * f * static_cast<double>(i) /
                                                spec.sample_rate +
                                            phase);
                clip.samples[i] = v;
            }
            corpus.clips.push_back(std::move(clip));

            // video: Gaussian vector at the class offset, entries masked missing
            for (std::size_t d = 0; d < spec.video_dim; ++d) {
                double v = rng.normal();
                if (video_ok && d == c % spec.video_dim) v += spec.separation;
                corpus.video.at(row, d) = rng.next_double() < spec.missing_rate
                                              ? std::numeric_limits<double>::quiet_NaN()
                                              : v;
            }
        }
    }
    return corpus;
}

// Writes transcripts.csv (id,text,label), clips/clip_<i>.wav plus
// audio_manifest.csv (clip_path,label), and video.csv (empty cell = missing).
inline void write_corpus(const SynthCorpus& corpus, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir + "/clips");

    {
        std::ofstream out(out_dir + "/transcripts.csv");
        if (!out) throw std::runtime_error("cannot write transcripts.csv");
        out << "id,text,label\n";
        for (std::size_t i = 0; i < corpus.transcripts.size(); ++i)
            out << i << ',' << csv_escape(corpus.transcripts[i]) << ',' << corpus.labels[i] << '\n';
    }
    {
        std::ofstream out(out_dir + "/audio_manifest.csv");
        if (!out) throw std::runtime_error("cannot write audio_manifest.csv");
        out << "clip_path,label\n";
        for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
            const std::string rel = "clips/clip_" + std::to_string(i) + ".wav";
            write_wav(out_dir + "/" + rel, corpus.clips[i]);
            out << rel << ',' << corpus.labels[i] << '\n';
        }
    }
    {
        std::ofstream out(out_dir + "/video.csv");
        if (!out) throw std::runtime_error("cannot write video.csv");
        for (std::size_t d = 0; d < corpus.video.cols; ++d) out << corpus.video.col_names[d] << ',';
        out << "label\n";
        for (std::size_t r = 0; r < corpus.video.rows; ++r) {
            for (std::size_t d = 0; d < corpus.video.cols; ++d) {
                const double v = corpus.video.at(r, d);
                if (std::isfinite(v)) out << format_double(v);
                out << ',';
            }
            out << corpus.labels[r] << '\n';
        }
    }
}

}  // namespace mmfuse
