#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/audio/dsp.hpp"
#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

namespace detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular HTK-mel filterbank over [0, sr/2], area-normalized so each
// filter integrates to the same energy scale (weights * 2 / bandwidth).
inline FeatureMatrix mel_filterbank(double sample_rate, std::size_t n_mels,
                                    std::size_t n_bins, std::size_t fft_size) {
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    FeatureMatrix fb(n_mels, n_bins);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        const double norm = 2.0 / (hi - lo);
        for (std::size_t b = 0; b < n_bins; ++b) {
            const double f = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
            double w = 0.0;
            if (f > lo && f < mid) w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
            fb.at(m, b) = w * norm;
        }
    }
    return fb;
}

// Orthonormal DCT-II of each row.
inline FeatureMatrix dct2_rows(const FeatureMatrix& x, std::size_t n_keep) {
    const std::size_t M = x.cols;
    FeatureMatrix out(x.rows, n_keep);
    const double s0 = std::sqrt(1.0 / static_cast<double>(M));
    const double sk = std::sqrt(2.0 / static_cast<double>(M));
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t k = 0; k < n_keep; ++k) {
            double acc = 0.0;
            for (std::size_t m = 0; m < M; ++m)
                acc += x.at(r, m) *
                       std::cos(kPi * static_cast<double>(k) * (static_cast<double>(m) + 0.5) /
                                static_cast<double>(M));
            out.at(r, k) = acc * (k == 0 ? s0 : sk);
        }
    return out;
}

// Inverse of the orthonormal DCT-II (full-width input).
inline FeatureMatrix idct2_rows(const FeatureMatrix& c) {
    const std::size_t M = c.cols;
    FeatureMatrix out(c.rows, M);
    const double s0 = std::sqrt(1.0 / static_cast<double>(M));
    const double sk = std::sqrt(2.0 / static_cast<double>(M));
    for (std::size_t r = 0; r < c.rows; ++r)
        for (std::size_t m = 0; m < M; ++m) {
            double acc = c.at(r, 0) * s0;
            for (std::size_t k = 1; k < M; ++k)
                acc += c.at(r, k) * sk *
                       std::cos(kPi * static_cast<double>(k) * (static_cast<double>(m) + 0.5) /
                                static_cast<double>(M));
            out.at(r, m) = acc;
        }
    return out;
}

inline double median_of(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    sd = 0.0;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace detail

// Log-mel energies: filterbank applied to the power spectrum, log(p + 1e-10).
inline FeatureMatrix log_mel_energies(const FeatureMatrix& mag, double sample_rate,
                                      std::size_t n_mels, std::size_t fft_size) {
    const auto fb = detail::mel_filterbank(sample_rate, n_mels, mag.cols, fft_size);
    FeatureMatrix out(mag.rows, n_mels);
    for (std::size_t f = 0; f < mag.rows; ++f)
        for (std::size_t m = 0; m < n_mels; ++m) {
            double e = 0.0;
            for (std::size_t b = 0; b < mag.cols; ++b) {
                const double w = fb.at(m, b);
                if (w != 0.0) e += w * mag.at(f, b) * mag.at(f, b);
            }
            out.at(f, m) = std::log(e + 1e-10);
        }
    return out;
}

// MFCC from log-mel energies: orthonormal DCT-II, first n_mfcc kept.
inline FeatureMatrix mfcc_from_log_mel(const FeatureMatrix& log_mel, std::size_t n_mfcc) {
    return detail::dct2_rows(log_mel, n_mfcc);
}

// Least-squares slope over a symmetric window (width odd) with edge
// replication, column-wise over time.
inline FeatureMatrix delta_features(const FeatureMatrix& x, std::size_t width = 9) {
    const std::size_t half = width / 2;
    double denom = 0.0;
    for (std::size_t k = 1; k <= half; ++k) denom += 2.0 * static_cast<double>(k * k);
    FeatureMatrix out(x.rows, x.cols);
    out.col_names = x.col_names;
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
    for (std::ptrdiff_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < x.cols; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = 1; k <= static_cast<std::ptrdiff_t>(half); ++k) {
                const auto lo = std::clamp<std::ptrdiff_t>(t - k, 0, n - 1);
                const auto hi = std::clamp<std::ptrdiff_t>(t + k, 0, n - 1);
                acc += static_cast<double>(k) *
                       (x.at(static_cast<std::size_t>(hi), c) - x.at(static_cast<std::size_t>(lo), c));
            }
            out.at(static_cast<std::size_t>(t), c) = acc / denom;
        }
    return out;
}

// frames x (2 * n_mfcc): MFCCs followed by their deltas.
inline FeatureMatrix mfcc_with_delta(const FeatureMatrix& mag, double sample_rate,
                                     const FrameConfig& cfg, std::size_t n_mels = 40,
                                     std::size_t n_mfcc = 13, std::size_t delta_width = 9) {
    if (mag.rows < 1) throw std::invalid_argument("mfcc_with_delta: no frames");
    if (n_mfcc > n_mels) throw std::invalid_argument("mfcc_with_delta: n_mfcc > n_mels");
    const auto lm = log_mel_energies(mag, sample_rate, n_mels, stft_fft_size(cfg));
    const auto mfcc = mfcc_from_log_mel(lm, n_mfcc);
    const auto delta = delta_features(mfcc, delta_width);
    return concat_columns(mfcc, delta);
}

struct SpectralFrames {
    std::vector<double> centroid;   // Hz
    std::vector<double> bandwidth;  // Hz
    std::vector<double> rolloff;    // Hz, 0.85 cumulative magnitude
};

inline SpectralFrames spectral_features(const FeatureMatrix& mag, double sample_rate,
                                        const FrameConfig& cfg, double rolloff_frac = 0.85) {
    if (mag.rows == 0) throw std::invalid_argument("spectral_features: empty magnitude");
    const std::size_t fft_size = stft_fft_size(cfg);
    SpectralFrames out;
    out.centroid.resize(mag.rows);
    out.bandwidth.resize(mag.rows);
    out.rolloff.resize(mag.rows);
    for (std::size_t f = 0; f < mag.rows; ++f) {
        double total = 0.0, weighted = 0.0;
        for (std::size_t b = 0; b < mag.cols; ++b) {
            const double freq = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
            total += mag.at(f, b);
            weighted += freq * mag.at(f, b);
        }
        if (total == 0.0) {
            out.centroid[f] = out.bandwidth[f] = out.rolloff[f] = 0.0;
            continue;
        }
        const double centroid = weighted / total;
        double var = 0.0, cum = 0.0;
        double roll = 0.0;
        bool found = false;
        for (std::size_t b = 0; b < mag.cols; ++b) {
            const double freq = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
            var += (freq - centroid) * (freq - centroid) * mag.at(f, b);
            cum += mag.at(f, b);
            if (!found && cum >= rolloff_frac * total) {
                roll = freq;
                found = true;
            }
        }
        out.centroid[f] = centroid;
        out.bandwidth[f] = std::sqrt(var / total);
        out.rolloff[f] = roll;
    }
    return out;
}

// 12 pitch classes, class 0 = C; bins above 27.5 Hz, energies summed per
// class, per-frame max-normalized.
inline FeatureMatrix chroma_stft(const FeatureMatrix& mag, double sample_rate,
                                 const FrameConfig& cfg) {
    if (mag.rows == 0) throw std::invalid_argument("chroma_stft: empty magnitude");
    const std::size_t fft_size = stft_fft_size(cfg);
    FeatureMatrix out(mag.rows, 12);
    for (std::size_t c = 0; c < 12; ++c) out.col_names[c] = "chroma_" + std::to_string(c);
    for (std::size_t f = 0; f < mag.rows; ++f) {
        for (std::size_t b = 0; b < mag.cols; ++b) {
            const double freq = static_cast<double>(b) * sample_rate / static_cast<double>(fft_size);
            if (freq <= 27.5) continue;
            // pitch class relative to A4 = 440 Hz; A is class 9 when C = 0
            const long rel = std::lround(12.0 * std::log2(freq / 440.0));
            const std::size_t cls = static_cast<std::size_t>((((rel % 12) + 12) % 12 + 9) % 12);
            out.at(f, cls) += mag.at(f, b) * mag.at(f, b);
        }
        double mx = 0.0;
        for (std::size_t c = 0; c < 12; ++c) mx = std::max(mx, out.at(f, c));
        if (mx > 0.0)
            for (std::size_t c = 0; c < 12; ++c) out.at(f, c) /= mx;
    }
    return out;
}

struct TimeFeatures {
    std::vector<double> zcr;   // per frame
    std::vector<double> rmse;  // per frame
    double silence_ratio = 0.0;
    double autocorr_peak = 0.0;
};

inline TimeFeatures time_features(const AudioClip& clip, const FrameConfig& cfg,
                                  double silence_threshold = 0.05) {
    const std::size_t n_frames = stft_frame_count(clip.samples.size(), cfg);
    if (n_frames == 0) throw std::invalid_argument("time_features: clip shorter than one frame");
    TimeFeatures out;
    out.zcr.resize(n_frames);
    out.rmse.resize(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * cfg.hop_length;
        std::size_t crossings = 0;
        double energy = 0.0;
        for (std::size_t i = 0; i < cfg.frame_length; ++i) {
            const double x = clip.samples[start + i];
            energy += x * x;
            if (i + 1 < cfg.frame_length && x * clip.samples[start + i + 1] < 0.0) ++crossings;
        }
        out.zcr[f] = static_cast<double>(crossings) / static_cast<double>(cfg.frame_length - 1);
        out.rmse[f] = std::sqrt(energy / static_cast<double>(cfg.frame_length));
    }
    const double max_rmse = *std::max_element(out.rmse.begin(), out.rmse.end());
    if (max_rmse == 0.0) {
        out.silence_ratio = 1.0;
        out.autocorr_peak = 0.0;
        return out;
    }
    std::size_t silent = 0;
    for (double r : out.rmse)
        if (r < silence_threshold * max_rmse) ++silent;
    out.silence_ratio = static_cast<double>(silent) / static_cast<double>(n_frames);

    // Normalized autocorrelation over pitch lags (50-400 Hz).
    double r0 = 0.0;
    for (double x : clip.samples) r0 += x * x;
    const auto lag_lo = static_cast<std::size_t>(clip.sample_rate / 400.0);
    const auto lag_hi = static_cast<std::size_t>(clip.sample_rate / 50.0);
    double peak = -1.0;
    for (std::size_t lag = std::max<std::size_t>(lag_lo, 1);
         lag <= lag_hi && lag < clip.samples.size(); ++lag) {
        double r = 0.0;
        for (std::size_t i = 0; i + lag < clip.samples.size(); ++i)
            r += clip.samples[i] * clip.samples[i + lag];
        peak = std::max(peak, r / r0);
    }
    out.autocorr_peak = peak <= -1.0 ? 0.0 : peak;
    return out;
}

// Median-filter HPSS: H = median across time, P = median across frequency,
// soft mask H^2/(H^2+P^2+1e-10); ratio of masked to total spectral energy.
// Median windows truncate at the matrix edges.
inline double harmonic_ratio(const FeatureMatrix& mag, std::size_t median_width = 9) {
    if (mag.rows < 3 || mag.cols < 3)
        throw std::invalid_argument("harmonic_ratio: need >= 3 frames and >= 3 bins");
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(median_width / 2);
    const auto n_f = static_cast<std::ptrdiff_t>(mag.rows);
    const auto n_b = static_cast<std::ptrdiff_t>(mag.cols);
    double masked = 0.0, total = 0.0;
    std::vector<double> win;
    for (std::ptrdiff_t f = 0; f < n_f; ++f)
        for (std::ptrdiff_t b = 0; b < n_b; ++b) {
            win.clear();
            for (std::ptrdiff_t t = std::max<std::ptrdiff_t>(0, f - half);
                 t <= std::min(n_f - 1, f + half); ++t)
                win.push_back(mag.at(static_cast<std::size_t>(t), static_cast<std::size_t>(b)));
            const double h = detail::median_of(win);
            win.clear();
            for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, b - half);
                 k <= std::min(n_b - 1, b + half); ++k)
                win.push_back(mag.at(static_cast<std::size_t>(f), static_cast<std::size_t>(k)));
            const double p = detail::median_of(win);
            const double mask = h * h / (h * h + p * p + 1e-10);
            const double energy =
                mag.at(static_cast<std::size_t>(f), static_cast<std::size_t>(b)) *
                mag.at(static_cast<std::size_t>(f), static_cast<std::size_t>(b));
            masked += mask * energy;
            total += energy;
        }
    return total == 0.0 ? 0.0 : masked / total;
}

inline std::vector<std::string> audio_feature_names() {
    std::vector<std::string> names;
    auto block = [&](const std::string& base, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) names.push_back(base + "_" + std::to_string(i));
    };
    block("mfcc_mean", 13);
    block("mfcc_std", 13);
    block("delta_mfcc_mean", 13);
    block("delta_mfcc_std", 13);
    names.insert(names.end(), {"centroid_mean", "centroid_std", "bandwidth_mean",
                               "bandwidth_std", "rolloff_mean", "rolloff_std"});
    block("chroma_mean", 12);
    names.insert(names.end(), {"zcr_mean", "zcr_std", "rmse_mean", "rmse_std",
                               "harmonic_ratio", "silence_ratio", "autocorr_peak"});
    return names;
}

inline constexpr std::size_t kAudioFeatureWidth = 77;

// Utterance-level vector: per-frame features reduced to mean/std, clip-level
// scalars appended. Fixed width regardless of clip length.
inline std::vector<double> extract_audio_features(const AudioClip& clip,
                                                  const FrameConfig& cfg = {}) {
    const auto mag = stft_magnitude(clip, cfg);
    const auto mfcc = mfcc_with_delta(mag, clip.sample_rate, cfg);
    const auto spectral = spectral_features(mag, clip.sample_rate, cfg);
    const auto chroma = chroma_stft(mag, clip.sample_rate, cfg);
    const auto time = time_features(clip, cfg);

    std::vector<double> out;
    out.reserve(kAudioFeatureWidth);
    auto col_stats = [&](const FeatureMatrix& m, std::size_t c0, std::size_t n, bool std_too) {
        std::vector<double> means(n), sds(n);
        for (std::size_t c = 0; c < n; ++c) {
            std::vector<double> col(m.rows);
            for (std::size_t r = 0; r < m.rows; ++r) col[r] = m.at(r, c0 + c);
            detail::mean_std(col, means[c], sds[c]);
        }
        out.insert(out.end(), means.begin(), means.end());
        if (std_too) out.insert(out.end(), sds.begin(), sds.end());
    };
    col_stats(mfcc, 0, 13, true);    // mfcc mean, std
    col_stats(mfcc, 13, 13, true);   // delta mean, std
    auto vec_stats = [&](const std::vector<double>& v) {
        double m, s;
        detail::mean_std(v, m, s);
        out.push_back(m);
        out.push_back(s);
    };
    vec_stats(spectral.centroid);
    vec_stats(spectral.bandwidth);
    vec_stats(spectral.rolloff);
    col_stats(chroma, 0, 12, false);
    vec_stats(time.zcr);
    vec_stats(time.rmse);
    out.push_back(harmonic_ratio(mag));
    out.push_back(time.silence_ratio);
    out.push_back(time.autocorr_peak);
    return out;
}

}  // namespace mmfuse
