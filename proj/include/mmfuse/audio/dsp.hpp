#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mmfuse/audio/wav.hpp"
#include "mmfuse/core/matrix.hpp"

namespace mmfuse {

inline constexpr double kPi = 3.14159265358979323846;

struct FrameConfig {
    std::size_t frame_length = 1024;
    std::size_t hop_length = 512;
};

namespace detail {

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
    return w;
}

}  // namespace detail

inline std::size_t stft_frame_count(std::size_t len, const FrameConfig& cfg) {
    if (len < cfg.frame_length) return 0;
    return 1 + (len - cfg.frame_length) / cfg.hop_length;
}

inline std::size_t stft_fft_size(const FrameConfig& cfg) {
    return detail::next_pow2(cfg.frame_length);
}

// Hann-windowed magnitude STFT. Frames are zero-padded to the next power of
// two; bins = fft_size/2 + 1. Row r of the result is frame r.
inline FeatureMatrix stft_magnitude(const AudioClip& clip, const FrameConfig& cfg) {
    if (cfg.hop_length == 0 || cfg.hop_length > cfg.frame_length)
        throw std::invalid_argument("stft_magnitude: invalid frame config");
    if (clip.samples.size() < cfg.frame_length)
        throw std::invalid_argument("stft_magnitude: clip shorter than one frame");
    const std::size_t n_frames = stft_frame_count(clip.samples.size(), cfg);
    const std::size_t fft_size = stft_fft_size(cfg);
    const std::size_t n_bins = fft_size / 2 + 1;
    const auto window = detail::hann_window(cfg.frame_length);

    FeatureMatrix mag(n_frames, n_bins);
    std::vector<std::complex<double>> buf(fft_size);
    for (std::size_t f = 0; f < n_frames; ++f) {
        const std::size_t start = f * cfg.hop_length;
        for (std::size_t i = 0; i < cfg.frame_length; ++i)
            buf[i] = clip.samples[start + i] * window[i];
        for (std::size_t i = cfg.frame_length; i < fft_size; ++i) buf[i] = 0.0;
        detail::fft_inplace(buf);
        for (std::size_t b = 0; b < n_bins; ++b) mag.at(f, b) = std::abs(buf[b]);
    }
    return mag;
}

// Frequency of FFT bin b for the given config.
inline double bin_frequency(std::size_t b, double sample_rate, const FrameConfig& cfg) {
    return static_cast<double>(b) * sample_rate / static_cast<double>(stft_fft_size(cfg));
}

}  // namespace mmfuse
