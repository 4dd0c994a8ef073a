#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmfuse {

struct AudioClip {
    std::vector<double> samples;  // in [-1, 1]
    double sample_rate = 0.0;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// RIFF/WAVE, PCM 16-bit little-endian; stereo is downmixed by average.
inline AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open WAV file: " + path);
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 ||
        std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("not a RIFF/WAVE file: " + path);

    std::uint16_t channels = 0, bits = 0, format = 0;
    std::uint32_t sample_rate = 0;
    const unsigned char* pcm = nullptr;
    std::size_t pcm_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const char* id = reinterpret_cast<const char*>(data.data() + pos);
        const std::uint32_t size = detail::read_u32le(data.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > data.size())
            throw std::runtime_error("truncated chunk in WAV file: " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw std::runtime_error("malformed fmt chunk: " + path);
            format = detail::read_u16le(data.data() + body);
            channels = detail::read_u16le(data.data() + body + 2);
            sample_rate = detail::read_u32le(data.data() + body + 4);
            bits = detail::read_u16le(data.data() + body + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            pcm = data.data() + body;
            pcm_bytes = size;
        }
        pos = body + size + (size & 1);  // chunks are word-aligned
    }
    if (!pcm) throw std::runtime_error("WAV file has no data chunk: " + path);
    if (format != 1 || bits != 16)
        throw std::runtime_error("unsupported WAV encoding (PCM 16-bit required): " + path);
    if (channels < 1 || channels > 2)
        throw std::runtime_error("unsupported channel count: " + path);

    const std::size_t frames = pcm_bytes / (2 * channels);
    AudioClip clip;
    clip.sample_rate = static_cast<double>(sample_rate);
    clip.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::uint16_t ch = 0; ch < channels; ++ch) {
            const unsigned char* p = pcm + 2 * (f * channels + ch);
            const std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            acc += static_cast<double>(s) / 32767.0;
        }
        clip.samples[f] = acc / channels;
    }
    return clip;
}

inline void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write WAV file: " + path);
    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t sr = static_cast<std::uint32_t>(clip.sample_rate);
    const std::uint32_t data_bytes = n * 2;

    auto put_u32 = [&](std::uint32_t v) {
        char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                     static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
        out.write(b, 4);
    };
    auto put_u16 = [&](std::uint16_t v) {
        char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
        out.write(b, 2);
    };

    out.write("RIFF", 4);
    put_u32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(1);   // PCM
    put_u16(1);   // mono
    put_u32(sr);
    put_u32(sr * 2);
    put_u16(2);
    put_u16(16);
    out.write("data", 4);
    put_u32(data_bytes);
    for (double s : clip.samples) {
        const double clamped = std::clamp(s, -1.0, 1.0);
        auto q = static_cast<std::int32_t>(std::lround(clamped * 32767.0));
        put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
}

}  // namespace mmfuse
