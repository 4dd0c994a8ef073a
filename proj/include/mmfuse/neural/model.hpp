#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/matrix.hpp"
#include "mmfuse/core/rng.hpp"

namespace mmfuse {

enum class Mode { kTrain, kEval };

struct EncoderLayerSpec {
    std::size_t width = 0;
    double dropout = 0.0;
    bool batch_norm = false;
};

struct EncoderSpec {
    std::vector<EncoderLayerSpec> layers;
};

struct FusionSpec {
    std::size_t audio_in = 0;
    std::size_t video_in = 0;
    std::size_t text_in = 0;
    EncoderSpec audio;
    EncoderSpec video;
    EncoderSpec text;
    std::size_t fusion_width = 256;
    double fusion_dropout = 0.4;
    std::size_t n_classes = 6;

    // Literal layer widths: text/audio single 128-unit blocks, video
    // 128-64-32 with batch norm. project_video appends a 32->128 block for
    // the equal-width wiring.
    static FusionSpec defaults(std::size_t audio_in, std::size_t video_in,
                               std::size_t text_in, bool project_video = false,
                               std::size_t n_classes = 6) {
        FusionSpec s;
        s.audio_in = audio_in;
        s.video_in = video_in;
        s.text_in = text_in;
        s.n_classes = n_classes;
        s.audio.layers = {{128, 0.3, false}};
        s.text.layers = {{128, 0.3, false}};
        s.video.layers = {{128, 0.3, true}, {64, 0.3, true}, {32, 0.3, true}};
        if (project_video) s.video.layers.push_back({128, 0.0, false});
        return s;
    }

    std::size_t encoder_out(const EncoderSpec& e, std::size_t in) const {
        return e.layers.empty() ? in : e.layers.back().width;
    }
    std::size_t fused_width() const {
        return encoder_out(audio, audio_in) + encoder_out(video, video_in) +
               encoder_out(text, text_in);
    }
};

struct DenseLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> W;  // out x in, row-major
    std::vector<double> b;  // out

    void resize(std::size_t i, std::size_t o) {
        in = i;
        out = o;
        W.assign(i * o, 0.0);
        b.assign(o, 0.0);
    }
};

struct BatchNorm {
    std::size_t width = 0;
    double momentum = 0.9;
    double eps = 1e-5;
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;

    void resize(std::size_t w) {
        width = w;
        gamma.assign(w, 1.0);
        beta.assign(w, 0.0);
        running_mean.assign(w, 0.0);
        running_var.assign(w, 1.0);
    }
};

// dense -> (batch norm) -> ReLU -> (dropout)
struct LayerBlock {
    DenseLayer dense;
    bool has_bn = false;
    BatchNorm bn;
    double dropout = 0.0;
};

struct Encoder {
    std::vector<LayerBlock> blocks;
};

struct FusionModel {
    FusionSpec spec;
    Encoder audio_enc, video_enc, text_enc;  // fused order: [audio; video; text]
    LayerBlock fusion;
    DenseLayer output;

    static FusionModel shaped(const FusionSpec& spec) {
        FusionModel m;
        m.spec = spec;
        auto build = [](Encoder& e, const EncoderSpec& es, std::size_t in) {
            for (const auto& ls : es.layers) {
                LayerBlock blk;
                blk.dense.resize(in, ls.width);
                blk.dropout = ls.dropout;
                blk.has_bn = ls.batch_norm;
                if (ls.batch_norm) blk.bn.resize(ls.width);
                e.blocks.push_back(std::move(blk));
                in = ls.width;
            }
        };
        build(m.audio_enc, spec.audio, spec.audio_in);
        build(m.video_enc, spec.video, spec.video_in);
        build(m.text_enc, spec.text, spec.text_in);
        m.fusion.dense.resize(spec.fused_width(), spec.fusion_width);
        m.fusion.dropout = spec.fusion_dropout;
        m.output.resize(spec.fusion_width, spec.n_classes);
        return m;
    }
};

// Fixed parameter enumeration order shared by init, Adam, gradients, and
// checkpoints: encoders in fused order, per block W, b, (gamma, beta);
// then fusion W, b; then output W, b.
template <typename Fn>
inline void visit_params(FusionModel& m, Fn&& fn) {
    auto visit_block = [&](LayerBlock& blk) {
        fn(blk.dense.W);
        fn(blk.dense.b);
        if (blk.has_bn) {
            fn(blk.bn.gamma);
            fn(blk.bn.beta);
        }
    };
    for (auto* enc : {&m.audio_enc, &m.video_enc, &m.text_enc})
        for (auto& blk : enc->blocks) visit_block(blk);
    visit_block(m.fusion);
    fn(m.output.W);
    fn(m.output.b);
}

// Non-trained state (batch-norm running statistics), for checkpoints.
template <typename Fn>
inline void visit_state(FusionModel& m, Fn&& fn) {
    for (auto* enc : {&m.audio_enc, &m.video_enc, &m.text_enc})
        for (auto& blk : enc->blocks)
            if (blk.has_bn) {
                fn(blk.bn.running_mean);
                fn(blk.bn.running_var);
            }
}

inline std::size_t param_count(FusionModel& m) {
    std::size_t n = 0;
    visit_params(m, [&](std::vector<double>& p) { n += p.size(); });
    return n;
}

// Glorot-uniform weights, zero biases, identity batch norm.
inline FusionModel init_model(const FusionSpec& spec, SeededRng& rng) {
    FusionModel m = FusionModel::shaped(spec);
    auto init_block = [&](LayerBlock& blk) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(blk.dense.in + blk.dense.out));
        for (double& w : blk.dense.W) w = rng.uniform(-limit, limit);
    };
    for (auto* enc : {&m.audio_enc, &m.video_enc, &m.text_enc})
        for (auto& blk : enc->blocks) init_block(blk);
    init_block(m.fusion);
    const double limit = std::sqrt(6.0 / static_cast<double>(m.output.in + m.output.out));
    for (double& w : m.output.W) w = rng.uniform(-limit, limit);
    return m;
}

struct Batch {
    FeatureMatrix audio, video, text;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

struct BlockCache {
    FeatureMatrix in;      // N x in
    FeatureMatrix z;       // pre-norm linear output
    FeatureMatrix norm;    // post batch-norm (== z when bn absent)
    FeatureMatrix act;     // post ReLU
    FeatureMatrix mask;    // dropout mask scaled by 1/(1-p); empty when inactive
    FeatureMatrix out;     // block output
    std::vector<double> mean, var;  // train-mode batch statistics
};

struct ForwardCache {
    Mode mode = Mode::kEval;
    std::size_t batch_size = 0;
    std::vector<BlockCache> audio_blocks, video_blocks, text_blocks;
    BlockCache fusion_block;
    FeatureMatrix fused;
    FeatureMatrix logits;
    FeatureMatrix probs;
};

namespace detail {

inline FeatureMatrix dense_forward(const DenseLayer& d, const FeatureMatrix& x) {
    if (x.cols != d.in) throw std::invalid_argument("dense layer: input width mismatch");
    FeatureMatrix z(x.rows, d.out);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* zr = z.row(r);
        for (std::size_t o = 0; o < d.out; ++o) zr[o] = d.b[o];
        for (std::size_t i = 0; i < d.in; ++i) {
            const double xv = xr[i];
            if (xv == 0.0) continue;
            const double* wcol = d.W.data() + i;
            for (std::size_t o = 0; o < d.out; ++o) zr[o] += d.W[o * d.in + i] * xv;
            (void)wcol;
        }
    }
    return z;
}

inline void block_forward(LayerBlock& blk, const FeatureMatrix& x, Mode mode,
                          SeededRng& rng, BlockCache& cache) {
    cache.in = x;
    cache.z = dense_forward(blk.dense, x);
    const std::size_t N = x.rows, W = blk.dense.out;

    if (blk.has_bn) {
        cache.norm = FeatureMatrix(N, W);
        if (mode == Mode::kTrain) {
            cache.mean.assign(W, 0.0);
            cache.var.assign(W, 0.0);
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t c = 0; c < W; ++c) cache.mean[c] += cache.z.at(r, c);
            for (std::size_t c = 0; c < W; ++c) cache.mean[c] /= static_cast<double>(N);
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    const double d = cache.z.at(r, c) - cache.mean[c];
                    cache.var[c] += d * d;
                }
            for (std::size_t c = 0; c < W; ++c) cache.var[c] /= static_cast<double>(N);
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    const double xhat =
                        (cache.z.at(r, c) - cache.mean[c]) / std::sqrt(cache.var[c] + blk.bn.eps);
                    cache.norm.at(r, c) = blk.bn.gamma[c] * xhat + blk.bn.beta[c];
                }
            for (std::size_t c = 0; c < W; ++c) {
                blk.bn.running_mean[c] =
                    blk.bn.momentum * blk.bn.running_mean[c] + (1.0 - blk.bn.momentum) * cache.mean[c];
                blk.bn.running_var[c] =
                    blk.bn.momentum * blk.bn.running_var[c] + (1.0 - blk.bn.momentum) * cache.var[c];
            }
        } else {
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    const double xhat = (cache.z.at(r, c) - blk.bn.running_mean[c]) /
                                        std::sqrt(blk.bn.running_var[c] + blk.bn.eps);
                    cache.norm.at(r, c) = blk.bn.gamma[c] * xhat + blk.bn.beta[c];
                }
        }
    } else {
        cache.norm = cache.z;
    }

    cache.act = cache.norm;
    for (double& v : cache.act.values) v = std::max(0.0, v);

    if (mode == Mode::kTrain && blk.dropout > 0.0) {
        const double keep = 1.0 - blk.dropout;
        cache.mask = FeatureMatrix(N, W);
        cache.out = FeatureMatrix(N, W);
        for (std::size_t i = 0; i < cache.mask.values.size(); ++i) {
            cache.mask.values[i] = rng.next_double() < keep ? 1.0 / keep : 0.0;
            cache.out.values[i] = cache.act.values[i] * cache.mask.values[i];
        }
    } else {
        cache.mask = FeatureMatrix();
        cache.out = cache.act;
    }
}

}  // namespace detail

// Full forward pass. Dropout masks are drawn from `rng` in a fixed order
// (audio blocks, video blocks, text blocks, fusion), so a copied rng replays
// the same masks.
inline ForwardCache forward(FusionModel& m, const Batch& batch, Mode mode, SeededRng& rng) {
    if (batch.audio.rows != batch.size() || batch.video.rows != batch.size() ||
        batch.text.rows != batch.size())
        throw std::invalid_argument("forward: batch rows misaligned");
    ForwardCache cache;
    cache.mode = mode;
    cache.batch_size = batch.size();

    auto run_encoder = [&](Encoder& enc, const FeatureMatrix& x,
                           std::vector<BlockCache>& caches) -> const FeatureMatrix& {
        caches.resize(enc.blocks.size());
        const FeatureMatrix* cur = &x;
        for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
            detail::block_forward(enc.blocks[i], *cur, mode, rng, caches[i]);
            cur = &caches[i].out;
        }
        static const FeatureMatrix empty;
        return enc.blocks.empty() ? x : caches.back().out;
    };

    const auto& za = run_encoder(m.audio_enc, batch.audio, cache.audio_blocks);
    const auto& zv = run_encoder(m.video_enc, batch.video, cache.video_blocks);
    const auto& zt = run_encoder(m.text_enc, batch.text, cache.text_blocks);
    cache.fused = concat_columns(concat_columns(za, zv), zt);

    detail::block_forward(m.fusion, cache.fused, mode, rng, cache.fusion_block);
    cache.logits = detail::dense_forward(m.output, cache.fusion_block.out);

    cache.probs = cache.logits;
    const std::size_t K = m.spec.n_classes;
    for (std::size_t r = 0; r < cache.probs.rows; ++r) {
        double* p = cache.probs.row(r);
        double mx = p[0];
        for (std::size_t c = 1; c < K; ++c) mx = std::max(mx, p[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            p[c] = std::exp(p[c] - mx);
            sum += p[c];
        }
        for (std::size_t c = 0; c < K; ++c) p[c] /= sum;
    }
    return cache;
}

// Mean sparse categorical cross-entropy with probabilities clamped at 1e-12.
inline double loss(const FeatureMatrix& probs, const std::vector<int>& labels) {
    if (probs.rows != labels.size()) throw std::invalid_argument("loss: row/label mismatch");
    double acc = 0.0;
    for (std::size_t r = 0; r < probs.rows; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= probs.cols)
            throw std::invalid_argument("loss: label out of range");
        acc -= std::log(std::max(probs.at(r, static_cast<std::size_t>(labels[r])), 1e-12));
    }
    return acc / static_cast<double>(probs.rows);
}

namespace detail {

// dX returned; dW/db accumulated into grads.
inline FeatureMatrix dense_backward(const DenseLayer& d, const FeatureMatrix& x,
                                    const FeatureMatrix& dz, DenseLayer& grad) {
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        const double* dzr = dz.row(r);
        for (std::size_t o = 0; o < d.out; ++o) {
            const double g = dzr[o];
            if (g == 0.0) continue;
            grad.b[o] += g;
            double* gw = grad.W.data() + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) gw[i] += g * xr[i];
        }
    }
    FeatureMatrix dx(x.rows, d.in);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* dzr = dz.row(r);
        double* dxr = dx.row(r);
        for (std::size_t o = 0; o < d.out; ++o) {
            const double g = dzr[o];
            if (g == 0.0) continue;
            const double* w = d.W.data() + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) dxr[i] += g * w[i];
        }
    }
    return dx;
}

inline FeatureMatrix block_backward(const LayerBlock& blk, const BlockCache& cache,
                                    const FeatureMatrix& dout, Mode mode, LayerBlock& grad) {
    const std::size_t N = cache.out.rows, W = blk.dense.out;
    FeatureMatrix da = dout;
    if (cache.mask.rows > 0)
        for (std::size_t i = 0; i < da.values.size(); ++i)
            da.values[i] *= cache.mask.values[i];

    // ReLU gate on the pre-activation (post-norm) values.
    for (std::size_t i = 0; i < da.values.size(); ++i)
        if (cache.norm.values[i] <= 0.0) da.values[i] = 0.0;

    FeatureMatrix dz;
    if (blk.has_bn) {
        dz = FeatureMatrix(N, W);
        if (mode == Mode::kTrain) {
            for (std::size_t c = 0; c < W; ++c) {
                const double istd = 1.0 / std::sqrt(cache.var[c] + blk.bn.eps);
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t r = 0; r < N; ++r) {
                    const double xhat = (cache.z.at(r, c) - cache.mean[c]) * istd;
                    sum_dy += da.at(r, c);
                    sum_dy_xhat += da.at(r, c) * xhat;
                }
                grad.bn.beta[c] += sum_dy;
                grad.bn.gamma[c] += sum_dy_xhat;
                const double n = static_cast<double>(N);
                for (std::size_t r = 0; r < N; ++r) {
                    const double xhat = (cache.z.at(r, c) - cache.mean[c]) * istd;
                    dz.at(r, c) = blk.bn.gamma[c] * istd / n *
                                  (n * da.at(r, c) - sum_dy - xhat * sum_dy_xhat);
                }
            }
        } else {
            for (std::size_t c = 0; c < W; ++c) {
                const double istd = 1.0 / std::sqrt(blk.bn.running_var[c] + blk.bn.eps);
                for (std::size_t r = 0; r < N; ++r) {
                    const double xhat = (cache.z.at(r, c) - blk.bn.running_mean[c]) * istd;
                    grad.bn.beta[c] += da.at(r, c);
                    grad.bn.gamma[c] += da.at(r, c) * xhat;
                    dz.at(r, c) = da.at(r, c) * blk.bn.gamma[c] * istd;
                }
            }
        }
    } else {
        dz = std::move(da);
    }
    return dense_backward(blk.dense, cache.in, dz, grad.dense);
}

}  // namespace detail

// Exact gradients of the mean loss for every weight, bias, and batch-norm
// gamma/beta; dropout masks are reused from the cached forward pass.
inline FusionModel backward(FusionModel& m, const Batch& batch, const ForwardCache& cache) {
    if (cache.batch_size != batch.size())
        throw std::invalid_argument("backward: cache does not match batch");
    FusionModel grads = FusionModel::shaped(m.spec);
    // zero batch-norm gamma init (shaped() sets gamma=1)
    visit_params(grads, [](std::vector<double>& p) { std::fill(p.begin(), p.end(), 0.0); });

    const std::size_t N = batch.size(), K = m.spec.n_classes;
    FeatureMatrix dlogits = cache.probs;
    for (std::size_t r = 0; r < N; ++r)
        dlogits.at(r, static_cast<std::size_t>(batch.labels[r])) -= 1.0;
    for (double& v : dlogits.values) v /= static_cast<double>(N);
    (void)K;

    FeatureMatrix dfusion_out =
        detail::dense_backward(m.output, cache.fusion_block.out, dlogits, grads.output);
    FeatureMatrix dfused =
        detail::block_backward(m.fusion, cache.fusion_block, dfusion_out, cache.mode, grads.fusion);

    const std::size_t wa = m.spec.encoder_out(m.spec.audio, m.spec.audio_in);
    const std::size_t wv = m.spec.encoder_out(m.spec.video, m.spec.video_in);
    const std::size_t wt = m.spec.encoder_out(m.spec.text, m.spec.text_in);
    auto slice = [&](std::size_t c0, std::size_t w) {
        FeatureMatrix s(N, w);
        for (std::size_t r = 0; r < N; ++r)
            for (std::size_t c = 0; c < w; ++c) s.at(r, c) = dfused.at(r, c0 + c);
        return s;
    };
    auto back_encoder = [&](Encoder& enc, const std::vector<BlockCache>& caches,
                            Encoder& genc, FeatureMatrix d) {
        for (std::size_t i = enc.blocks.size(); i-- > 0;)
            d = detail::block_backward(enc.blocks[i], caches[i], d, cache.mode, genc.blocks[i]);
    };
    back_encoder(m.audio_enc, cache.audio_blocks, grads.audio_enc, slice(0, wa));
    back_encoder(m.video_enc, cache.video_blocks, grads.video_enc, slice(wa, wv));
    back_encoder(m.text_enc, cache.text_blocks, grads.text_enc, slice(wa + wv, wt));
    (void)wt;
    return grads;
}

struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<double> m, v;

    static AdamState shaped(FusionModel& model, double learning_rate) {
        AdamState s;
        s.lr = learning_rate;
        s.m.assign(param_count(model), 0.0);
        s.v.assign(param_count(model), 0.0);
        return s;
    }
};

// Flat Adam over std::vector parameter/gradient pairs (generic form used by
// the optimizer oracle tests).
inline void adam_step_flat(std::vector<double*> params, std::vector<const double*> grads,
                           std::vector<std::size_t> sizes, AdamState& s) {
    ++s.t;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    std::size_t off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* p = params[k];
        const double* g = grads[k];
        for (std::size_t i = 0; i < sizes[k]; ++i) {
            if (!std::isfinite(g[i])) throw NumericError("adam_step: non-finite gradient");
            double& mm = s.m[off + i];
            double& vv = s.v[off + i];
            mm = s.beta1 * mm + (1.0 - s.beta1) * g[i];
            vv = s.beta2 * vv + (1.0 - s.beta2) * g[i] * g[i];
            const double mhat = mm / bc1;
            const double vhat = vv / bc2;
            p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
        }
        off += sizes[k];
    }
}

inline void adam_step(FusionModel& model, FusionModel& grads, AdamState& s) {
    std::vector<double*> params;
    std::vector<const double*> gp;
    std::vector<std::size_t> sizes;
    visit_params(model, [&](std::vector<double>& p) {
        params.push_back(p.data());
        sizes.push_back(p.size());
    });
    visit_params(grads, [&](std::vector<double>& g) { gp.push_back(g.data()); });
    adam_step_flat(std::move(params), std::move(gp), std::move(sizes), s);
}

// --- checkpoint format ------------------------------------------------------
// magic "MFUS", u32 version, u64 spec digest, then every parameter tensor and
// batch-norm running stat as little-endian 64-bit reals in enumeration order.

inline std::uint64_t spec_digest(const FusionSpec& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    mix(s.audio_in);
    mix(s.video_in);
    mix(s.text_in);
    mix(s.fusion_width);
    mix(s.n_classes);
    for (const auto* e : {&s.audio, &s.video, &s.text}) {
        mix(e->layers.size());
        for (const auto& l : e->layers) {
            mix(l.width);
            mix(static_cast<std::uint64_t>(l.dropout * 1e6));
            mix(l.batch_norm ? 1 : 0);
        }
    }
    return h;
}

inline void save_checkpoint(FusionModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("MFUS", 4);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t digest = spec_digest(m.spec);
    out.write(reinterpret_cast<const char*>(&digest), 8);
    auto dump = [&](std::vector<double>& p) {
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
    };
    visit_params(m, dump);
    visit_state(m, dump);
}

inline void load_checkpoint(FusionModel& m, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, "MFUS", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    std::uint64_t digest = 0;
    in.read(reinterpret_cast<char*>(&digest), 8);
    if (digest != spec_digest(m.spec))
        throw std::runtime_error("checkpoint architecture digest mismatch");
    auto slurp = [&](std::vector<double>& p) {
        in.read(reinterpret_cast<char*>(p.data()),
                static_cast<std::streamsize>(p.size() * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    };
    visit_params(m, slurp);
    visit_state(m, slurp);
}

}  // namespace mmfuse
