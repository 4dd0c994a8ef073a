#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mmfuse/core/rng.hpp"
#include "mmfuse/neural/model.hpp"

using namespace mmfuse;

namespace {

// Small heterogeneous architecture (~100 parameters): dropout on the audio
// encoder, batch norm on the video encoder, a pass-through text encoder.
FusionSpec tiny_spec() {
    FusionSpec s;
    s.audio_in = 3;
    s.video_in = 3;
    s.text_in = 2;
    s.audio.layers = {{4, 0.5, false}};
    s.video.layers = {{3, 0.0, true}};
    s.text.layers = {};
    s.fusion_width = 5;
    s.fusion_dropout = 0.25;
    s.n_classes = 3;
    return s;
}

Batch tiny_batch(std::uint64_t seed) {
    SeededRng rng(seed);
    Batch b;
    b.labels = {0, 2, 1, 0};
    b.audio = FeatureMatrix(4, 3);
    b.video = FeatureMatrix(4, 3);
    b.text = FeatureMatrix(4, 2);
    for (auto* m : {&b.audio, &b.video, &b.text})
        for (double& v : m->values) v = rng.normal();
    return b;
}

double loss_with_frozen_masks(FusionModel& m, const Batch& b, Mode mode, const SeededRng& rng0) {
    SeededRng rng = rng0;  // copy replays identical dropout masks
    const auto cache = forward(m, b, mode, rng);
    return loss(cache.probs, b.labels);
}

void gradient_check(Mode mode) {
    const auto spec = tiny_spec();
    SeededRng init_rng(101);
    FusionModel model = init_model(spec, init_rng);
    const Batch batch = tiny_batch(55);

    if (mode == Mode::kEval) {
        // give batch norm non-trivial running statistics first
        SeededRng warm(7);
        (void)forward(model, batch, Mode::kTrain, warm);
    }

    const SeededRng mask_rng(909);  // frozen dropout source
    SeededRng fwd_rng = mask_rng;
    auto cache = forward(model, batch, mode, fwd_rng);
    const auto grads_model = backward(model, batch, cache);

    std::vector<std::vector<double>*> params, grads;
    visit_params(model, [&](std::vector<double>& p) { params.push_back(&p); });
    FusionModel& gm = const_cast<FusionModel&>(grads_model);
    visit_params(gm, [&](std::vector<double>& g) { grads.push_back(&g); });
    REQUIRE(params.size() == grads.size());
    REQUIRE(param_count(model) <= 300);

    const double h = 1e-5;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::size_t i = 0; i < params[k]->size(); ++i) {
            const double orig = (*params[k])[i];
            (*params[k])[i] = orig + h;
            const double up = loss_with_frozen_masks(model, batch, mode, mask_rng);
            (*params[k])[i] = orig - h;
            const double dn = loss_with_frozen_masks(model, batch, mode, mask_rng);
            (*params[k])[i] = orig;
            const double fd = (up - dn) / (2.0 * h);
            const double an = (*grads[k])[i];
            const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
            CHECK(std::fabs(fd - an) / denom < 1e-5);
            ++checked;
        }
    }
    CHECK(checked == param_count(model));
}

}  // namespace

TEST_CASE("analytic gradients match finite differences in train mode") {
    gradient_check(Mode::kTrain);
}

TEST_CASE("analytic gradients match finite differences in eval mode") {
    gradient_check(Mode::kEval);
}

TEST_CASE("softmax cross-entropy output gradient is (p - onehot)/N") {
    const auto spec = tiny_spec();
    SeededRng rng(33);
    FusionModel model = init_model(spec, rng);
    const Batch batch = tiny_batch(44);
    SeededRng fwd(1);
    const auto cache = forward(model, batch, Mode::kEval, fwd);
    auto grads = backward(model, batch, cache);

    // output bias gradient = column sums of (p - onehot)/N
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        double expect = 0.0;
        for (std::size_t r = 0; r < batch.size(); ++r) {
            double d = cache.probs.at(r, c);
            if (static_cast<std::size_t>(batch.labels[r]) == c) d -= 1.0;
            expect += d / static_cast<double>(batch.size());
        }
        CHECK(grads.output.b[c] == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("zero input batch yields zero first-layer weight gradients") {
    const auto spec = tiny_spec();
    SeededRng rng(3);
    FusionModel model = init_model(spec, rng);
    Batch batch = tiny_batch(9);
    for (auto* m : {&batch.audio, &batch.video, &batch.text})
        for (double& v : m->values) v = 0.0;
    SeededRng fwd(2);
    const auto cache = forward(model, batch, Mode::kEval, fwd);
    auto grads = backward(model, batch, cache);
    for (double g : grads.audio_enc.blocks[0].dense.W) CHECK(g == 0.0);
    for (double g : grads.video_enc.blocks[0].dense.W) CHECK(g == 0.0);
}

TEST_CASE("all-zero weights give uniform softmax") {
    const auto spec = tiny_spec();
    FusionModel model = FusionModel::shaped(spec);  // zero weights and biases
    const Batch batch = tiny_batch(5);
    SeededRng rng(0);
    const auto cache = forward(model, batch, Mode::kEval, rng);
    for (double p : cache.probs.values) CHECK(p == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("eval forward is deterministic and rows sum to one") {
    const auto spec = tiny_spec();
    SeededRng rng(17);
    FusionModel model = init_model(spec, rng);
    const Batch batch = tiny_batch(21);
    SeededRng r1(5), r2(999);
    const auto a = forward(model, batch, Mode::kEval, r1);
    const auto b = forward(model, batch, Mode::kEval, r2);
    CHECK(a.probs.values == b.probs.values);  // no stochastic ops in eval
    for (std::size_t r = 0; r < a.probs.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < a.probs.cols; ++c) {
            sum += a.probs.at(r, c);
            CHECK(a.probs.at(r, c) > 0.0);
            CHECK(a.probs.at(r, c) < 1.0);
        }
        CHECK(sum == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("batch norm in eval mode treats rows independently") {
    const auto spec = tiny_spec();
    SeededRng rng(71);
    FusionModel model = init_model(spec, rng);
    Batch pair = tiny_batch(31);
    SeededRng warm(1);
    (void)forward(model, pair, Mode::kTrain, warm);  // populate running stats

    SeededRng f1(0);
    const auto both = forward(model, pair, Mode::kEval, f1);
    Batch solo;
    solo.labels = {pair.labels[1]};
    solo.audio = take_rows(pair.audio, {1});
    solo.video = take_rows(pair.video, {1});
    solo.text = take_rows(pair.text, {1});
    SeededRng f2(0);
    const auto one = forward(model, solo, Mode::kEval, f2);
    for (std::size_t c = 0; c < both.probs.cols; ++c)
        CHECK(one.probs.at(0, c) == both.probs.at(1, c));
}

TEST_CASE("Glorot initialization: zero biases, bounded weights, seed determinism") {
    const auto spec = FusionSpec::defaults(80, 16, 120);
    SeededRng r1(42), r2(42);
    FusionModel a = init_model(spec, r1);
    FusionModel b = init_model(spec, r2);

    std::vector<double> va, vb;
    visit_params(a, [&](std::vector<double>& p) { va.insert(va.end(), p.begin(), p.end()); });
    visit_params(b, [&](std::vector<double>& p) { vb.insert(vb.end(), p.begin(), p.end()); });
    CHECK(va == vb);

    for (double bias : a.fusion.dense.b) CHECK(bias == 0.0);
    for (double bias : a.output.b) CHECK(bias == 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(a.output.in + a.output.out));
    for (double w : a.output.W) CHECK(std::fabs(w) <= limit);
}

TEST_CASE("loss oracles") {
    FeatureMatrix uniform(4, 6, 1.0 / 6.0);
    CHECK(loss(uniform, {0, 1, 2, 3}) == Catch::Approx(std::log(6.0)).margin(1e-9));

    FeatureMatrix onehot(2, 3);
    onehot.at(0, 1) = 1.0;
    onehot.at(1, 0) = 1.0;
    CHECK(loss(onehot, {1, 0}) <= 1e-12 * 3);

    FeatureMatrix mixed(2, 2);
    mixed.at(0, 0) = 0.8;
    mixed.at(0, 1) = 0.2;
    mixed.at(1, 0) = 0.4;
    mixed.at(1, 1) = 0.6;
    // -(ln 0.8 + ln 0.6)/2
    CHECK(loss(mixed, {0, 1}) == Catch::Approx(0.3669845875401002).margin(1e-9));

    // clamp: probability exactly 0 on the true class
    FeatureMatrix zero(1, 2);
    zero.at(0, 1) = 1.0;
    CHECK(loss(zero, {0}) == Catch::Approx(-std::log(1e-12)));

    CHECK_THROWS_AS(loss(mixed, {0}), std::invalid_argument);
    CHECK_THROWS_AS(loss(mixed, {0, 5}), std::invalid_argument);
}

TEST_CASE("Adam single-step oracle") {
    double theta = 1.0;
    double g = 1.0;
    AdamState s;
    s.lr = 0.001;
    s.m.assign(1, 0.0);
    s.v.assign(1, 0.0);
    adam_step_flat({&theta}, {&g}, {1}, s);
    // first step: m-hat/sqrt(v-hat) = 1, so delta = -lr/(1 + eps)
    CHECK(theta == Catch::Approx(1.0 - 0.001 / (1.0 + 1e-8)).margin(1e-15));

    // zero gradient with fresh moments leaves parameters unchanged
    double g0 = 0.0;
    double th0 = 0.25;
    AdamState s0;
    s0.lr = 0.001;
    s0.m.assign(1, 0.0);
    s0.v.assign(1, 0.0);
    adam_step_flat({&th0}, {&g0}, {1}, s0);
    CHECK(th0 == 0.25);

    // first-step direction opposes the gradient sign
    for (double gg : {3.0, -0.02, 1e-6}) {
        double th = 0.5;
        AdamState fresh;
        fresh.lr = 0.001;
        fresh.m.assign(1, 0.0);
        fresh.v.assign(1, 0.0);
        adam_step_flat({&th}, {&gg}, {1}, fresh);
        CHECK(((gg > 0.0 && th < 0.5) || (gg < 0.0 && th > 0.5)));
    }
}

TEST_CASE("20 Adam steps on theta^2 match a hand-coded reference") {
    double theta = 1.0;
    AdamState s;
    s.lr = 0.001;
    s.m.assign(1, 0.0);
    s.v.assign(1, 0.0);

    // independent reference evaluation of the published update equations
    double ref = 1.0, rm = 0.0, rv = 0.0;
    for (int t = 1; t <= 20; ++t) {
        const double g = 2.0 * theta;
        adam_step_flat({&theta}, {&g}, {1}, s);

        const double rg = 2.0 * ref;
        rm = 0.9 * rm + 0.1 * rg;
        rv = 0.999 * rv + 0.001 * rg * rg;
        const double mhat = rm / (1.0 - std::pow(0.9, t));
        const double vhat = rv / (1.0 - std::pow(0.999, t));
        ref -= 0.001 * mhat / (std::sqrt(vhat) + 1e-8);

        CHECK(theta == Catch::Approx(ref).margin(1e-12));
    }
}

TEST_CASE("non-finite gradients raise a numeric error") {
    double theta = 1.0;
    const double g = std::numeric_limits<double>::quiet_NaN();
    AdamState s;
    s.m.assign(1, 0.0);
    s.v.assign(1, 0.0);
    CHECK_THROWS_AS(adam_step_flat({&theta}, {&g}, {1}, s), NumericError);
}

TEST_CASE("inverted dropout preserves expectation within 2 percent") {
    LayerBlock blk;
    const std::size_t w = 100;
    blk.dense.resize(w, w);
    for (std::size_t i = 0; i < w; ++i) blk.dense.W[i * w + i] = 1.0;  // identity
    blk.dropout = 0.4;
    FeatureMatrix ones(100, w, 1.0);
    SeededRng rng(2024);
    BlockCache cache;
    detail::block_forward(blk, ones, Mode::kTrain, rng, cache);
    double mean = 0.0;
    for (double v : cache.out.values) mean += v;
    mean /= static_cast<double>(cache.out.values.size());  // 10,000 draws
    CHECK(mean == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("checkpoint roundtrip restores bit-identical predictions") {
    const auto spec = tiny_spec();
    SeededRng rng(88);
    FusionModel model = init_model(spec, rng);
    const Batch batch = tiny_batch(12);
    SeededRng warm(6);
    (void)forward(model, batch, Mode::kTrain, warm);  // non-default BN state
    SeededRng e1(0);
    const auto before = forward(model, batch, Mode::kEval, e1);

    const auto path = (std::filesystem::temp_directory_path() / "mmfuse_ckpt_t.bin").string();
    save_checkpoint(model, path);

    SeededRng rng2(1234);
    FusionModel other = init_model(spec, rng2);
    load_checkpoint(other, path);
    SeededRng e2(0);
    const auto after = forward(other, batch, Mode::kEval, e2);
    CHECK(before.probs.values == after.probs.values);

    // architecture mismatch is rejected via the spec digest
    auto wrong_spec = spec;
    wrong_spec.fusion_width = 7;
    FusionModel wrong = FusionModel::shaped(wrong_spec);
    CHECK_THROWS_WITH(load_checkpoint(wrong, path),
                      Catch::Matchers::ContainsSubstring("digest"));
    std::remove(path.c_str());
}

TEST_CASE("untrained model loss on balanced labels is near ln K") {
    const auto spec = FusionSpec::defaults(20, 8, 30);
    SeededRng rng(7);
    FusionModel model = init_model(spec, rng);
    Batch batch;
    const std::size_t n = 36;
    batch.audio = FeatureMatrix(n, 20);
    batch.video = FeatureMatrix(n, 8);
    batch.text = FeatureMatrix(n, 30);
    SeededRng data(3);
    for (auto* m : {&batch.audio, &batch.video, &batch.text})
        for (double& v : m->values) v = data.normal();
    for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(static_cast<int>(i % 6));
    SeededRng fwd(0);
    const auto cache = forward(model, batch, Mode::kEval, fwd);
    CHECK(loss(cache.probs, batch.labels) == Catch::Approx(std::log(6.0)).margin(0.1));
}
