#include "diffusion.hpp"

#include "error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace foleygram;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig c;
    c.latent_length = 64;
    c.patch = 4;
    c.width = 8;
    c.blocks = 2;
    c.embedding_dim = 3;
    c.time_features = 8;
    c.control_layers = 2;
    return c;
}

std::vector<float> random_vec(std::size_t n, std::mt19937_64 & rng, float scale = 1.0f) {
    std::normal_distribution<float> g(0.0f, scale);
    std::vector<float> v(n);
    for (float & x : v) x = g(rng);
    return v;
}

Conditioning full_conditioning(int dim) {
    Conditioning c;
    for (int m = 0; m < 3; ++m) {
        std::vector<float> e(static_cast<size_t>(dim));
        for (int i = 0; i < dim; ++i) e[static_cast<size_t>(i)] = 0.3f * static_cast<float>(m + 1) - 0.1f * i;
        c.embeddings[static_cast<size_t>(m)] = e;
    }
    return c;
}

ErrorCode code_of(auto && f) {
    try {
        f();
    } catch (const Error & e) {
        return e.code();
    }
    return static_cast<ErrorCode>(0);
}

} // namespace

TEST_CASE("schedule construction") {
    const NoiseSchedule one = build_schedule(1, 0.5, 0.5);
    CHECK(one.alpha_bar(1) == doctest::Approx(0.5));
    const NoiseSchedule flat = build_schedule(3, 0.01, 0.01);
    CHECK(std::abs(flat.alpha_bar(3) - 0.970299) < 1e-12);
    const NoiseSchedule s = build_schedule();
    CHECK(s.steps() == 1000);
    CHECK(s.alpha_bar(1000) < s.alpha_bar(1));
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha(t) > 0.0);
        CHECK(s.alpha(t) < 1.0);
        CHECK(std::abs(s.alpha_bar(t) - s.alpha_bar(t - 1) * s.alpha(t)) < 1e-12);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
    CHECK(code_of([] { build_schedule(0); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { build_schedule(10, 0.0, 0.1); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { build_schedule(10, 0.2, 0.1); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([] { build_schedule(10, 0.1, 1.0); }) == ErrorCode::InvalidConfig);
    CHECK(code_of([&] { s.alpha_bar(1001); }) == ErrorCode::StepOutOfRange);
}

TEST_CASE("respacing keeps endpoints and composes alphas") {
    const NoiseSchedule s = build_schedule();
    const NoiseSchedule r = s.respaced(150);
    CHECK(r.steps() == 150);
    CHECK(r.timestep(1) == 1);
    CHECK(r.timestep(150) == 1000);
    for (int k = 1; k <= 150; ++k) {
        CHECK(r.alpha_bar(k) == s.alpha_bar(r.timestep(k)));
        CHECK(r.alpha(k) == doctest::Approx(r.alpha_bar(k) / r.alpha_bar(k - 1)).epsilon(1e-14));
    }
    CHECK(s.respaced(1000).alpha(500) == doctest::Approx(s.alpha(500)).epsilon(1e-14));
    CHECK(code_of([&] { s.respaced(1001); }) == ErrorCode::InvalidSteps);
    CHECK(code_of([&] { s.respaced(0); }) == ErrorCode::InvalidSteps);
}

TEST_CASE("closed-form examples") {
    const std::vector<float> z0 = {1.0f, 0.0f};
    const std::vector<float> eps = {0.0f, 1.0f};
    const auto zt = forward_sample(z0, 0.64, eps);
    CHECK(zt[0] == doctest::Approx(0.8));
    CHECK(zt[1] == doctest::Approx(0.6));
    const auto v = v_target(z0, eps, 0.64);
    CHECK(v[0] == doctest::Approx(-0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(forward_sample(z0, 1.0, eps) == z0);
    CHECK(forward_sample(z0, 0.0, eps) == eps);
    CHECK(v_target(z0, eps, 1.0) == eps);
    const auto neg = v_target(z0, eps, 0.0);
    CHECK(neg[0] == -1.0f);
    CHECK(v_to_epsilon(v, zt, 1.0) == v);
    CHECK(v_to_epsilon(v, zt, 0.0) == zt);
}

TEST_CASE("v round trip recovers epsilon") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> z0(32);
    std::vector<double> eps(32);
    for (auto & x : z0) x = g(rng);
    for (auto & x : eps) x = g(rng);
    const NoiseSchedule s = build_schedule();
    for (double ab : {0.3, s.alpha_bar(1), s.alpha_bar(1000)}) {
        const auto zt = forward_sample(z0, ab, eps);
        const auto back = v_to_epsilon(v_target(z0, eps, ab), zt, ab);
        for (size_t i = 0; i < eps.size(); ++i) CHECK(std::abs(back[i] - eps[i]) < 1e-12);
    }
}

TEST_CASE("posterior variance identity") {
    const NoiseSchedule s = build_schedule();
    for (int t = 1; t <= 1000; ++t) {
        const double closed = (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * (1.0 - s.alpha(t));
        CHECK(std::abs(s.posterior_variance(t) - closed) < 1e-12);
    }
    CHECK(s.posterior_variance(1) == 0.0);
}

TEST_CASE("CFG special cases") {
    const Denoiser net(tiny_config(), 3);
    std::mt19937_64 rng(2);
    const auto zt = random_vec(64, rng);
    const auto ctrl = random_vec(64, rng, 0.2f);
    const Conditioning cond = full_conditioning(3);
    const auto vc = net.forward(zt, 500, cond, ctrl);
    const auto vu = net.forward(zt, 500, Conditioning::unconditional(), ctrl);
    CHECK(cfg_predict(net, zt, 500, cond, ctrl, 1.0) == vc);
    CHECK(cfg_predict(net, zt, 500, cond, ctrl, 0.0) == vu);
    const auto v2 = cfg_predict(net, zt, 500, cond, ctrl, 2.0);
    for (size_t i = 0; i < v2.size(); ++i) CHECK(v2[i] == doctest::Approx(2.0 * vc[i] - vu[i]).epsilon(1e-6));
    CHECK(vc != vu);
}

TEST_CASE("one-step sampling equals a single posterior-mean step") {
    const Denoiser net(tiny_config(), 4);
    const NoiseSchedule s = build_schedule();
    const Conditioning cond = full_conditioning(3);
    std::vector<float> z_init(64);
    for (size_t i = 0; i < z_init.size(); ++i) z_init[i] = 0.01f * static_cast<float>(i) - 0.3f;
    const NoiseSource stub = [&](std::span<float> out) { std::copy(z_init.begin(), z_init.end(), out.begin()); };
    SampleOptions opts;
    opts.steps = 1;
    opts.guidance = 1.0;
    const auto z0 = sample_latent(net, s, cond, {}, opts, stub);
    const NoiseSchedule r = s.respaced(1);
    const auto v = net.forward(z_init, 1000, cond, {});
    const auto eps = v_to_epsilon(v, z_init, r.alpha_bar(1));
    CHECK(z0 == posterior_mean(z_init, eps, r.alpha(1), r.alpha_bar(1)));
}

TEST_CASE("sampling is deterministic and w = 1 equals CFG disabled") {
    const Denoiser net(tiny_config(), 5);
    const NoiseSchedule s = build_schedule(100);
    const Conditioning cond = full_conditioning(3);
    ControlSignal ctrl;
    ctrl.values.assign(64, 0.2);
    SampleOptions opts;
    opts.steps = 20;
    const Waveform a = sample(net, s, cond, ctrl, opts, 9, 4410);
    const Waveform b = sample(net, s, cond, ctrl, opts, 9, 4410);
    CHECK(a.samples == b.samples);
    opts.guidance = 1.0;
    const auto w1 = sample_latent(net, s, cond, {}, opts, gaussian_noise(11));
    opts.use_cfg = false;
    const auto off = sample_latent(net, s, cond, {}, opts, gaussian_noise(11));
    CHECK(w1 == off);
    opts.steps = 101;
    CHECK(code_of([&] { sample_latent(net, s, cond, {}, opts, gaussian_noise(1)); }) == ErrorCode::InvalidSteps);
}

TEST_CASE("forward marginal second moment") {
    std::mt19937_64 rng(6);
    std::normal_distribution<float> g(0.0f, 1.0f);
    const NoiseSchedule s = build_schedule();
    const std::vector<float> z0 = random_vec(16, rng);
    double z0_sq = 0.0;
    for (float x : z0) z0_sq += static_cast<double>(x) * x;
    for (int t : {10, 300, 900}) {
        double acc = 0.0;
        const int draws = 10000;
        std::vector<float> eps(16);
        for (int d = 0; d < draws; ++d) {
            for (float & e : eps) e = g(rng);
            for (float x : forward_sample(z0, t, eps, s)) acc += static_cast<double>(x) * x;
        }
        const double expected = s.alpha_bar(t) * z0_sq + (1.0 - s.alpha_bar(t)) * 16.0;
        CHECK(std::abs(acc / draws - expected) / expected < 0.01);
    }
}

TEST_CASE("codec decode clamps into [-1, 1]") {
    const std::vector<float> z = {-3.0f, 0.25f, 2.0f};
    const Waveform w = SignalCodec{}.decode(z, 4410);
    CHECK(w.samples == std::vector<float>{-1.0f, 0.25f, 1.0f});
    CHECK(SignalCodec{}.encode(w) == w.samples);
}

TEST_CASE("whole-set dropout trains only the unconditional mode") {
    Denoiser net(tiny_config(), 8);
    const NoiseSchedule s = build_schedule(50);
    std::mt19937_64 rng(8);
    std::vector<GenTrainItem> pool(3);
    for (auto & item : pool) {
        item.z0 = random_vec(64, rng, 0.5f);
        item.cond = full_conditioning(3);
    }
    GenTrainConfig gc;
    gc.steps = 4;
    gc.batch = 2;
    gc.weight_decay = 0.0;
    gc.modality_dropout = 0.0;
    gc.unconditional_dropout = 1.0;
    const Eigen::MatrixXf before = net.projection_params()[0]->value;
    std::uint64_t step = 0;
    train_generator(net, pool, s, gc, step);
    // An all-absent conditioning vector is zero, so the projection weights get no gradient.
    CHECK(net.projection_params()[0]->value == before);

    gc.unconditional_dropout = 1.5;
    CHECK(code_of([&] { train_generator(net, pool, s, gc, step); }) == ErrorCode::InvalidConfig);
}
