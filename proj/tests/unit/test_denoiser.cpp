#include "denoiser.hpp"

#include "diffusion.hpp"
#include "error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace foleygram;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig c;
    c.latent_length = 48;
    c.patch = 4;
    c.width = 6;
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

Conditioning some_conditioning() {
    Conditioning c;
    c.embeddings[0] = std::vector<float>{0.5f, -0.2f, 0.1f};
    c.embeddings[2] = std::vector<float>{-0.3f, 0.4f, 0.7f};
    return c;
}

double loss_of(const Denoiser & net, std::span<const float> zt, int t, const Conditioning & c,
               std::span<const float> ctrl, std::span<const float> target) {
    const auto out = net.forward(zt, t, c, ctrl);
    double s = 0.0;
    for (size_t i = 0; i < out.size(); ++i) s += 0.5 * std::pow(static_cast<double>(out[i]) - target[i], 2.0);
    return s;
}

// Central differences on a few entries of every parameter, in float; the
// tolerance reflects single precision.
void check_gradients(Denoiser & net, std::vector<Param<float> *> params, std::span<const float> zt, int t,
                     const Conditioning & c, std::span<const float> ctrl, std::span<const float> target,
                     const GradientScope & scope) {
    net.zero_grad();
    net.accumulate_gradient(zt, t, c, ctrl, target, 1.0f, scope);
    std::mt19937_64 rng(99);
    for (Param<float> * p : params) {
        for (int k = 0; k < 3; ++k) {
            const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p->value.size()));
            float & w = p->value.data()[idx];
            const float keep = w;
            const float h = 1e-2f;
            w = keep + h;
            const double up = loss_of(net, zt, t, c, ctrl, target);
            w = keep - h;
            const double down = loss_of(net, zt, t, c, ctrl, target);
            w = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad.data()[idx];
            CHECK(std::abs(fd - an) <= 2e-2 * std::max(1.0, std::abs(fd)));
        }
    }
}

} // namespace

TEST_CASE("modality masks") {
    CHECK(parse_modality_mask("avt") == kMaskAll);
    CHECK(parse_modality_mask("VT") == (kMaskVideo | kMaskText));
    CHECK(modality_mask_name(kMaskAudio | kMaskText) == "AT");
    CHECK_THROWS_AS(parse_modality_mask("ax"), Error);
    CHECK_THROWS_AS(parse_modality_mask(""), Error);
    const auto masks = ablation_masks();
    CHECK(masks.size() == 7);
    CHECK(modality_mask_name(masks[0]) == "AVT");
    CHECK(modality_mask_name(masks[6]) == "T");
    const Conditioning c = some_conditioning();
    CHECK(c.mask() == (kMaskAudio | kMaskText));
    CHECK(c.masked(kMaskText).mask() == kMaskText);
    CHECK(Conditioning::unconditional().mask() == 0);
}

TEST_CASE("control branch starts at exactly zero") {
    const Denoiser net(tiny_config(), 1);
    std::mt19937_64 rng(1);
    const auto zt = random_vec(48, rng);
    const auto ctrl = random_vec(48, rng);
    CHECK(net.forward(zt, 200, some_conditioning(), ctrl) == net.forward(zt, 200, some_conditioning(), {}));
}

TEST_CASE("gradients match finite differences in each scope") {
    Denoiser net(tiny_config(), 2);
    std::mt19937_64 rng(2);
    // Move the control projections off zero so their gradients are visible.
    for (Param<float> * p : net.control_params()) p->value = p->value.unaryExpr([&](float) {
        return std::normal_distribution<float>(0.0f, 0.3f)(rng);
    });
    const auto zt = random_vec(48, rng);
    const auto ctrl = random_vec(48, rng, 0.5f);
    const auto target = random_vec(48, rng);
    const Conditioning c = some_conditioning();
    check_gradients(net, net.main_params(), zt, 37, c, ctrl, target, GradientScope{true, false, false});
    check_gradients(net, net.projection_params(), zt, 37, c, ctrl, target, GradientScope{false, true, false});
    check_gradients(net, net.control_params(), zt, 37, c, ctrl, target, GradientScope{false, false, true});
}

TEST_CASE("gradient scope leaves other parameters untouched") {
    Denoiser net(tiny_config(), 3);
    std::mt19937_64 rng(3);
    const auto zt = random_vec(48, rng);
    const auto ctrl = random_vec(48, rng);
    const auto target = random_vec(48, rng);
    net.zero_grad();
    net.accumulate_gradient(zt, 10, some_conditioning(), ctrl, target, 1.0f, GradientScope{false, true, true});
    for (Param<float> * p : net.main_params()) CHECK(p->grad.norm() == 0.0f);
    double projection = 0.0;
    for (Param<float> * p : net.projection_params()) projection += p->grad.norm();
    CHECK(projection > 0.0);
}

TEST_CASE("phase-2 training leaves main weights frozen and learns") {
    DenoiserConfig cfg = tiny_config();
    Denoiser net(cfg, 4);
    const NoiseSchedule s = build_schedule(50);
    std::mt19937_64 rng(4);
    std::vector<GenTrainItem> pool(4);
    for (auto & item : pool) {
        item.z0 = random_vec(48, rng, 0.5f);
        item.control = random_vec(48, rng, 0.1f);
        item.cond = some_conditioning();
    }
    std::vector<Eigen::MatrixXf> before;
    for (Param<float> * p : net.main_params()) before.push_back(p->value);
    GenTrainConfig gc;
    gc.phase = TrainPhase::Control;
    gc.steps = 5;
    gc.batch = 2;
    std::uint64_t step = 0;
    const auto r = train_generator(net, pool, s, gc, step);
    CHECK(step == 5);
    CHECK(r.loss_curve.size() == 5);
    size_t k = 0;
    for (Param<float> * p : net.main_params()) CHECK(p->value == before[k++]);
    double ctrl = 0.0;
    for (Param<float> * p : net.control_params()) ctrl += p->value.cwiseAbs().sum();
    CHECK(ctrl > 0.0);
}

TEST_CASE("perfect predictor has zero loss") {
    Denoiser net(tiny_config(), 5);
    std::mt19937_64 rng(5);
    const auto zt = random_vec(48, rng);
    const auto out = net.forward(zt, 3, some_conditioning(), {});
    net.zero_grad();
    CHECK(net.accumulate_gradient(zt, 3, some_conditioning(), {}, out, 1.0f, GradientScope{}) == 0.0);
}

TEST_CASE("checkpoint round trip") {
    Denoiser net(tiny_config(), 6);
    const Checkpoint ck = Checkpoint::deserialize(net.to_checkpoint().serialize());
    const Denoiser back = Denoiser::from_checkpoint(ck);
    std::mt19937_64 rng(6);
    const auto zt = random_vec(48, rng);
    const auto ctrl = random_vec(48, rng);
    CHECK(back.forward(zt, 9, some_conditioning(), ctrl) == net.forward(zt, 9, some_conditioning(), ctrl));
}

TEST_CASE("shape errors") {
    const Denoiser net(tiny_config(), 7);
    const std::vector<float> short_latent(10, 0.0f);
    CHECK_THROWS_AS(net.forward(short_latent, 1, {}, {}), Error);
    DenoiserConfig bad = tiny_config();
    bad.latent_length = 50;
    CHECK_THROWS_AS(Denoiser(bad, 0), Error);
}
