#include "toy_encoders.hpp"

#include "checkpoint.hpp"
#include "error.hpp"
#include "foley_data.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace foleygram;

TEST_CASE("checkpoint container round trip and validation") {
    Checkpoint ck;
    ck.add("w", {2, 3}, {1, 2, 3, 4, 5, 6});
    ck.add_u64("meta.seed", 0x0123456789abcdefULL);
    const auto bytes = ck.serialize();
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GFCK");
    CHECK((bytes[4] | bytes[5] << 8) == 1);
    const Checkpoint back = Checkpoint::deserialize(bytes);
    CHECK(back.get("w").data == std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(back.get("w").dims == std::vector<std::uint32_t>{2, 3});
    CHECK(back.get_u64("meta.seed") == 0x0123456789abcdefULL);
    CHECK(back.find("missing") == nullptr);

    auto code = [](auto && f) {
        try {
            f();
        } catch (const Error & e) {
            return e.code();
        }
        return static_cast<ErrorCode>(0);
    };
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 3);
    CHECK(code([&] { Checkpoint::deserialize(truncated); }) == ErrorCode::CorruptHeader);
    std::vector<std::uint8_t> magic = bytes;
    magic[0] = 'X';
    CHECK(code([&] { Checkpoint::deserialize(magic); }) == ErrorCode::CorruptHeader);
    std::vector<std::uint8_t> version = bytes;
    version[4] = 2;
    CHECK(code([&] { Checkpoint::deserialize(version); }) == ErrorCode::UnsupportedFormat);
    CHECK(code([&] { ck.add("bad", {2, 2}, {1.0f}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("dataset generation") {
    const Dataset a = generate_dataset(2, 4, 0);
    const Dataset b = generate_dataset(2, 4, 0);
    CHECK(a.to_checkpoint().serialize() == b.to_checkpoint().serialize());
    const Dataset one = generate_dataset(8, 8, 3);
    std::set<int> classes;
    for (const auto & s : one.samples) classes.insert(s.class_id);
    CHECK(classes.size() == 8);

    const Dataset d = generate_dataset(8, 256, 1);
    double within = 0.0;
    double between = 0.0;
    int nw = 0;
    int nb = 0;
    for (size_t i = 0; i < 64; ++i) {
        for (size_t j = i + 1; j < 64; ++j) {
            const double dist = (d.samples[i].audio_view - d.samples[j].audio_view).norm();
            if (d.samples[i].class_id == d.samples[j].class_id) {
                within += dist;
                ++nw;
            } else {
                between += dist;
                ++nb;
            }
        }
    }
    CHECK(between / nb > within / nw);

    const Dataset reloaded = Dataset::from_checkpoint(d.to_checkpoint());
    CHECK(reloaded.samples[5].audio_view == d.samples[5].audio_view);
    CHECK(reloaded.samples[5].text_view == d.samples[5].text_view);
    CHECK(template_prompt(1, 0, 1) == "person scratch once material-1");
}

TEST_CASE("encoder properties") {
    const Dataset d = generate_dataset(4, 16, 2);
    EncoderParams p = init_encoders(d.audio_dim(), d.video_dim(), d.text_dim(), 5);
    const auto e1 = encode(p, d.samples[0]);
    const auto e2 = encode(p, d.samples[0]);
    for (int m = 0; m < 3; ++m) {
        CHECK(e1[static_cast<size_t>(m)].values == e2[static_cast<size_t>(m)].values);
        CHECK(e1[static_cast<size_t>(m)].values.norm() == doctest::Approx(1.0));
    }
    SyntheticSample perturbed = d.samples[0];
    perturbed.video_view[0] += 0.5;
    const auto e3 = encode(p, perturbed);
    CHECK(e3[0].values == e1[0].values);
    CHECK(e3[1].values != e1[1].values);
    CHECK(e3[2].values == e1[2].values);

    Mlp & audio = p.audio;
    audio.w1.value.setZero();
    audio.w2.value.setZero();
    audio.b2.value = Eigen::MatrixXd::Constant(audio.b2.value.rows(), 1, 2.0);
    const auto ez = encode(p, d.samples[3]);
    CHECK((ez[0].values - Eigen::VectorXd::Constant(ez[0].values.size(), 1.0 / std::sqrt(ez[0].values.size())))
              .norm() < 1e-12);
}

TEST_CASE("encoder backward matches finite differences") {
    const Dataset d = generate_dataset(4, 8, 3);
    EncoderParams p = init_encoders(d.audio_dim(), d.video_dim(), d.text_dim(), 6);
    Eigen::MatrixXd views(d.audio_dim(), 8);
    for (int i = 0; i < 8; ++i) views.col(i) = d.samples[static_cast<size_t>(i)].audio_view;
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd upstream = testing::random_matrix(kEmbeddingDim, 8, rng);
    for (auto * prm : p.params()) prm->zero_grad();
    backward_views(p.audio, views, upstream);
    for (Param<double> * prm : {&p.audio.w1, &p.audio.b1, &p.audio.w2, &p.audio.b2}) {
        const Eigen::MatrixXd analytic = prm->grad;
        const Eigen::MatrixXd keep = prm->value;
        const Eigen::MatrixXd fd = testing::numeric_gradient(
            [&](const Eigen::MatrixXd & x) {
                prm->value = x;
                const double v = (encode_views(p.audio, views).cwiseProduct(upstream)).sum();
                prm->value = keep;
                return v;
            },
            keep);
        CHECK(testing::relative_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("training: zero steps is a no-op, retrieval chance and copies") {
    const Dataset d = generate_dataset(8, 128, 4);
    AlignConfig cfg;
    cfg.steps = 0;
    const TrainState init = init_train_state(d, cfg);
    const AlignRun run = train_alignment(init, d, cfg);
    CHECK(run.state.params.audio.w1.value == init.params.audio.w1.value);
    CHECK(run.state.step == 0);

    std::mt19937_64 rng(3);
    TripletBatch same;
    same.audio = testing::unit_columns(testing::random_matrix(16, 64, rng));
    same.video = same.audio;
    same.text = same.audio;
    std::vector<int> ids;
    for (int i = 0; i < 64; ++i) ids.push_back(i % 8);
    CHECK(evaluate_retrieval(same, ids, 8, AlignmentLoss::Gram).recall_at_1 == 1.0);
    CHECK(evaluate_retrieval(same, ids, 8, AlignmentLoss::PairwiseCosine).recall_at_1 == 1.0);

    // Untrained encoders retrieve at chance: 1/8 within a generous interval.
    const Dataset big = generate_dataset(8, 512, 9);
    const TrainState fresh = init_train_state(big, AlignConfig{});
    const RetrievalReport r = evaluate_retrieval(fresh, big, 8);
    CHECK(r.recall_at_1 < 0.125 + 4.0 * std::sqrt(0.125 * 0.875 / 512.0) + 0.1);
}

TEST_CASE("short GRAM training separates matched and mismatched volumes") {
    const Dataset d = generate_dataset(8, 256, 5);
    const auto [train, test] = split_dataset(d, 0.25);
    CHECK(test.size() == 64);
    AlignConfig cfg;
    cfg.steps = 300;
    cfg.lr = 1e-3;
    const AlignRun run = train_alignment(train, cfg);
    CHECK(run.loss_curve.size() == 300);
    CHECK(run.loss_curve.back() < run.loss_curve.front());
    const AlignmentStats st = alignment_stats(run.state, test);
    CHECK(st.mean_matched_volume < st.mean_mismatched_volume);
    const TrainState back = TrainState::from_checkpoint(Checkpoint::deserialize(run.state.to_checkpoint().serialize()));
    CHECK(back.step == run.state.step);
    CHECK(back.params.text.w2.value == run.state.params.text.w2.value.cast<float>().cast<double>());
}

TEST_CASE("foley clips") {
    const FoleyClip hit = synthesize_clip(0, 0, true, 1, 4410, 4096);
    CHECK(hit.waveform.size() == 4096);
    float peak = 0.0f;
    for (float x : hit.waveform) peak = std::max(peak, std::abs(x));
    CHECK(peak <= 0.9f + 1e-6f);
    CHECK(peak > 0.1f);
    for (size_t i = 0; i < hit.waveform.size(); ++i) CHECK(std::abs(hit.waveform[i]) <= hit.envelope[i] * 0.9f + 1e-6f);

    // The band holding a pure tone dominates the features.
    std::vector<float> tone(4096);
    for (size_t i = 0; i < tone.size(); ++i) tone[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 400.0 * i / 4410.0));
    Eigen::Index band = 0;
    audio_features(tone, 4410, 32).maxCoeff(&band);
    const double lo = std::log(80.0);
    const double hi = std::log(0.45 * 4410.0);
    CHECK(band == static_cast<Eigen::Index>((std::log(400.0) - lo) / (hi - lo) * 32));

    FoleyConfig fc;
    fc.samples = 16;
    const Dataset d = generate_foley_dataset(fc);
    CHECK(d.kind == DatasetKind::Foley);
    CHECK(d.samples[3].waveform.size() == 4096);
    CHECK(d.audio_dim() == 32);
    CHECK(d.video_dim() == 32);
    const Dataset back = Dataset::from_checkpoint(Checkpoint::deserialize(d.to_checkpoint().serialize()));
    CHECK(back.samples[7].waveform == d.samples[7].waveform);
    CHECK(back.sample_rate == 4410);
    fc.classes = 11;
    CHECK_THROWS_AS(generate_foley_dataset(fc), Error);
}
