#include "gram_loss.hpp"

#include "error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace foleygram;

TEST_CASE("single-sample batches have zero loss and gradient") {
    std::mt19937_64 rng(1);
    const TripletBatch b = testing::random_batch(8, 1, rng);
    LossConfig cfg;
    CHECK(loss_av2t(b, cfg) == 0.0);
    CHECK(loss_t2av(b, cfg) == 0.0);
    CHECK(loss_combined(b, cfg) == 0.0);
    CHECK(pairwise_infonce_baseline(b, cfg, Modality::Text) == 0.0);
    const TripletGradient g = loss_gradient(b, cfg);
    CHECK(g.audio.norm() == 0.0);
    CHECK(g.video.norm() == 0.0);
    CHECK(g.text.norm() == 0.0);
}

TEST_CASE("equal volumes give log B") {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Constant(5, 5, 0.4);
    LossConfig cfg;
    CHECK(loss_av2t_from_volumes(m, cfg) == doctest::Approx(std::log(5.0)));
    CHECK(loss_t2av_from_volumes(m, cfg) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("hand-evaluated two-sample softmax") {
    Eigen::MatrixXd m(2, 2);
    m << 0.1, 0.9, 0.9, 0.1;
    LossConfig cfg;
    cfg.temperature = 1.0;
    const double expected = std::log(1.0 + std::exp(-0.8));
    CHECK(std::abs(expected - 0.37110) < 5e-6);
    CHECK(loss_av2t_from_volumes(m, cfg) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(loss_t2av_from_volumes(m, cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("asymmetric volumes: directions differ and combined is their mean") {
    Eigen::MatrixXd m(2, 2);
    m << 0.1, 0.5, 0.9, 0.2;
    LossConfig cfg;
    cfg.temperature = 1.0;
    // Column softmax (over texts) for each audio-video column j.
    const double av2t = 0.5 * (-std::log(std::exp(-0.1) / (std::exp(-0.1) + std::exp(-0.9))) -
                               std::log(std::exp(-0.2) / (std::exp(-0.5) + std::exp(-0.2))));
    // Row softmax (over audio-video pairs) for each text i.
    const double t2av = 0.5 * (-std::log(std::exp(-0.1) / (std::exp(-0.1) + std::exp(-0.5))) -
                               std::log(std::exp(-0.2) / (std::exp(-0.9) + std::exp(-0.2))));
    CHECK(loss_av2t_from_volumes(m, cfg) == doctest::Approx(av2t).epsilon(1e-12));
    CHECK(loss_t2av_from_volumes(m, cfg) == doctest::Approx(t2av).epsilon(1e-12));
    CHECK(av2t != doctest::Approx(t2av));
}

TEST_CASE("symmetric volume matrix makes the directions agree") {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd m = testing::random_matrix(4, 4, rng).cwiseAbs();
    m = (0.5 * (m + m.transpose())).eval();
    LossConfig cfg;
    CHECK(loss_av2t_from_volumes(m, cfg) == doctest::Approx(loss_t2av_from_volumes(m, cfg)).epsilon(1e-12));
}

TEST_CASE("volume matrix layout") {
    std::mt19937_64 rng(9);
    const TripletBatch b = testing::random_batch(6, 3, rng);
    const Eigen::MatrixXd m = volume_matrix(b);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            Eigen::MatrixXd cols(6, 3);
            cols << b.text.col(i), b.audio.col(j), b.video.col(j);
            CHECK(m(i, j) == doctest::Approx(volume(cols)).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss gradient matches finite differences") {
    std::mt19937_64 rng(7);
    LossConfig cfg;
    for (int k = 0; k < 5; ++k) {
        const TripletBatch b = testing::random_batch(8, 4, rng);
        const TripletGradient g = loss_gradient(b, cfg);
        // The loss is evaluated without the unit-norm check so off-sphere
        // perturbations are allowed.
        auto loss_with = [&](int which) {
            return [&, which](const Eigen::MatrixXd & x) {
                TripletBatch p = b;
                (which == 0 ? p.audio : which == 1 ? p.video : p.text) = x;
                const Eigen::MatrixXd m = volume_matrix(p);
                return 0.5 * (loss_av2t_from_volumes(m, cfg) + loss_t2av_from_volumes(m, cfg));
            };
        };
        CHECK(testing::relative_error(g.audio, testing::numeric_gradient(loss_with(0), b.audio)) < 1e-4);
        CHECK(testing::relative_error(g.video, testing::numeric_gradient(loss_with(1), b.video)) < 1e-4);
        CHECK(testing::relative_error(g.text, testing::numeric_gradient(loss_with(2), b.text)) < 1e-4);
    }
}

TEST_CASE("higher temperature shrinks the gradient") {
    std::mt19937_64 rng(7);
    const TripletBatch b = testing::random_batch(8, 4, rng);
    double last = 1e300;
    for (double tau : {1.0, 10.0, 100.0}) {
        LossConfig cfg;
        cfg.temperature = tau;
        const TripletGradient g = loss_gradient(b, cfg);
        const double norm = std::sqrt(g.audio.squaredNorm() + g.video.squaredNorm() + g.text.squaredNorm());
        CHECK(norm < last);
        last = norm;
    }
}

TEST_CASE("pairwise baseline by hand") {
    // Two orthogonal samples, identical across modalities, tau = 1: every
    // direction is -log(e / (e + 1)); two directions per pair, two pairs,
    // averaged per pair.
    Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 2);
    TripletBatch b{x, x, x};
    LossConfig cfg;
    cfg.temperature = 1.0;
    const double one = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(pairwise_infonce_baseline(b, cfg, Modality::Text) == doctest::Approx(2.0 * one).epsilon(1e-12));
}

TEST_CASE("pairwise anchor matters on asymmetric batches") {
    std::mt19937_64 rng(13);
    const TripletBatch b = testing::random_batch(6, 4, rng);
    LossConfig cfg;
    CHECK(pairwise_infonce_baseline(b, cfg, Modality::Text) !=
          doctest::Approx(pairwise_infonce_baseline(b, cfg, Modality::Audio)));
}

TEST_CASE("pairwise gradient matches finite differences") {
    std::mt19937_64 rng(17);
    const TripletBatch b = testing::random_batch(6, 4, rng);
    LossConfig cfg;
    const TripletGradient g = pairwise_infonce_gradient(b, cfg, Modality::Text);
    auto f = [&](const Eigen::MatrixXd & x) {
        TripletBatch p = b;
        p.audio = x;
        return pairwise_infonce_baseline(p, cfg, Modality::Text);
    };
    // The baseline validates unit norms, so probe along the sphere only by
    // checking the tangent component.
    const Eigen::MatrixXd fd = testing::numeric_gradient(
        [&](const Eigen::MatrixXd & x) {
            Eigen::MatrixXd u = x;
            u.colwise().normalize();
            return f(u);
        },
        b.audio);
    Eigen::MatrixXd tangent = g.audio;
    for (Eigen::Index j = 0; j < tangent.cols(); ++j) {
        tangent.col(j) -= b.audio.col(j) * b.audio.col(j).dot(g.audio.col(j));
    }
    CHECK(testing::relative_error(tangent, fd) < 1e-4);
}

TEST_CASE("validation errors") {
    std::mt19937_64 rng(2);
    TripletBatch b = testing::random_batch(8, 4, rng);
    LossConfig cfg;
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(validate(b, cfg), Error);
    cfg = LossConfig{};
    cfg.negatives = 5;
    CHECK_THROWS_AS(validate(b, cfg), Error);
    TripletBatch bad = b;
    bad.audio *= 2.0;
    try {
        validate(bad, LossConfig{});
        FAIL("expected InvalidBatch");
    } catch (const Error & e) {
        CHECK(e.code() == ErrorCode::InvalidBatch);
    }
}
