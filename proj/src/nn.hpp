#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace foleygram {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Trainable tensor with its gradient accumulator and AdamW moments.
template <typename Scalar>
struct Param {
    Mat<Scalar> value;
    Mat<Scalar> grad;
    Mat<Scalar> m;
    Mat<Scalar> v;

    Param() = default;
    explicit Param(Mat<Scalar> init) : value(std::move(init)) { reset_state(); }

    void reset_state() {
        grad = Mat<Scalar>::Zero(value.rows(), value.cols());
        m = Mat<Scalar>::Zero(value.rows(), value.cols());
        v = Mat<Scalar>::Zero(value.rows(), value.cols());
    }
    void zero_grad() { grad.setZero(); }
};

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

/// One decoupled-weight-decay Adam update. `step` is 1-based.
template <typename Scalar>
void adamw_step(std::span<Param<Scalar> * const> params, const AdamWConfig & cfg, std::uint64_t step) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const auto b1 = static_cast<Scalar>(cfg.beta1);
    const auto b2 = static_cast<Scalar>(cfg.beta2);
    for (Param<Scalar> * p : params) {
        p->m = b1 * p->m + (Scalar(1) - b1) * p->grad;
        p->v = b2 * p->v + (Scalar(1) - b2) * p->grad.cwiseProduct(p->grad);
        const auto lr = static_cast<Scalar>(cfg.lr);
        p->value *= Scalar(1) - lr * static_cast<Scalar>(cfg.weight_decay);
        p->value.array() -= lr * (p->m.array() / static_cast<Scalar>(bc1)) /
                            ((p->v.array() / static_cast<Scalar>(bc2)).sqrt() + static_cast<Scalar>(cfg.eps));
    }
}

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
template <typename Scalar>
Mat<Scalar> uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64 & rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat<Scalar> out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = static_cast<Scalar>(dist(rng));
    return out;
}

/// SplitMix64 finalizer; derives independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix_seed(seed ^ mix_seed(stream));
}

} // namespace foleygram
