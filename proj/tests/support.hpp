#pragma once

#include "gram_loss.hpp"

#include <Eigen/Core>

#include <functional>
#include <random>

namespace foleygram::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 & rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = g(rng);
    return m;
}

inline Eigen::MatrixXd unit_columns(Eigen::MatrixXd m) {
    m.colwise().normalize();
    return m;
}

inline TripletBatch random_batch(Eigen::Index n, Eigen::Index b, std::mt19937_64 & rng) {
    return {unit_columns(random_matrix(n, b, rng)), unit_columns(random_matrix(n, b, rng)),
            unit_columns(random_matrix(n, b, rng))};
}

/// Central differences of f at x, one coordinate at a time.
inline Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd &)> & f, Eigen::MatrixXd x,
                                        double h = 1e-5) {
    Eigen::MatrixXd g(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double keep = x(r, c);
            x(r, c) = keep + h;
            const double up = f(x);
            x(r, c) = keep - h;
            const double down = f(x);
            x(r, c) = keep;
            g(r, c) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

inline double relative_error(const Eigen::MatrixXd & a, const Eigen::MatrixXd & b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

} // namespace foleygram::testing
