#include "linalg.hpp"

#include "error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

using namespace foleygram;

namespace {

// Three unit vectors with every pairwise inner product equal to 0.5.
Eigen::MatrixXd half_dot_triple() {
    Eigen::MatrixXd a(3, 3);
    a.col(0) << 1, 0, 0;
    a.col(1) << 0.5, std::sqrt(0.75), 0;
    const double y = (0.5 - 0.25) / std::sqrt(0.75);
    a.col(2) << 0.5, y, std::sqrt(1.0 - 0.25 - y * y);
    return a;
}

} // namespace

TEST_CASE("normalize scales to unit length and rejects zero") {
    Eigen::VectorXd v(2);
    v << 3, 4;
    const Eigen::VectorXd u = normalize(v);
    CHECK(u[0] == doctest::Approx(0.6));
    CHECK(u[1] == doctest::Approx(0.8));
    Eigen::VectorXd e = Eigen::VectorXd::Unit(3, 0);
    CHECK(normalize(e) == e);
    CHECK_THROWS_AS(normalize(Eigen::VectorXd::Zero(2)), Error);
    try {
        normalize(Eigen::VectorXd::Zero(2));
    } catch (const Error & err) {
        CHECK(err.code() == ErrorCode::ZeroVector);
    }
}

TEST_CASE("gram matrix of known configurations") {
    CHECK(gram(Eigen::MatrixXd::Identity(5, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
    Eigen::MatrixXd expected(3, 3);
    expected << 1, .5, .5, .5, 1, .5, .5, .5, 1;
    CHECK((gram(half_dot_triple()) - expected).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd dup(4, 2);
    dup.col(0) = Eigen::VectorXd::Unit(4, 1);
    dup.col(1) = dup.col(0);
    CHECK(gram(dup).isApprox(Eigen::MatrixXd::Ones(2, 2)));
    CHECK_THROWS_AS(gram(Eigen::MatrixXd::Ones(2, 3)), Error);
}

TEST_CASE("volume identities") {
    CHECK(std::abs(volume(Eigen::MatrixXd::Identity(8, 3)) - 1.0) < 1e-12);
    Eigen::MatrixXd dup = Eigen::MatrixXd::Identity(8, 3);
    dup.col(2) = dup.col(0);
    CHECK(std::abs(volume(dup)) < 1e-12);
    CHECK(std::abs(volume(half_dot_triple()) - std::sqrt(0.5)) < 1e-12);
}

TEST_CASE("cofactor and LU determinants agree") {
    std::mt19937_64 rng(3);
    for (int m = 1; m <= 3; ++m) {
        for (int k = 0; k < 20; ++k) {
            const Eigen::MatrixXd a = testing::random_matrix(m, m, rng);
            CHECK(determinant_cofactor(a) == doctest::Approx(determinant_lu(a)).epsilon(1e-10));
            CHECK(determinant_lu(a) == doctest::Approx(a.determinant()).epsilon(1e-10));
        }
    }
    const Eigen::MatrixXd big = testing::random_matrix(6, 6, rng);
    CHECK(determinant(big) == doctest::Approx(big.determinant()).epsilon(1e-10));
    LuDecomposition lu(big);
    CHECK((lu.inverse() * big - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-9);
}

TEST_CASE("volume gradient closed cases") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(8, 3);
    CHECK((volume_gradient(a) - a).norm() < 1e-7);
    Eigen::MatrixXd single(4, 1);
    single << 1, 2, 2, 4;
    CHECK((volume_gradient(single) - single / single.norm()).norm() < 1e-7);
}

TEST_CASE("volume gradient matches finite differences") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 25; ++k) {
        const Eigen::MatrixXd a = testing::random_matrix(8, 3, rng);
        const Eigen::MatrixXd fd = testing::numeric_gradient([](const Eigen::MatrixXd & x) { return volume(x); }, a);
        CHECK(testing::relative_error(volume_gradient(a), fd) < 1e-4);
    }
}

TEST_CASE("volume gradient rejects singular configurations") {
    Eigen::MatrixXd dup = Eigen::MatrixXd::Identity(8, 3);
    dup.col(1) = dup.col(0);
    dup.col(2) = dup.col(0);
    try {
        volume_gradient(dup);
        FAIL("expected SingularGram");
    } catch (const Error & e) {
        CHECK(e.code() == ErrorCode::SingularGram);
    }
}

TEST_CASE("stacking checks dimensions") {
    std::vector<Eigen::VectorXd> cols = {Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)};
    CHECK_THROWS_AS(stack_columns(std::span<const Eigen::VectorXd>(cols)), Error);
}
