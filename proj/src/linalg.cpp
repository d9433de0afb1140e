#include "linalg.hpp"

#include "error.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>
#include <utility>

namespace foleygram {

const char * modality_name(Modality m) {
    switch (m) {
        case Modality::Audio: return "audio";
        case Modality::Video: return "video";
        case Modality::Text: return "text";
    }
    return "unknown";
}

Eigen::VectorXd normalize(const Eigen::VectorXd & raw) {
    const double norm = raw.norm();
    if (!(norm >= kZeroNormThreshold)) {
        fail(ErrorCode::ZeroVector, "cannot normalize a vector with norm " + std::to_string(norm));
    }
    return raw / norm;
}

Embedding normalize(const Eigen::VectorXd & raw, Modality modality) {
    return Embedding{normalize(raw), modality};
}

Eigen::MatrixXd stack_columns(std::span<const Eigen::VectorXd> columns) {
    if (columns.empty()) {
        fail(ErrorCode::InvalidArgument, "embedding matrix needs at least one column");
    }
    const Eigen::Index n = columns.front().size();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(columns.size()));
    for (size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != n) {
            fail(ErrorCode::DimensionMismatch, "column " + std::to_string(j) + " has length " +
                                                   std::to_string(columns[j].size()) + ", expected " +
                                                   std::to_string(n));
        }
        out.col(static_cast<Eigen::Index>(j)) = columns[j];
    }
    return out;
}

Eigen::MatrixXd stack_columns(std::span<const Embedding> columns) {
    std::vector<Eigen::VectorXd> values;
    values.reserve(columns.size());
    for (const auto & e : columns) values.push_back(e.values);
    return stack_columns(std::span<const Eigen::VectorXd>(values));
}

Eigen::MatrixXd gram(const Eigen::MatrixXd & columns) {
    const auto m = columns.cols();
    if (m < 1 || m > columns.rows()) {
        fail(ErrorCode::DimensionMismatch, "embedding matrix must satisfy 1 <= m <= n");
    }
    Eigen::MatrixXd g(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i; j < m; ++j) {
            const double d = columns.col(i).dot(columns.col(j));
            g(i, j) = d;
            g(j, i) = d;
        }
    }
    return g;
}

LuDecomposition::LuDecomposition(Eigen::MatrixXd m) : lu_(std::move(m)) {
    const auto n = lu_.rows();
    if (n != lu_.cols()) fail(ErrorCode::DimensionMismatch, "LU needs a square matrix");
    perm_.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm_[static_cast<size_t>(i)] = i;

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index pivot = k;
        double best = std::abs(lu_(k, k));
        for (Eigen::Index r = k + 1; r < n; ++r) {
            if (std::abs(lu_(r, k)) > best) {
                best = std::abs(lu_(r, k));
                pivot = r;
            }
        }
        if (best == 0.0) {
            singular_ = true;
            continue;
        }
        if (pivot != k) {
            lu_.row(k).swap(lu_.row(pivot));
            std::swap(perm_[static_cast<size_t>(k)], perm_[static_cast<size_t>(pivot)]);
            sign_ = -sign_;
        }
        for (Eigen::Index r = k + 1; r < n; ++r) {
            const double f = lu_(r, k) / lu_(k, k);
            lu_(r, k) = f;
            for (Eigen::Index c = k + 1; c < n; ++c) lu_(r, c) -= f * lu_(k, c);
        }
    }
}

double LuDecomposition::determinant() const {
    if (singular_) return 0.0;
    double d = sign_;
    for (Eigen::Index i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
}

Eigen::MatrixXd LuDecomposition::solve(const Eigen::MatrixXd & rhs) const {
    if (singular_) fail(ErrorCode::SingularGram, "LU solve on a singular matrix");
    const auto n = lu_.rows();
    if (rhs.rows() != n) fail(ErrorCode::DimensionMismatch, "LU solve: rhs row count mismatch");
    Eigen::MatrixXd x(n, rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
        // forward substitution with unit lower triangle
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = rhs(perm_[static_cast<size_t>(i)], c);
            for (Eigen::Index k = 0; k < i; ++k) s -= lu_(i, k) * x(k, c);
            x(i, c) = s;
        }
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            double s = x(i, c);
            for (Eigen::Index k = i + 1; k < n; ++k) s -= lu_(i, k) * x(k, c);
            x(i, c) = s / lu_(i, i);
        }
    }
    return x;
}

Eigen::MatrixXd LuDecomposition::inverse() const {
    return solve(Eigen::MatrixXd::Identity(lu_.rows(), lu_.cols()));
}

double determinant_cofactor(const Eigen::MatrixXd & m) {
    if (m.rows() != m.cols()) fail(ErrorCode::DimensionMismatch, "determinant needs a square matrix");
    switch (m.rows()) {
        case 0: return 1.0;
        case 1: return m(0, 0);
        case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        case 3:
            return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                   m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                   m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        default:
            fail(ErrorCode::InvalidArgument, "closed-form determinant only covers m <= 3");
    }
}

double determinant_lu(const Eigen::MatrixXd & m) {
    return LuDecomposition(m).determinant();
}

double determinant(const Eigen::MatrixXd & m) {
    return m.rows() <= 3 ? determinant_cofactor(m) : determinant_lu(m);
}

// sqrt(det AᵀA) equals |det R| for A = QR. Taking the product of R's diagonal
// keeps the rounding error near machine epsilon; the square root of a rounded
// determinant would amplify it to about 1e-8 for nearly dependent columns.
double volume(const Eigen::MatrixXd & columns) {
    if (columns.cols() == 0) return 1.0;
    if (columns.rows() < columns.cols()) return 0.0;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(columns);
    return std::abs(qr.matrixQR().diagonal().prod());
}

Eigen::MatrixXd volume_gradient(const Eigen::MatrixXd & columns) {
    const Eigen::MatrixXd g = gram(columns);
    const double v = volume(columns);
    Eigen::MatrixXd jittered = g;
    jittered.diagonal().array() += kGramJitter;
    LuDecomposition lu(jittered);
    if (!(lu.determinant() > kSingularDetThreshold)) {
        fail(ErrorCode::SingularGram, "Gram determinant " + std::to_string(lu.determinant()) +
                                          " is at or below the singularity threshold");
    }
    return v * columns * lu.inverse();
}

} // namespace foleygram
