#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace foleygram {

enum class Modality { Audio = 0, Video = 1, Text = 2 };

const char * modality_name(Modality m);

/// Unit-norm embedding tagged with the modality it came from.
struct Embedding {
    Eigen::VectorXd values;
    Modality modality = Modality::Audio;
};

inline constexpr double kZeroNormThreshold = 1e-12;
inline constexpr double kGramJitter = 1e-8;
inline constexpr double kSingularDetThreshold = 1e-12;

/// Scales `raw` onto the unit sphere. Throws ZeroVector when ‖raw‖ < 1e-12.
Eigen::VectorXd normalize(const Eigen::VectorXd & raw);
Embedding normalize(const Eigen::VectorXd & raw, Modality modality);

/// Stacks embeddings as the columns of an n×m matrix. All must share n.
Eigen::MatrixXd stack_columns(std::span<const Embedding> columns);
Eigen::MatrixXd stack_columns(std::span<const Eigen::VectorXd> columns);

/// G = AᵀA for the n×m column matrix A (1 ≤ m ≤ n).
Eigen::MatrixXd gram(const Eigen::MatrixXd & columns);

// Partial-pivoting LU factorization of a small square matrix.
class LuDecomposition {
public:
    explicit LuDecomposition(Eigen::MatrixXd m);

    double determinant() const;
    bool singular() const { return singular_; }
    // Solves M x = b column by column.
    Eigen::MatrixXd solve(const Eigen::MatrixXd & rhs) const;
    Eigen::MatrixXd inverse() const;

private:
    Eigen::MatrixXd lu_;
    std::vector<Eigen::Index> perm_;
    int sign_ = 1;
    bool singular_ = false;
};

/// Closed-form determinant, m ≤ 3 only.
double determinant_cofactor(const Eigen::MatrixXd & m);
double determinant_lu(const Eigen::MatrixXd & m);
/// Cofactor for m ≤ 3, pivoted LU above.
double determinant(const Eigen::MatrixXd & m);

/// Parallelotope volume sqrt(max(det(AᵀA), 0)).
double volume(const Eigen::MatrixXd & columns);

/// d volume / dA = V · A · (G + λI)⁻¹ with λ = kGramJitter.
/// Throws SingularGram when det(G + λI) ≤ kSingularDetThreshold.
Eigen::MatrixXd volume_gradient(const Eigen::MatrixXd & columns);

} // namespace foleygram
