#pragma once

#include "envelope.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace foleygram {

inline constexpr double kCovarianceRegularization = 1e-6;

/// N embeddings (rows) of dimension n with their Gaussian fit.
struct EmbeddingSet {
    Eigen::MatrixXd samples;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // unbiased, before regularization

    Eigen::Index size() const { return samples.rows(); }
    Eigen::Index dim() const { return samples.cols(); }

    static EmbeddingSet fit(Eigen::MatrixXd samples);
};

/// Principal square root of a symmetric PSD matrix (negative eigenvalues clamped).
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd & s);

/// ‖μ_A − μ_B‖² + Tr(Σ_A + Σ_B − 2 (Σ_A Σ_B)^{1/2}) with Σ + 1e-6·I on both sides.
double frechet_distance(const EmbeddingSet & a, const EmbeddingSet & b);
double frechet_distance(const Eigen::VectorXd & mu_a, const Eigen::MatrixXd & sigma_a, const Eigen::VectorXd & mu_b,
                        const Eigen::MatrixXd & sigma_b);

/// Mean pairwise cosine similarity between row i of `gen` and row i of `ref`.
double cosine_score(const EmbeddingSet & gen, const EmbeddingSet & ref);
double cosine_score(const Eigen::MatrixXd & gen, const Eigen::MatrixXd & ref);

/// Pearson correlation between the conditioning frames and the RMS envelope of
/// `generated` (same window/hop), resampled to the conditioning length when
/// the frame counts differ. Throws DegenerateVariance for constant input.
double envelope_correlation(const Envelope & conditioning, const Waveform & generated);

struct MetricRow {
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// "metric,value,seed,config_hash" plus one line per row.
std::string metric_csv(const std::vector<MetricRow> & rows);
void write_metric_csv(const std::filesystem::path & path, const std::vector<MetricRow> & rows);

} // namespace foleygram
