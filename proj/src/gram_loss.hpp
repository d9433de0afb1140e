#pragma once

#include "linalg.hpp"

#include <Eigen/Core>

namespace foleygram {

/// B modality triplets, one column per sample (each matrix is n×B).
struct TripletBatch {
    Eigen::MatrixXd audio;
    Eigen::MatrixXd video;
    Eigen::MatrixXd text;

    Eigen::Index size() const { return audio.cols(); }
    Eigen::Index dim() const { return audio.rows(); }
};

enum class LossDirection { AV2T, T2AV, Combined };

inline constexpr double kDefaultTemperature = 0.07;

struct LossConfig {
    double temperature = kDefaultTemperature;
    // 0 means K = B.
    Eigen::Index negatives = 0;
    LossDirection direction = LossDirection::Combined;
};

/// Throws InvalidBatch on ragged or non-unit input, InvalidConfig on a bad config.
void validate(const TripletBatch & batch, const LossConfig & cfg);

/// M(i, j) = Vol(t_i, a_j, v_j). Row i fixes a text, column j an audio–video pair.
Eigen::MatrixXd volume_matrix(const TripletBatch & batch);

double loss_av2t(const TripletBatch & batch, const LossConfig & cfg);
double loss_t2av(const TripletBatch & batch, const LossConfig & cfg);
double loss_combined(const TripletBatch & batch, const LossConfig & cfg);
/// Dispatches on cfg.direction.
double gram_loss(const TripletBatch & batch, const LossConfig & cfg);

// Same losses evaluated on a precomputed volume matrix.
double loss_av2t_from_volumes(const Eigen::MatrixXd & volumes, const LossConfig & cfg);
double loss_t2av_from_volumes(const Eigen::MatrixXd & volumes, const LossConfig & cfg);

/// Per-embedding gradients, laid out like TripletBatch.
struct TripletGradient {
    Eigen::MatrixXd audio;
    Eigen::MatrixXd video;
    Eigen::MatrixXd text;
};

/// Analytic gradient of gram_loss(batch, cfg) with respect to every embedding.
/// Propagates SingularGram from volume_gradient.
TripletGradient loss_gradient(const TripletBatch & batch, const LossConfig & cfg);

/// Sum of two symmetric cosine InfoNCE losses, anchor ↔ each other modality.
double pairwise_infonce_baseline(const TripletBatch & batch, const LossConfig & cfg, Modality anchor);
TripletGradient pairwise_infonce_gradient(const TripletBatch & batch, const LossConfig & cfg, Modality anchor);

} // namespace foleygram
