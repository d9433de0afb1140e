#pragma once

#include "checkpoint.hpp"
#include "gram_loss.hpp"
#include "linalg.hpp"
#include "nn.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace foleygram {

/// One synthetic three-view observation. Generation samples additionally
/// carry the waveform their audio view was computed from.
struct SyntheticSample {
    int class_id = 0;
    Eigen::VectorXd audio_view;
    Eigen::VectorXd video_view;
    Eigen::VectorXd text_view;
    std::uint64_t latent_seed = 0;
    // Template slots: "person {action} {frequency} {material}".
    int action = 0;
    int frequency = 0;
    int material = 0;
    std::vector<float> waveform;
};

enum class DatasetKind { Alignment = 0, Foley = 1 };

struct Dataset {
    DatasetKind kind = DatasetKind::Alignment;
    int classes = 0;
    std::uint64_t seed = 0;
    std::uint32_t sample_rate = 0;
    std::vector<SyntheticSample> samples;

    std::size_t size() const { return samples.size(); }
    Eigen::Index audio_dim() const { return samples.empty() ? 0 : samples.front().audio_view.size(); }
    Eigen::Index video_dim() const { return samples.empty() ? 0 : samples.front().video_view.size(); }
    Eigen::Index text_dim() const { return samples.empty() ? 0 : samples.front().text_view.size(); }

    Checkpoint to_checkpoint() const;
    static Dataset from_checkpoint(const Checkpoint & ck);
};

struct DatasetConfig {
    int classes = 8;
    int samples = 512;
    std::uint64_t seed = 0;
    int latent_dim = 16;
    int audio_dim = 32;
    int video_dim = 32;
    double prototype_scale = 3.0;
    double latent_noise = 0.3;
    double view_noise = 0.2;
};

/// Class prototypes are scaled basis vectors; every view is tanh of a fixed
/// random map applied to (prototype + shared noise + view noise). Sample i
/// belongs to class i mod C. Views are rounded to float precision so a dump
/// reloads bit-exactly.
Dataset generate_dataset(const DatasetConfig & cfg);
Dataset generate_dataset(int classes, int samples, std::uint64_t seed);

/// Text view: one-hot action (2) | frequency (2) | material (materials) plus noise.
Eigen::VectorXd template_text_view(int action, int frequency, int material, int materials, double noise,
                                   std::mt19937_64 & rng);
std::string template_prompt(int action, int frequency, int material);

/// Leading (1 - holdout) share for training, trailing share held out.
std::pair<Dataset, Dataset> split_dataset(const Dataset & data, double holdout_fraction);

// ---------------------------------------------------------------------------

inline constexpr int kEncoderHidden = 64;
inline constexpr int kEmbeddingDim = 16;

struct Mlp {
    Param<double> w1;  // hidden × in
    Param<double> b1;  // hidden × 1
    Param<double> w2;  // out × hidden
    Param<double> b2;  // out × 1

    Eigen::Index input_dim() const { return w1.value.cols(); }
    Eigen::Index output_dim() const { return w2.value.rows(); }
};

struct EncoderParams {
    Mlp audio;
    Mlp video;
    Mlp text;

    Mlp & of(Modality m);
    const Mlp & of(Modality m) const;
    std::array<Param<double> *, 12> params();
};

EncoderParams init_encoders(Eigen::Index audio_dim, Eigen::Index video_dim, Eigen::Index text_dim,
                            std::uint64_t seed, int hidden = kEncoderHidden, int out = kEmbeddingDim);

/// Forward pass on a column batch of views (in × B); returns unit columns (n × B).
Eigen::MatrixXd encode_views(const Mlp & mlp, const Eigen::MatrixXd & views);
Embedding encode_view(const Mlp & mlp, const Eigen::VectorXd & view, Modality modality);
std::array<Embedding, 3> encode(const EncoderParams & params, const SyntheticSample & sample);
/// Embeds a dataset slice into a TripletBatch.
TripletBatch encode_batch(const EncoderParams & params, const Dataset & data, std::span<const std::size_t> indices);
TripletBatch encode_all(const EncoderParams & params, const Dataset & data);

/// Backpropagates dL/dE (n × B) into the MLP parameter gradients (accumulating).
void backward_views(Mlp & mlp, const Eigen::MatrixXd & views, const Eigen::MatrixXd & grad_embeddings);

// ---------------------------------------------------------------------------

enum class AlignmentLoss { Gram = 0, PairwiseCosine = 1 };

struct AlignConfig {
    AlignmentLoss loss = AlignmentLoss::Gram;
    Modality anchor = Modality::Text;
    double lr = 1e-4;
    int batch = 64;
    int steps = 2000;
    std::uint64_t seed = 0;
    double temperature = kDefaultTemperature;
    double weight_decay = 1e-2;
};

struct TrainState {
    EncoderParams params;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    AlignmentLoss loss = AlignmentLoss::Gram;

    Checkpoint to_checkpoint() const;
    static TrainState from_checkpoint(const Checkpoint & ck);
};

struct AlignRun {
    TrainState state;
    std::vector<double> loss_curve;
};

TrainState init_train_state(const Dataset & data, const AlignConfig & cfg);
/// Continues `state` for cfg.steps more steps. Throws DivergenceDetected on a non-finite loss.
AlignRun train_alignment(TrainState state, const Dataset & data, const AlignConfig & cfg);
AlignRun train_alignment(const Dataset & data, const AlignConfig & cfg);

/// Loss the configured objective assigns to one batch (used for curves and tests).
double alignment_loss(const EncoderParams & params, const Dataset & data, std::span<const std::size_t> indices,
                      const AlignConfig & cfg);

struct RetrievalReport {
    double recall_at_1 = 0.0;
    double recall_at_5 = 0.0;
    int candidates = 0;
    int queries = 0;
};

/// Query = (a_i, v_i); candidates = t_i plus K-1 texts from other classes.
/// Ranked by ascending Vol(t_j, a_i, v_i) for Gram, by descending mean cosine
/// of t_j with a_i and v_i for the pairwise baseline.
RetrievalReport evaluate_retrieval(const TripletBatch & embedded, std::span<const int> class_ids, int candidates,
                                   AlignmentLoss ranking);
RetrievalReport evaluate_retrieval(const TrainState & state, const Dataset & data, int candidates);

struct AlignmentStats {
    double mean_matched_av_cosine = 0.0;
    double mean_matched_volume = 0.0;
    double mean_mismatched_volume = 0.0;
    // One-sided Mann-Whitney p for matched < mismatched volumes.
    double mann_whitney_p = 1.0;
};

AlignmentStats alignment_stats(const TripletBatch & embedded, std::span<const int> class_ids);
AlignmentStats alignment_stats(const TrainState & state, const Dataset & data);

} // namespace foleygram
