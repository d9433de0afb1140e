#pragma once

#include "denoiser.hpp"
#include "envelope.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace foleygram {

/// Fixed variance schedule, 1-based: alpha(t), alpha_bar(t) for t in [1, T],
/// with alpha_bar(0) = 1. `timestep(k)` maps a (possibly respaced) index back
/// onto the training-time step the network was conditioned on.
class NoiseSchedule {
public:
    int steps() const { return static_cast<int>(alphas_.size()) - 1; }
    double alpha(int t) const;
    double alpha_bar(int t) const;
    /// σ_t² = (1 − ᾱ_{t−1}) / (1 − ᾱ_t) · (1 − α_t)
    double posterior_variance(int t) const;
    int timestep(int t) const;

    /// Strided subset of `count` steps spanning [1, T], for sampling.
    NoiseSchedule respaced(int count) const;

    friend NoiseSchedule build_schedule(int steps, double beta_min, double beta_max);

private:
    std::vector<double> alphas_;      // index 0 unused
    std::vector<double> alpha_bars_;  // index 0 = 1
    std::vector<double> variances_;   // index 0 unused
    std::vector<int> timesteps_;      // index 0 = 0
};

inline constexpr int kDefaultTrainSteps = 1000;
inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.02;
inline constexpr int kDefaultSamplingSteps = 150;
inline constexpr double kDefaultGuidance = 2.0;

/// Linear β from beta_min to beta_max, α_t = 1 − β_t. Throws InvalidConfig.
NoiseSchedule build_schedule(int steps = kDefaultTrainSteps, double beta_min = kDefaultBetaMin,
                             double beta_max = kDefaultBetaMax);

// Closed-form helpers, elementwise over equal-length vectors.
std::vector<float> forward_sample(std::span<const float> z0, double alpha_bar, std::span<const float> eps);
std::vector<float> forward_sample(std::span<const float> z0, int t, std::span<const float> eps,
                                  const NoiseSchedule & schedule);
std::vector<float> v_target(std::span<const float> z0, std::span<const float> eps, double alpha_bar);
std::vector<float> v_target(std::span<const float> z0, std::span<const float> eps, int t,
                            const NoiseSchedule & schedule);
std::vector<float> v_to_epsilon(std::span<const float> v, std::span<const float> zt, double alpha_bar);
std::vector<float> v_to_epsilon(std::span<const float> v, std::span<const float> zt, int t,
                                const NoiseSchedule & schedule);

// Double-precision versions for the algebraic identities.
std::vector<double> v_target(std::span<const double> z0, std::span<const double> eps, double alpha_bar);
std::vector<double> v_to_epsilon(std::span<const double> v, std::span<const double> zt, double alpha_bar);
std::vector<double> forward_sample(std::span<const double> z0, double alpha_bar, std::span<const double> eps);

/// μ = (z_t − (1 − α_t)/sqrt(1 − ᾱ_t) · ε) / sqrt(α_t)
std::vector<float> posterior_mean(std::span<const float> zt, std::span<const float> eps, double alpha,
                                  double alpha_bar);

/// Latent codec. Identity in signal space at desk scale; a learned codec can
/// replace it without touching the sampler.
struct SignalCodec {
    std::vector<float> encode(const Waveform & y) const;
    Waveform decode(std::span<const float> z, std::uint32_t sample_rate) const;
};

/// Normal draws as a pluggable source so tests can pin the noise stream.
using NoiseSource = std::function<void(std::span<float>)>;
NoiseSource gaussian_noise(std::uint64_t seed);

/// v̂ = v_u + w (v_c − v_u); w = 1 returns the conditional pass and w = 0 the
/// unconditional pass without recombination.
std::vector<float> cfg_predict(const Denoiser & net, std::span<const float> zt, int t, const Conditioning & cond,
                               std::span<const float> control, double guidance);

struct SampleOptions {
    int steps = kDefaultSamplingSteps;
    double guidance = kDefaultGuidance;
    bool use_cfg = true;  // false: conditional pass only
};

/// Ancestral sampling from z_T ~ N(0, I) over a respaced schedule; returns the
/// final latent z_0. Throws InvalidSteps when steps ∉ [1, T].
std::vector<float> sample_latent(const Denoiser & net, const NoiseSchedule & schedule, const Conditioning & cond,
                                 std::span<const float> control, const SampleOptions & opts, const NoiseSource & noise);
Waveform sample(const Denoiser & net, const NoiseSchedule & schedule, const Conditioning & cond,
                const ControlSignal & control, const SampleOptions & opts, std::uint64_t seed,
                std::uint32_t sample_rate);

// ---------------------------------------------------------------------------
// Training

struct GenTrainItem {
    std::vector<float> z0;
    std::vector<float> control;  // envelope resampled to latent length
    Conditioning cond;
};

enum class TrainPhase {
    Main = 1,     // main branch + projections, control branch off
    Control = 2,  // main branch frozen; control branch + conditioning projections
};

struct GenTrainConfig {
    TrainPhase phase = TrainPhase::Main;
    int steps = 2000;
    int batch = 16;
    double lr = 1e-3;
    double weight_decay = 1e-2;
    double modality_dropout = 0.1;       // each embedding independently
    double unconditional_dropout = 0.1;  // the whole set, so the unconditional pass is trained
    std::uint64_t seed = 0;
};

struct GenTrainResult {
    std::vector<double> loss_curve;
};

/// One v-prediction MSE step on `items` (already drawn), applied to the
/// phase's trainable subset. Returns the batch loss.
double train_step(Denoiser & net, std::span<const GenTrainItem> items, const NoiseSchedule & schedule,
                  TrainPhase phase, std::mt19937_64 & rng, const AdamWConfig & opt, std::uint64_t & step);

/// Runs cfg.steps steps drawing batches from `pool` (with per-step seeded rng).
GenTrainResult train_generator(Denoiser & net, std::span<const GenTrainItem> pool, const NoiseSchedule & schedule,
                               const GenTrainConfig & cfg, std::uint64_t & step);

} // namespace foleygram
