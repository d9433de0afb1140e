#pragma once

#include "envelope.hpp"
#include "toy_encoders.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace foleygram {

/// Toy Foley corpus: each clip is a class-specific harmonic oscillator shaped
/// by one to four amplitude events. Class semantics live in the timbre,
/// timing lives in the envelope, so the two conditioning paths can be
/// measured separately.
struct FoleyConfig {
    int classes = 8;
    int samples = 256;
    std::uint64_t seed = 0;
    std::uint32_t sample_rate = 4410;
    int length = 4096;
    int feature_bands = 32;
    int video_dim = 32;
    double view_noise = 0.2;
};

inline constexpr int kMaxFoleyClasses = 10;

/// Fundamental of class c: 120 · 1.3^c Hz.
double class_fundamental(int class_id);

struct FoleyClip {
    std::vector<float> waveform;
    std::vector<float> envelope;  // per-sample amplitude in [0, 1]
};

/// action 0 = hit (exponential decay), 1 = scratch (rounded burst);
/// repeated = false gives one event, true two to four.
FoleyClip synthesize_clip(int class_id, int action, bool repeated, std::uint64_t seed, std::uint32_t sample_rate,
                          int length);

/// Log band energies on log-spaced bands between 80 Hz and 0.45 · rate.
Eigen::VectorXd audio_features(std::span<const float> waveform, std::uint32_t sample_rate, int bands);

Dataset generate_foley_dataset(const FoleyConfig & cfg);

} // namespace foleygram
