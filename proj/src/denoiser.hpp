#pragma once

#include "checkpoint.hpp"
#include "linalg.hpp"
#include "nn.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace foleygram {

/// Bitmask over modalities: A = 1, V = 2, T = 4.
enum ModalityMask : unsigned {
    kMaskNone = 0,
    kMaskAudio = 1,
    kMaskVideo = 2,
    kMaskText = 4,
    kMaskAll = 7,
};

/// Parses "avt", "av", "a", ... (case-insensitive). Throws InvalidConfig.
unsigned parse_modality_mask(const std::string & text);
std::string modality_mask_name(unsigned mask);
/// The seven non-empty masks in the ablation order AVT, AV, AT, VT, A, V, T.
std::array<unsigned, 7> ablation_masks();

/// Semantic conditioning set F: up to one embedding per modality.
struct Conditioning {
    std::array<std::optional<std::vector<float>>, 3> embeddings;

    static Conditioning unconditional() { return {}; }
    static Conditioning from_embeddings(std::span<const Embedding> embeddings);

    bool has(Modality m) const { return embeddings[static_cast<size_t>(m)].has_value(); }
    unsigned mask() const;
    /// Keeps only the modalities in `mask`.
    Conditioning masked(unsigned mask) const;
};

struct DenoiserConfig {
    int latent_length = 4096;
    int patch = 16;
    int width = 64;
    int blocks = 4;
    int embedding_dim = 16;
    int time_features = 32;
    int control_layers = 2;

    int tokens() const { return latent_length / patch; }
};

/// Gradient routing for one backward pass.
struct GradientScope {
    bool main = true;     // main-branch weights (input/time/blocks/output)
    bool projection = true;  // conditioning projection
    bool control = false; // control branch
};

/// 1-D convolutional residual denoiser predicting v. Conditioning embeddings
/// enter through a linear projection and per-block feature-wise affine
/// modulation; the envelope enters through a separate control branch whose
/// per-block output projections start at exactly zero.
class Denoiser {
public:
    Denoiser() = default;
    Denoiser(const DenoiserConfig & cfg, std::uint64_t seed);

    const DenoiserConfig & config() const { return cfg_; }

    /// v̂(z_t, t, F, r_c). An empty `control` span disables the control branch.
    std::vector<float> forward(std::span<const float> zt, int t, const Conditioning & cond,
                               std::span<const float> control) const;

    /// Forward plus backward of 0.5·scale·‖v̂ − target‖², accumulating into the
    /// gradients selected by `scope`. Returns the squared error sum.
    double accumulate_gradient(std::span<const float> zt, int t, const Conditioning & cond,
                               std::span<const float> control, std::span<const float> target, float scale,
                               const GradientScope & scope);

    std::vector<Param<float> *> main_params();
    std::vector<Param<float> *> projection_params();
    std::vector<Param<float> *> control_params();
    void zero_grad();

    Checkpoint to_checkpoint() const;
    static Denoiser from_checkpoint(const Checkpoint & ck);

    struct Conv1d {
        Param<float> weight;  // out × (3·in), taps ordered [t − d, t, t + d]
        Param<float> bias;    // out × 1
        int dilation = 1;
    };
    struct Dense {
        Param<float> weight;  // out × in
        Param<float> bias;    // out × 1
    };
    struct Block {
        Conv1d conv1;
        Dense film;  // 2·width rows: scale then shift
        Conv1d conv2;
    };

private:
    struct Cache;
    void run_forward(std::span<const float> zt, int t, const Conditioning & cond, std::span<const float> control,
                     Cache & cache) const;
    std::vector<std::pair<std::string, Param<float> *>> named_params();

    DenoiserConfig cfg_;
    Dense input_;
    Dense time_proj_;
    Dense cond_proj_;
    std::vector<Block> blocks_;
    Dense output_;
    Dense control_input_;
    std::vector<Conv1d> control_convs_;
    std::vector<Dense> control_zero_;
};

} // namespace foleygram
