#pragma once

#include "config.hpp"
#include "diffusion.hpp"
#include "foley_data.hpp"
#include "toy_encoders.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace foleygram {

// ---------------------------------------------------------------------------
// Generation evaluation building blocks

/// Phase-1/phase-2 training items from a Foley split: latent = waveform,
/// control = RMS envelope stretched to the latent length, conditioning =
/// encoder embeddings of all three views.
std::vector<GenTrainItem> make_train_items(const Dataset & data, const EncoderParams & encoders, std::size_t window,
                                           std::size_t hop);

/// Audio-encoder embeddings (rows) of raw waveforms.
Eigen::MatrixXd audio_embeddings(const EncoderParams & encoders, std::span<const std::vector<float>> waveforms,
                                 std::uint32_t sample_rate);

/// Nearest-centroid class probe in embedding space.
struct CentroidProbe {
    Eigen::MatrixXd centroids;  // C × n

    static CentroidProbe fit(const Eigen::MatrixXd & embeddings, std::span<const int> labels, int classes);
    int predict(const Eigen::VectorXd & embedding) const;
};

struct GenEvalOptions {
    unsigned mask = kMaskAll;
    SampleOptions sampling;
    std::uint64_t seed = 0;
    int clips = 16;
    std::size_t window = kDefaultWindow;
    std::size_t hop = kDefaultHop;
};

struct GenEvalResult {
    int clips = 0;
    double fad = 0.0;
    double cosine = 0.0;
    double envelope_correlation = 0.0;  // mean over clips; degenerate outputs count as 0
    double class_accuracy = 0.0;
    double class_p = 1.0;  // binomial upper tail against chance 1/C
    std::vector<double> per_clip_correlation;
    std::vector<Waveform> outputs;
};

/// Generates one clip per conditioning sample in `test` (the first
/// opts.clips), conditioned on its masked embeddings and its envelope, and
/// scores the result against the real clips. The probe is fitted on `train`.
GenEvalResult evaluate_generation(const Denoiser & net, const NoiseSchedule & schedule, const EncoderParams & encoders,
                                  const Dataset & train, const Dataset & test, const GenEvalOptions & opts);

struct AblationRow {
    unsigned mask = kMaskAll;
    GenEvalResult result;
};

/// All seven masks with shared noise streams, ranked by descending cosine score.
std::vector<AblationRow> run_ablation(const Denoiser & net, const NoiseSchedule & schedule,
                                      const EncoderParams & encoders, const Dataset & train, const Dataset & test,
                                      const GenEvalOptions & opts);
std::string ablation_csv(const std::vector<AblationRow> & rows);

// ---------------------------------------------------------------------------
// Commands

/// gen-data, train-align, eval-align, extract-env, train-gen, generate,
/// evaluate, ablate.
const std::vector<std::string> & command_names();

struct CommandResult {
    std::string config_hash;
    std::vector<std::filesystem::path> outputs;
};

/// Resolves defaults into `cfg`, runs the command and writes its outputs plus
/// the resolved config into cfg "out". Throws Error on module failures and
/// ConfigError on unusable configuration.
CommandResult run_command(const std::string & name, const Config & cfg);

/// The command's config with defaults filled in (what gets hashed).
Config resolve_config(const std::string & name, const Config & cfg);

} // namespace foleygram
