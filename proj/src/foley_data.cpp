#include "foley_data.hpp"

#include "error.hpp"
#include "nn.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace foleygram {

namespace {

constexpr std::uint64_t kStreamFoleyMaps = 0x666d;
constexpr std::uint64_t kStreamFoleyClip = 0x6663;
constexpr double kLowBandHz = 80.0;
constexpr int kEnvelopeSummary = 16;

Eigen::VectorXd rounded(const Eigen::VectorXd & v) {
    return v.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

} // namespace

double class_fundamental(int class_id) { return 120.0 * std::pow(1.3, class_id); }

FoleyClip synthesize_clip(int class_id, int action, bool repeated, std::uint64_t seed, std::uint32_t sample_rate,
                          int length) {
    if (length < 1024 || sample_rate == 0) fail(ErrorCode::InvalidConfig, "clip too short or rate zero");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double rate = static_cast<double>(sample_rate);
    const auto n = static_cast<size_t>(length);

    std::vector<double> env(n, 0.0);
    const int events = repeated ? 2 + static_cast<int>(unit(rng) * 3.0) : 1;
    std::uniform_int_distribution<int> onset_dist(0, length - 600);
    for (int k = 0; k < events; ++k) {
        const auto onset = static_cast<size_t>(onset_dist(rng));
        if (action == 0) {
            const double decay = (0.03 + 0.05 * unit(rng)) * rate;
            for (size_t i = onset; i < n; ++i) env[i] = std::max(env[i], std::exp(-static_cast<double>(i - onset) / decay));
        } else {
            const double dur = (0.1 + 0.15 * unit(rng)) * rate;
            for (size_t i = onset; i < n && static_cast<double>(i - onset) < dur; ++i) {
                env[i] = std::max(env[i], std::sqrt(std::sin(std::numbers::pi * static_cast<double>(i - onset) / dur)));
            }
        }
    }

    const double phase = 2.0 * std::numbers::pi * unit(rng);
    const double f0 = class_fundamental(class_id);
    const double h2 = class_id % 2 ? 0.5 : 0.1;
    const double h3 = class_id % 3 == 0 ? 0.3 : 0.0;
    std::vector<double> tone(n);
    double peak = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double w = 2.0 * std::numbers::pi * f0 * static_cast<double>(i) / rate;
        tone[i] = std::sin(w + phase) + h2 * std::sin(2.0 * (w + phase)) + h3 * std::sin(3.0 * (w + phase));
        peak = std::max(peak, std::abs(tone[i]));
    }
    FoleyClip clip;
    clip.waveform.resize(n);
    clip.envelope.resize(n);
    for (size_t i = 0; i < n; ++i) {
        clip.waveform[i] = static_cast<float>(0.9 * env[i] * tone[i] / peak);
        clip.envelope[i] = static_cast<float>(env[i]);
    }
    return clip;
}

Eigen::VectorXd audio_features(std::span<const float> waveform, std::uint32_t sample_rate, int bands) {
    if (bands < 1 || waveform.size() < 2) fail(ErrorCode::InvalidArgument, "need at least one band and two samples");
    std::vector<float> x(waveform.begin(), waveform.end());
    std::vector<std::complex<float>> spectrum;
    Eigen::FFT<float> fft;
    fft.fwd(spectrum, x);
    const double rate = static_cast<double>(sample_rate);
    const double n = static_cast<double>(x.size());
    const double lo = std::log(kLowBandHz);
    const double hi = std::log(0.45 * rate);
    Eigen::VectorXd energy = Eigen::VectorXd::Zero(bands);
    for (size_t k = 1; k < x.size() / 2; ++k) {
        const double hz = static_cast<double>(k) * rate / n;
        if (hz < kLowBandHz || hz >= 0.45 * rate) continue;
        const int band = std::min(bands - 1, static_cast<int>((std::log(hz) - lo) / (hi - lo) * bands));
        energy[band] += std::norm(spectrum[k]) / n;
    }
    return energy.unaryExpr([](double e) { return 0.25 * std::log10(1e-4 + e); });
}

Dataset generate_foley_dataset(const FoleyConfig & cfg) {
    if (cfg.classes < 2 || cfg.classes > kMaxFoleyClasses || cfg.samples < cfg.classes) {
        fail(ErrorCode::InvalidConfig, "foley dataset needs 2 <= C <= 10 and N >= C");
    }
    if (cfg.video_dim <= kEnvelopeSummary) fail(ErrorCode::InvalidConfig, "video dimension too small");
    const int semantic_dim = cfg.video_dim - kEnvelopeSummary;
    std::mt19937_64 maps_rng(mix_seed(cfg.seed, kStreamFoleyMaps));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd video_map(semantic_dim, cfg.classes);
    for (Eigen::Index c = 0; c < video_map.cols(); ++c)
        for (Eigen::Index r = 0; r < video_map.rows(); ++r) video_map(r, c) = gauss(maps_rng);
    const int materials = (cfg.classes + 3) / 4;

    Dataset d;
    d.kind = DatasetKind::Foley;
    d.classes = cfg.classes;
    d.seed = cfg.seed;
    d.sample_rate = cfg.sample_rate;
    d.samples.reserve(static_cast<size_t>(cfg.samples));
    for (int i = 0; i < cfg.samples; ++i) {
        SyntheticSample s;
        s.class_id = i % cfg.classes;
        s.latent_seed = mix_seed(cfg.seed, kStreamFoleyClip + static_cast<std::uint64_t>(i));
        s.action = s.class_id % 2;
        s.frequency = (s.class_id / 2) % 2;
        s.material = s.class_id / 4;
        std::mt19937_64 rng(s.latent_seed);
        FoleyClip clip = synthesize_clip(s.class_id, s.action, s.frequency == 1, mix_seed(s.latent_seed), cfg.sample_rate, cfg.length);

        s.audio_view = rounded(audio_features(clip.waveform, cfg.sample_rate, cfg.feature_bands));

        // Video: a class-dependent appearance code plus a coarse motion
        // summary that follows the event envelope.
        Eigen::VectorXd video(cfg.video_dim);
        Eigen::VectorXd code = video_map.col(s.class_id);
        for (Eigen::Index k = 0; k < code.size(); ++k) code[k] += cfg.view_noise * gauss(rng);
        video.head(semantic_dim) = code.array().tanh().matrix();
        const std::vector<double> env(clip.envelope.begin(), clip.envelope.end());
        const std::vector<double> summary = resample_linear(env, kEnvelopeSummary);
        for (int k = 0; k < kEnvelopeSummary; ++k) video[semantic_dim + k] = summary[static_cast<size_t>(k)];
        s.video_view = rounded(video);

        s.text_view = rounded(template_text_view(s.action, s.frequency, s.material, materials, cfg.view_noise, rng));
        s.waveform = std::move(clip.waveform);
        d.samples.push_back(std::move(s));
    }
    return d;
}

} // namespace foleygram
