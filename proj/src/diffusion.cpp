#include "diffusion.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace foleygram {

namespace {

void check_step(const NoiseSchedule & s, int t) {
    if (t < 0 || t > s.steps()) fail(ErrorCode::StepOutOfRange, "step " + std::to_string(t) + " outside schedule");
}

template <typename T>
void check_lengths(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "vector lengths differ");
}

template <typename T>
std::vector<T> affine(std::span<const T> a, double ca, std::span<const T> b, double cb) {
    check_lengths(a, b);
    std::vector<T> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<T>(ca * static_cast<double>(a[i]) + cb * static_cast<double>(b[i]));
    }
    return out;
}

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

constexpr std::uint64_t kStreamTrainBatch = 0x7472;
constexpr std::uint64_t kStreamSampleNoise = 0x736d;

} // namespace

double NoiseSchedule::alpha(int t) const {
    if (t < 1 || t > steps()) fail(ErrorCode::StepOutOfRange, "alpha index outside schedule");
    return alphas_[static_cast<size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_step(*this, t);
    return alpha_bars_[static_cast<size_t>(t)];
}

double NoiseSchedule::posterior_variance(int t) const {
    if (t < 1 || t > steps()) fail(ErrorCode::StepOutOfRange, "variance index outside schedule");
    return variances_[static_cast<size_t>(t)];
}

int NoiseSchedule::timestep(int t) const {
    check_step(*this, t);
    return timesteps_[static_cast<size_t>(t)];
}

NoiseSchedule NoiseSchedule::respaced(int count) const {
    const int total = steps();
    if (count < 1 || count > total) {
        fail(ErrorCode::InvalidSteps, "sampling steps must lie in [1, " + std::to_string(total) + "]");
    }
    std::vector<int> picks(static_cast<size_t>(count));
    if (count == 1) {
        picks[0] = total;
    } else {
        for (int k = 0; k < count; ++k) {
            const double pos = 1.0 + static_cast<double>(k) * (total - 1) / (count - 1);
            picks[static_cast<size_t>(k)] = static_cast<int>(std::lround(pos));
        }
    }
    NoiseSchedule out;
    out.alphas_.assign(1, 0.0);
    out.alpha_bars_.assign(1, 1.0);
    out.variances_.assign(1, 0.0);
    out.timesteps_.assign(1, 0);
    for (int k = 0; k < count; ++k) {
        const int t = picks[static_cast<size_t>(k)];
        const double prev = out.alpha_bars_.back();
        const double ab = alpha_bars_[static_cast<size_t>(t)];
        const double a = ab / prev;
        out.alphas_.push_back(a);
        out.alpha_bars_.push_back(ab);
        out.variances_.push_back((1.0 - prev) / (1.0 - ab) * (1.0 - a));
        out.timesteps_.push_back(timesteps_[static_cast<size_t>(t)]);
    }
    return out;
}

NoiseSchedule build_schedule(int steps, double beta_min, double beta_max) {
    if (steps < 1) fail(ErrorCode::InvalidConfig, "schedule needs at least one step");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        fail(ErrorCode::InvalidConfig, "betas must satisfy 0 < beta_min <= beta_max < 1");
    }
    NoiseSchedule s;
    s.alphas_.assign(1, 0.0);
    s.alpha_bars_.assign(1, 1.0);
    s.variances_.assign(1, 0.0);
    s.timesteps_.assign(1, 0);
    for (int t = 1; t <= steps; ++t) {
        const double beta =
            steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) / (steps - 1);
        const double a = 1.0 - beta;
        const double prev = s.alpha_bars_.back();
        const double ab = prev * a;
        s.alphas_.push_back(a);
        s.alpha_bars_.push_back(ab);
        s.variances_.push_back((1.0 - prev) / (1.0 - ab) * (1.0 - a));
        s.timesteps_.push_back(t);
    }
    return s;
}

std::vector<float> forward_sample(std::span<const float> z0, double alpha_bar, std::span<const float> eps) {
    const double ab = clamp_unit(alpha_bar);
    return affine(z0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

std::vector<float> forward_sample(std::span<const float> z0, int t, std::span<const float> eps,
                                  const NoiseSchedule & schedule) {
    return forward_sample(z0, schedule.alpha_bar(t), eps);
}

std::vector<double> forward_sample(std::span<const double> z0, double alpha_bar, std::span<const double> eps) {
    const double ab = clamp_unit(alpha_bar);
    return affine(z0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

std::vector<float> v_target(std::span<const float> z0, std::span<const float> eps, double alpha_bar) {
    const double ab = clamp_unit(alpha_bar);
    return affine(eps, std::sqrt(ab), z0, -std::sqrt(1.0 - ab));
}

std::vector<float> v_target(std::span<const float> z0, std::span<const float> eps, int t,
                            const NoiseSchedule & schedule) {
    return v_target(z0, eps, schedule.alpha_bar(t));
}

std::vector<double> v_target(std::span<const double> z0, std::span<const double> eps, double alpha_bar) {
    const double ab = clamp_unit(alpha_bar);
    return affine(eps, std::sqrt(ab), z0, -std::sqrt(1.0 - ab));
}

std::vector<float> v_to_epsilon(std::span<const float> v, std::span<const float> zt, double alpha_bar) {
    const double ab = clamp_unit(alpha_bar);
    return affine(v, std::sqrt(ab), zt, std::sqrt(1.0 - ab));
}

std::vector<float> v_to_epsilon(std::span<const float> v, std::span<const float> zt, int t,
                                const NoiseSchedule & schedule) {
    return v_to_epsilon(v, zt, schedule.alpha_bar(t));
}

std::vector<double> v_to_epsilon(std::span<const double> v, std::span<const double> zt, double alpha_bar) {
    const double ab = clamp_unit(alpha_bar);
    return affine(v, std::sqrt(ab), zt, std::sqrt(1.0 - ab));
}

std::vector<float> posterior_mean(std::span<const float> zt, std::span<const float> eps, double alpha,
                                  double alpha_bar) {
    const double inv = 1.0 / std::sqrt(alpha);
    return affine(zt, inv, eps, -inv * (1.0 - alpha) / std::sqrt(1.0 - alpha_bar));
}

std::vector<float> SignalCodec::encode(const Waveform & y) const {
    const std::vector<double> mono = y.mono();
    return std::vector<float>(mono.begin(), mono.end());
}

Waveform SignalCodec::decode(std::span<const float> z, std::uint32_t sample_rate) const {
    std::vector<double> samples(z.size());
    std::transform(z.begin(), z.end(), samples.begin(),
                   [](float x) { return std::clamp(static_cast<double>(x), -1.0, 1.0); });
    return Waveform::from_mono(std::move(samples), sample_rate);
}

NoiseSource gaussian_noise(std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng](std::span<float> out) {
        std::normal_distribution<float> dist(0.0f, 1.0f);
        for (float & x : out) x = dist(*rng);
    };
}

std::vector<float> cfg_predict(const Denoiser & net, std::span<const float> zt, int t, const Conditioning & cond,
                               std::span<const float> control, double guidance) {
    if (guidance == 0.0) return net.forward(zt, t, Conditioning::unconditional(), control);
    std::vector<float> v_cond = net.forward(zt, t, cond, control);
    if (guidance == 1.0) return v_cond;
    const std::vector<float> v_uncond = net.forward(zt, t, Conditioning::unconditional(), control);
    for (size_t i = 0; i < v_cond.size(); ++i) {
        v_cond[i] = static_cast<float>(v_uncond[i] + guidance * (static_cast<double>(v_cond[i]) - v_uncond[i]));
    }
    return v_cond;
}

std::vector<float> sample_latent(const Denoiser & net, const NoiseSchedule & schedule, const Conditioning & cond,
                                 std::span<const float> control, const SampleOptions & opts,
                                 const NoiseSource & noise) {
    const NoiseSchedule sched = schedule.respaced(opts.steps);
    const size_t len = static_cast<size_t>(net.config().latent_length);
    if (!control.empty() && control.size() != len) {
        fail(ErrorCode::ShapeMismatch, "control signal length must equal the latent length");
    }
    std::vector<float> z(len);
    noise(z);
    std::vector<float> draw(len);
    for (int k = sched.steps(); k >= 1; --k) {
        const int t = sched.timestep(k);
        const std::vector<float> v = opts.use_cfg ? cfg_predict(net, z, t, cond, control, opts.guidance)
                                                  : net.forward(z, t, cond, control);
        const std::vector<float> eps = v_to_epsilon(v, z, sched.alpha_bar(k));
        z = posterior_mean(z, eps, sched.alpha(k), sched.alpha_bar(k));
        if (k > 1) {
            const float sigma = static_cast<float>(std::sqrt(sched.posterior_variance(k)));
            noise(draw);
            for (size_t i = 0; i < len; ++i) z[i] += sigma * draw[i];
        }
    }
    return z;
}

Waveform sample(const Denoiser & net, const NoiseSchedule & schedule, const Conditioning & cond,
                const ControlSignal & control, const SampleOptions & opts, std::uint64_t seed,
                std::uint32_t sample_rate) {
    const std::vector<float> ctrl(control.values.begin(), control.values.end());
    const std::vector<float> z =
        sample_latent(net, schedule, cond, ctrl, opts, gaussian_noise(mix_seed(seed, kStreamSampleNoise)));
    return SignalCodec{}.decode(z, sample_rate);
}

// ---------------------------------------------------------------------------

double train_step(Denoiser & net, std::span<const GenTrainItem> items, const NoiseSchedule & schedule,
                  TrainPhase phase, std::mt19937_64 & rng, const AdamWConfig & opt, std::uint64_t & step) {
    if (items.empty()) fail(ErrorCode::InvalidBatch, "empty training batch");
    const size_t len = static_cast<size_t>(net.config().latent_length);
    const bool control_on = phase == TrainPhase::Control;
    GradientScope scope;
    scope.main = !control_on;
    scope.projection = true;
    scope.control = control_on;

    net.zero_grad();
    std::uniform_int_distribution<int> pick_t(1, schedule.steps());
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    const float scale = 1.0f / static_cast<float>(items.size() * len);
    std::vector<float> eps(len);
    double total = 0.0;
    for (const GenTrainItem & item : items) {
        if (item.z0.size() != len) fail(ErrorCode::ShapeMismatch, "training latent has the wrong length");
        if (control_on && item.control.size() != len) {
            fail(ErrorCode::ShapeMismatch, "training control signal has the wrong length");
        }
        const int t = pick_t(rng);
        for (float & e : eps) e = gauss(rng);
        const double ab = schedule.alpha_bar(t);
        const std::vector<float> zt = forward_sample(item.z0, ab, eps);
        const std::vector<float> target = v_target(item.z0, eps, ab);
        std::span<const float> control;
        if (control_on) control = item.control;
        total += net.accumulate_gradient(zt, t, item.cond, control, target, scale, scope);
    }

    AdamWConfig cfg = opt;
    std::vector<Param<float> *> params;
    if (scope.main) {
        auto p = net.main_params();
        params.insert(params.end(), p.begin(), p.end());
    }
    if (scope.projection) {
        auto p = net.projection_params();
        params.insert(params.end(), p.begin(), p.end());
    }
    if (scope.control) {
        auto p = net.control_params();
        params.insert(params.end(), p.begin(), p.end());
    }
    ++step;
    adamw_step<float>(params, cfg, step);
    const double loss = total / static_cast<double>(items.size() * len);
    if (!std::isfinite(loss)) fail(ErrorCode::DivergenceDetected, "generator loss is not finite");
    return loss;
}

GenTrainResult train_generator(Denoiser & net, std::span<const GenTrainItem> pool, const NoiseSchedule & schedule,
                               const GenTrainConfig & cfg, std::uint64_t & step) {
    if (pool.empty()) fail(ErrorCode::InvalidBatch, "empty training pool");
    if (cfg.steps < 0 || cfg.batch < 1) fail(ErrorCode::InvalidConfig, "invalid generator training config");
    if (!(cfg.modality_dropout >= 0.0 && cfg.modality_dropout <= 1.0) ||
        !(cfg.unconditional_dropout >= 0.0 && cfg.unconditional_dropout <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "dropout rates must lie in [0, 1]");
    }
    AdamWConfig opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    GenTrainResult result;
    std::vector<GenTrainItem> batch(static_cast<size_t>(cfg.batch));
    const std::uint64_t base = mix_seed(cfg.seed, kStreamTrainBatch + static_cast<std::uint64_t>(cfg.phase));
    for (int s = 0; s < cfg.steps; ++s) {
        std::mt19937_64 rng(mix_seed(base, static_cast<std::uint64_t>(s)));
        std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
        std::bernoulli_distribution drop(cfg.modality_dropout);
        std::bernoulli_distribution drop_all(cfg.unconditional_dropout);
        for (auto & item : batch) {
            const GenTrainItem & src = pool[pick(rng)];
            item.z0 = src.z0;
            item.control = src.control;
            item.cond = drop_all(rng) ? Conditioning::unconditional() : src.cond;
            for (auto & e : item.cond.embeddings)
                if (drop(rng)) e.reset();
        }
        result.loss_curve.push_back(train_step(net, batch, schedule, cfg.phase, rng, opt, step));
    }
    return result;
}

} // namespace foleygram
