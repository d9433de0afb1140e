#include "foleygram/foleygram.h"

#include "config.hpp"
#include "diffusion.hpp"
#include "envelope.hpp"
#include "error.hpp"
#include "gram_loss.hpp"
#include "linalg.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"

#include <exception>
#include <new>
#include <string>
#include <vector>

struct fg_schedule {
    foleygram::NoiseSchedule schedule;
};

struct fg_generator {
    foleygram::Denoiser net;
    foleygram::NoiseSchedule schedule;
};

struct fg_config {
    foleygram::Config config;
};

struct fg_result {
    std::string hash;
    std::vector<std::string> outputs;
};

namespace {

thread_local std::string g_last_error;

fg_status set_error(fg_status status, const std::string & message) {
    g_last_error = message;
    return status;
}

template <typename F>
fg_status guarded(F && body) {
    try {
        body();
        g_last_error.clear();
        return FG_OK;
    } catch (const foleygram::Error & e) {
        return set_error(static_cast<fg_status>(e.code()), e.what());
    } catch (const foleygram::ConfigError & e) {
        return set_error(FG_CONFIG_PARSE, e.what());
    } catch (const std::bad_alloc &) {
        return set_error(FG_INTERNAL, "out of memory");
    } catch (const std::exception & e) {
        return set_error(FG_INTERNAL, e.what());
    } catch (...) {
        return set_error(FG_INTERNAL, "unknown failure");
    }
}

void require(bool ok, const char * what) {
    if (!ok) foleygram::fail(foleygram::ErrorCode::InvalidArgument, what);
}

Eigen::MatrixXd column_major(const double * data, size_t rows, size_t cols) {
    return Eigen::Map<const Eigen::MatrixXd>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Eigen::MatrixXd row_major(const double * data, size_t rows, size_t cols) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMat>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

} // namespace

extern "C" {

const char * fg_version(void) { return "0.1.0"; }

const char * fg_status_name(fg_status status) {
    switch (status) {
        case FG_OK: return "ok";
        case FG_INVALID_ARGUMENT: return "invalid argument";
        case FG_ZERO_VECTOR: return "zero vector";
        case FG_DIMENSION_MISMATCH: return "dimension mismatch";
        case FG_SINGULAR_GRAM: return "singular gram matrix";
        case FG_INVALID_BATCH: return "invalid batch";
        case FG_INVALID_CONFIG: return "invalid config";
        case FG_DIVERGENCE_DETECTED: return "divergence detected";
        case FG_TOO_SHORT: return "signal too short";
        case FG_INVALID_TARGET: return "invalid target";
        case FG_UNSUPPORTED_FORMAT: return "unsupported format";
        case FG_CORRUPT_HEADER: return "corrupt header";
        case FG_IO: return "i/o error";
        case FG_STEP_OUT_OF_RANGE: return "step out of range";
        case FG_SHAPE_MISMATCH: return "shape mismatch";
        case FG_INVALID_STEPS: return "invalid steps";
        case FG_DEGENERATE_VARIANCE: return "degenerate variance";
        case FG_CONFIG_PARSE: return "config parse error";
        case FG_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char * fg_last_error(void) { return g_last_error.c_str(); }

fg_status fg_volume(const double * columns, size_t n, size_t k, double * out) {
    return guarded([&] {
        require(columns && out, "null pointer");
        *out = foleygram::volume(column_major(columns, n, k));
    });
}

fg_status fg_volume_gradient(const double * columns, size_t n, size_t k, double * grad) {
    return guarded([&] {
        require(columns && grad, "null pointer");
        const Eigen::MatrixXd g = foleygram::volume_gradient(column_major(columns, n, k));
        Eigen::Map<Eigen::MatrixXd>(grad, g.rows(), g.cols()) = g;
    });
}

fg_status fg_gram_loss(const double * audio, const double * video, const double * text, size_t n, size_t batch,
                       double temperature, int direction, double * out) {
    return guarded([&] {
        require(audio && video && text && out, "null pointer");
        require(direction >= FG_LOSS_AV2T && direction <= FG_LOSS_COMBINED, "unknown loss direction");
        foleygram::TripletBatch b{column_major(audio, n, batch), column_major(video, n, batch),
                                  column_major(text, n, batch)};
        foleygram::LossConfig cfg;
        cfg.temperature = temperature;
        cfg.direction = static_cast<foleygram::LossDirection>(direction);
        *out = foleygram::gram_loss(b, cfg);
    });
}

size_t fg_envelope_frame_count(size_t length, size_t window, size_t hop) {
    if (window == 0 || hop == 0) return 0;
    return foleygram::envelope_frame_count(length, window, hop);
}

fg_status fg_rms_envelope(const double * mono, size_t length, size_t window, size_t hop, double * frames) {
    return guarded([&] {
        require(mono && frames, "null pointer");
        const foleygram::Envelope e = foleygram::rms_envelope(std::span(mono, length), 0.0, window, hop);
        std::copy(e.frames.begin(), e.frames.end(), frames);
    });
}

fg_status fg_resample_linear(const double * values, size_t length, size_t target, double * out) {
    return guarded([&] {
        require(values && out, "null pointer");
        const std::vector<double> r = foleygram::resample_linear(std::span(values, length), target);
        std::copy(r.begin(), r.end(), out);
    });
}

fg_status fg_frechet_distance(const double * a, size_t na, const double * b, size_t nb, size_t dim, double * out) {
    return guarded([&] {
        require(a && b && out, "null pointer");
        *out = foleygram::frechet_distance(foleygram::EmbeddingSet::fit(row_major(a, na, dim)),
                                           foleygram::EmbeddingSet::fit(row_major(b, nb, dim)));
    });
}

fg_status fg_cosine_score(const double * gen, const double * ref, size_t count, size_t dim, double * out) {
    return guarded([&] {
        require(gen && ref && out, "null pointer");
        *out = foleygram::cosine_score(row_major(gen, count, dim), row_major(ref, count, dim));
    });
}

fg_status fg_schedule_create(int steps, double beta_min, double beta_max, fg_schedule ** out) {
    return guarded([&] {
        require(out != nullptr, "null pointer");
        *out = new fg_schedule{foleygram::build_schedule(steps, beta_min, beta_max)};
    });
}

void fg_schedule_destroy(fg_schedule * schedule) { delete schedule; }

int fg_schedule_steps(const fg_schedule * schedule) { return schedule ? schedule->schedule.steps() : 0; }

fg_status fg_schedule_alpha_bar(const fg_schedule * schedule, int t, double * out) {
    return guarded([&] {
        require(schedule && out, "null pointer");
        *out = schedule->schedule.alpha_bar(t);
    });
}

fg_status fg_schedule_posterior_variance(const fg_schedule * schedule, int t, double * out) {
    return guarded([&] {
        require(schedule && out, "null pointer");
        *out = schedule->schedule.posterior_variance(t);
    });
}

fg_status fg_generator_load(const char * path, fg_generator ** out) {
    return guarded([&] {
        require(path && out, "null pointer");
        const foleygram::Checkpoint ck = foleygram::Checkpoint::load(path);
        *out = new fg_generator{foleygram::Denoiser::from_checkpoint(ck),
                                foleygram::build_schedule(static_cast<int>(ck.get_u64("meta.diffusion_steps")))};
    });
}

void fg_generator_destroy(fg_generator * generator) { delete generator; }

size_t fg_generator_latent_length(const fg_generator * generator) {
    return generator ? static_cast<size_t>(generator->net.config().latent_length) : 0;
}

fg_status fg_generator_sample(const fg_generator * generator, const float * audio, const float * video,
                              const float * text, size_t embedding_dim, const float * control, int steps,
                              double guidance, uint64_t seed, float * out) {
    return guarded([&] {
        require(generator && out, "null pointer");
        foleygram::Conditioning cond;
        const float * parts[3] = {audio, video, text};
        for (size_t m = 0; m < 3; ++m)
            if (parts[m]) cond.embeddings[m] = std::vector<float>(parts[m], parts[m] + embedding_dim);
        const size_t len = fg_generator_latent_length(generator);
        foleygram::ControlSignal ctrl;
        if (control) ctrl.values.assign(control, control + len);
        foleygram::SampleOptions opts;
        opts.steps = steps;
        opts.guidance = guidance;
        const foleygram::Waveform w =
            foleygram::sample(generator->net, generator->schedule, cond, ctrl, opts, seed, 44100);
        std::copy(w.samples.begin(), w.samples.end(), out);
    });
}

fg_status fg_config_create(fg_config ** out) {
    return guarded([&] {
        require(out != nullptr, "null pointer");
        *out = new fg_config{};
    });
}

fg_status fg_config_parse(const char * text, fg_config ** out) {
    return guarded([&] {
        require(text && out, "null pointer");
        *out = new fg_config{foleygram::Config::parse(text)};
    });
}

fg_status fg_config_load(const char * path, fg_config ** out) {
    return guarded([&] {
        require(path && out, "null pointer");
        *out = new fg_config{foleygram::Config::load(path)};
    });
}

fg_status fg_config_set(fg_config * config, const char * key, const char * value) {
    return guarded([&] {
        require(config && key && value, "null pointer");
        config->config.set(key, value);
    });
}

void fg_config_destroy(fg_config * config) { delete config; }

fg_status fg_run_command(const char * name, const fg_config * config, fg_result ** out) {
    return guarded([&] {
        require(name && out, "null pointer");
        const foleygram::Config empty;
        const foleygram::CommandResult r = foleygram::run_command(name, config ? config->config : empty);
        auto * res = new fg_result{r.config_hash, {}};
        for (const auto & p : r.outputs) res->outputs.push_back(p.string());
        *out = res;
    });
}

const char * fg_result_config_hash(const fg_result * result) { return result ? result->hash.c_str() : ""; }

size_t fg_result_output_count(const fg_result * result) { return result ? result->outputs.size() : 0; }

const char * fg_result_output(const fg_result * result, size_t index) {
    if (!result || index >= result->outputs.size()) return nullptr;
    return result->outputs[index].c_str();
}

void fg_result_destroy(fg_result * result) { delete result; }

} // extern "C"
