#ifndef FOLEYGRAM_FOLEYGRAM_H
#define FOLEYGRAM_FOLEYGRAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(FG_BUILDING_LIBRARY)
#define FG_API __attribute__((visibility("default")))
#else
#define FG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns FG_OK or one of these; fg_last_error() holds the message
 * of the most recent failure on the calling thread. */
typedef enum fg_status {
    FG_OK = 0,
    FG_INVALID_ARGUMENT = 1,
    FG_ZERO_VECTOR = 2,
    FG_DIMENSION_MISMATCH = 3,
    FG_SINGULAR_GRAM = 4,
    FG_INVALID_BATCH = 5,
    FG_INVALID_CONFIG = 6,
    FG_DIVERGENCE_DETECTED = 7,
    FG_TOO_SHORT = 8,
    FG_INVALID_TARGET = 9,
    FG_UNSUPPORTED_FORMAT = 10,
    FG_CORRUPT_HEADER = 11,
    FG_IO = 12,
    FG_STEP_OUT_OF_RANGE = 13,
    FG_SHAPE_MISMATCH = 14,
    FG_INVALID_STEPS = 15,
    FG_DEGENERATE_VARIANCE = 16,
    FG_CONFIG_PARSE = 100,
    FG_INTERNAL = 101
} fg_status;

FG_API const char * fg_version(void);
FG_API const char * fg_status_name(fg_status status);
FG_API const char * fg_last_error(void);

/* ---- geometry ---------------------------------------------------------- */

/* `columns` is n x k, column-major. */
FG_API fg_status fg_volume(const double * columns, size_t n, size_t k, double * out);
/* Writes the n x k gradient of the volume, column-major. */
FG_API fg_status fg_volume_gradient(const double * columns, size_t n, size_t k, double * grad);

enum { FG_LOSS_AV2T = 0, FG_LOSS_T2AV = 1, FG_LOSS_COMBINED = 2 };

/* Unit-norm n x batch column blocks, column-major. */
FG_API fg_status fg_gram_loss(const double * audio, const double * video, const double * text, size_t n, size_t batch,
                              double temperature, int direction, double * out);

/* ---- envelope ---------------------------------------------------------- */

FG_API size_t fg_envelope_frame_count(size_t length, size_t window, size_t hop);
/* `frames` must hold fg_envelope_frame_count(length, window, hop) values. */
FG_API fg_status fg_rms_envelope(const double * mono, size_t length, size_t window, size_t hop, double * frames);
FG_API fg_status fg_resample_linear(const double * values, size_t length, size_t target, double * out);

/* ---- metrics ----------------------------------------------------------- */

/* Row-major sets: a is na x dim, b is nb x dim. */
FG_API fg_status fg_frechet_distance(const double * a, size_t na, const double * b, size_t nb, size_t dim,
                                     double * out);
FG_API fg_status fg_cosine_score(const double * gen, const double * ref, size_t count, size_t dim, double * out);

/* ---- diffusion schedule ------------------------------------------------ */

typedef struct fg_schedule fg_schedule;

FG_API fg_status fg_schedule_create(int steps, double beta_min, double beta_max, fg_schedule ** out);
FG_API void fg_schedule_destroy(fg_schedule * schedule);
FG_API int fg_schedule_steps(const fg_schedule * schedule);
FG_API fg_status fg_schedule_alpha_bar(const fg_schedule * schedule, int t, double * out);
FG_API fg_status fg_schedule_posterior_variance(const fg_schedule * schedule, int t, double * out);

/* ---- generator --------------------------------------------------------- */

typedef struct fg_generator fg_generator;

FG_API fg_status fg_generator_load(const char * path, fg_generator ** out);
FG_API void fg_generator_destroy(fg_generator * generator);
FG_API size_t fg_generator_latent_length(const fg_generator * generator);
/* Conditioning embeddings may be NULL to leave that modality out; each has
 * `embedding_dim` entries. `control` is NULL or latent_length samples.
 * `out` receives latent_length samples in [-1, 1]. */
FG_API fg_status fg_generator_sample(const fg_generator * generator, const float * audio, const float * video,
                                     const float * text, size_t embedding_dim, const float * control, int steps,
                                     double guidance, uint64_t seed, float * out);

/* ---- commands ---------------------------------------------------------- */

typedef struct fg_config fg_config;
typedef struct fg_result fg_result;

FG_API fg_status fg_config_create(fg_config ** out);
FG_API fg_status fg_config_parse(const char * text, fg_config ** out);
FG_API fg_status fg_config_load(const char * path, fg_config ** out);
FG_API fg_status fg_config_set(fg_config * config, const char * key, const char * value);
FG_API void fg_config_destroy(fg_config * config);

/* Runs one of: gen-data, train-align, eval-align, extract-env, train-gen,
 * generate, evaluate, ablate. On success *out lists the written files. */
FG_API fg_status fg_run_command(const char * name, const fg_config * config, fg_result ** out);
FG_API const char * fg_result_config_hash(const fg_result * result);
FG_API size_t fg_result_output_count(const fg_result * result);
FG_API const char * fg_result_output(const fg_result * result, size_t index);
FG_API void fg_result_destroy(fg_result * result);

#ifdef __cplusplus
}
#endif

#endif
