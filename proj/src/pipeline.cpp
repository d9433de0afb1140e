#include "pipeline.hpp"

#include "error.hpp"
#include "metrics.hpp"
#include "stats.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>

namespace foleygram {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Generation evaluation

std::vector<GenTrainItem> make_train_items(const Dataset & data, const EncoderParams & encoders, std::size_t window,
                                           std::size_t hop) {
    if (data.kind != DatasetKind::Foley) fail(ErrorCode::InvalidConfig, "generator training needs a foley dataset");
    std::vector<GenTrainItem> items;
    items.reserve(data.size());
    for (const auto & s : data.samples) {
        GenTrainItem item;
        item.z0 = s.waveform;
        const Envelope env = rms_envelope(Waveform::from_mono(std::vector<double>(s.waveform.begin(), s.waveform.end()),
                                                              data.sample_rate),
                                          window, hop);
        const ControlSignal ctrl = resample_envelope(env, s.waveform.size());
        item.control.assign(ctrl.values.begin(), ctrl.values.end());
        const auto emb = encode(encoders, s);
        item.cond = Conditioning::from_embeddings(emb);
        items.push_back(std::move(item));
    }
    return items;
}

Eigen::MatrixXd audio_embeddings(const EncoderParams & encoders, std::span<const std::vector<float>> waveforms,
                                 std::uint32_t sample_rate) {
    const auto bands = static_cast<int>(encoders.audio.input_dim());
    Eigen::MatrixXd views(bands, static_cast<Eigen::Index>(waveforms.size()));
    for (size_t i = 0; i < waveforms.size(); ++i) {
        views.col(static_cast<Eigen::Index>(i)) = audio_features(waveforms[i], sample_rate, bands);
    }
    return encode_views(encoders.audio, views).transpose();
}

CentroidProbe CentroidProbe::fit(const Eigen::MatrixXd & embeddings, std::span<const int> labels, int classes) {
    if (static_cast<size_t>(embeddings.rows()) != labels.size()) {
        fail(ErrorCode::ShapeMismatch, "probe needs one label per embedding");
    }
    CentroidProbe p;
    p.centroids = Eigen::MatrixXd::Zero(classes, embeddings.cols());
    std::vector<int> counts(static_cast<size_t>(classes), 0);
    for (size_t i = 0; i < labels.size(); ++i) {
        p.centroids.row(labels[i]) += embeddings.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<size_t>(labels[i])];
    }
    for (int c = 0; c < classes; ++c) {
        if (counts[static_cast<size_t>(c)] == 0) fail(ErrorCode::InvalidBatch, "probe class without samples");
        p.centroids.row(c) /= counts[static_cast<size_t>(c)];
    }
    return p;
}

int CentroidProbe::predict(const Eigen::VectorXd & embedding) const {
    Eigen::Index best = 0;
    (centroids.rowwise() - embedding.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best);
}

GenEvalResult evaluate_generation(const Denoiser & net, const NoiseSchedule & schedule, const EncoderParams & encoders,
                                  const Dataset & train, const Dataset & test, const GenEvalOptions & opts) {
    if (opts.clips < 2 || static_cast<size_t>(opts.clips) > test.size()) {
        fail(ErrorCode::InvalidConfig, "evaluation clip count must lie in [2, test size]");
    }
    std::vector<std::vector<float>> train_waves;
    std::vector<int> train_labels;
    for (const auto & s : train.samples) {
        train_waves.push_back(s.waveform);
        train_labels.push_back(s.class_id);
    }
    const CentroidProbe probe =
        CentroidProbe::fit(audio_embeddings(encoders, train_waves, train.sample_rate), train_labels, train.classes);

    GenEvalResult r;
    r.clips = opts.clips;
    std::vector<std::vector<float>> real_waves;
    std::vector<std::vector<float>> gen_waves;
    int correct = 0;
    for (int i = 0; i < opts.clips; ++i) {
        const SyntheticSample & s = test.samples[static_cast<size_t>(i)];
        const Waveform real = Waveform::from_mono(std::vector<double>(s.waveform.begin(), s.waveform.end()),
                                                  test.sample_rate);
        const Envelope env = rms_envelope(real, opts.window, opts.hop);
        const ControlSignal ctrl = resample_envelope(env, s.waveform.size());
        const Conditioning cond = Conditioning::from_embeddings(encode(encoders, s)).masked(opts.mask);
        Waveform gen = sample(net, schedule, cond, ctrl, opts.sampling, mix_seed(opts.seed, static_cast<std::uint64_t>(i)),
                              test.sample_rate);
        double corr = 0.0;
        try {
            corr = envelope_correlation(env, gen);
        } catch (const Error & e) {
            if (e.code() != ErrorCode::DegenerateVariance) throw;
        }
        r.per_clip_correlation.push_back(corr);
        std::vector<float> g(gen.samples.begin(), gen.samples.end());
        const Eigen::MatrixXd ge = audio_embeddings(encoders, std::span(&g, 1), test.sample_rate);
        if (probe.predict(ge.row(0).transpose()) == s.class_id) ++correct;
        real_waves.push_back(s.waveform);
        gen_waves.push_back(std::move(g));
        r.outputs.push_back(std::move(gen));
    }
    const EmbeddingSet real_set = EmbeddingSet::fit(audio_embeddings(encoders, real_waves, test.sample_rate));
    const EmbeddingSet gen_set = EmbeddingSet::fit(audio_embeddings(encoders, gen_waves, test.sample_rate));
    r.fad = frechet_distance(real_set, gen_set);
    r.cosine = cosine_score(gen_set, real_set);
    r.envelope_correlation = mean(r.per_clip_correlation);
    r.class_accuracy = static_cast<double>(correct) / opts.clips;
    r.class_p = binomial_upper_tail(correct, opts.clips, 1.0 / test.classes);
    return r;
}

std::vector<AblationRow> run_ablation(const Denoiser & net, const NoiseSchedule & schedule,
                                      const EncoderParams & encoders, const Dataset & train, const Dataset & test,
                                      const GenEvalOptions & opts) {
    std::vector<AblationRow> rows;
    for (unsigned mask : ablation_masks()) {
        GenEvalOptions o = opts;
        o.mask = mask;
        AblationRow row{mask, evaluate_generation(net, schedule, encoders, train, test, o)};
        row.result.outputs.clear();
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AblationRow & a, const AblationRow & b) { return a.result.cosine > b.result.cosine; });
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow> & rows) {
    std::ostringstream os;
    os.precision(10);
    os << "rank,modalities,cosine_score,fad,envelope_correlation,class_accuracy,class_p\n";
    int rank = 1;
    for (const auto & row : rows) {
        const auto & r = row.result;
        os << rank++ << ',' << modality_mask_name(row.mask) << ',' << r.cosine << ',' << r.fad << ','
           << r.envelope_correlation << ',' << r.class_accuracy << ',' << r.class_p << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Run {
    Config cfg;
    std::string hash;
    fs::path out;
    CommandResult result;

    fs::path artifact(const std::string & stem, const std::string & ext) const {
        return out / (stem + "-" + hash + ext);
    }
    void wrote(fs::path p) { result.outputs.push_back(std::move(p)); }
};

using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kSampling = {{"modalities", "avt"}, {"guidance", "2"}, {"steps", "150"}};
const Defaults kEnvelope = {{"window", "512"}, {"hop", "128"}};

const std::map<std::string, std::vector<Defaults>> & command_defaults() {
    static const std::map<std::string, std::vector<Defaults>> table = {
        {"gen-data", {{{"data.kind", "foley"}, {"data.classes", "8"}, {"data.samples", "512"}}}},
        {"train-align",
         {{{"data", ""}, {"align.loss", "gram"}, {"align.anchor", "text"}, {"align.lr", "1e-4"},
           {"align.batch", "64"}, {"align.steps", "2000"}, {"align.temperature", "0.07"}, {"align.holdout", "0.25"}}}},
        {"eval-align", {{{"data", ""}, {"encoders", ""}, {"align.holdout", "0.25"}, {"align.candidates", "8"}}}},
        {"extract-env", {{{"input", ""}}, kEnvelope}},
        {"train-gen",
         {{{"data", ""}, {"encoders", ""}, {"gen.main_steps", "2000"}, {"gen.control_steps", "2000"},
           {"gen.batch", "16"}, {"gen.lr", "1e-3"}, {"gen.dropout", "0.1"}, {"gen.uncond_dropout", "0.1"},
           {"gen.width", "64"}, {"gen.blocks", "4"}, {"gen.diffusion_steps", "1000"}, {"eval.holdout", "0.25"}},
          kEnvelope}},
        {"generate", {{{"data", ""}, {"encoders", ""}, {"model", ""}, {"clip", "0"}}, kSampling, kEnvelope}},
        {"evaluate",
         {{{"data", ""}, {"encoders", ""}, {"model", ""}, {"eval.clips", "16"}, {"eval.holdout", "0.25"}},
          kSampling,
          kEnvelope}},
        {"ablate",
         {{{"data", ""}, {"encoders", ""}, {"model", ""}, {"eval.clips", "16"}, {"eval.holdout", "0.25"},
           {"guidance", "2"}, {"steps", "150"}},
          kEnvelope}},
    };
    return table;
}

std::string required(const Config & cfg, const std::string & key) {
    std::string v = cfg.get_string(key);
    if (v.empty()) throw ConfigError("missing required config key '" + key + "'");
    return v;
}

int positive_int(const Config & cfg, const std::string & key) {
    const long long v = cfg.get_int(key, 0);
    if (v < 1 || v > (1LL << 30)) throw ConfigError("config key '" + key + "' must be a positive integer");
    return static_cast<int>(v);
}

double fraction(const Config & cfg, const std::string & key) {
    const double v = cfg.get_double(key, 0.0);
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("config key '" + key + "' must lie in (0, 1)");
    return v;
}

void write_text(const fs::path & path, const std::string & text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) fail(ErrorCode::Io, "failed writing " + path.string());
}

Dataset load_dataset(const Config & cfg) {
    return Dataset::from_checkpoint(Checkpoint::load(required(cfg, "data")));
}

TrainState load_encoders(const Config & cfg) {
    return TrainState::from_checkpoint(Checkpoint::load(required(cfg, "encoders")));
}

struct Generator {
    Denoiser net;
    NoiseSchedule schedule;
};

Generator load_generator(const Config & cfg) {
    const Checkpoint ck = Checkpoint::load(required(cfg, "model"));
    Generator g{Denoiser::from_checkpoint(ck), build_schedule(static_cast<int>(ck.get_u64("meta.diffusion_steps")))};
    return g;
}

GenEvalOptions eval_options(const Config & cfg) {
    GenEvalOptions o;
    o.seed = cfg.get_u64("seed", 0);
    o.mask = cfg.has("modalities") ? parse_modality_mask(cfg.get_string("modalities")) : kMaskAll;
    o.sampling.guidance = cfg.get_double("guidance", kDefaultGuidance);
    o.sampling.steps = positive_int(cfg, "steps");
    o.window = static_cast<std::size_t>(positive_int(cfg, "window"));
    o.hop = static_cast<std::size_t>(positive_int(cfg, "hop"));
    if (cfg.has("eval.clips")) o.clips = positive_int(cfg, "eval.clips");
    return o;
}

AlignConfig align_config(const Config & cfg) {
    AlignConfig a;
    const std::string loss = cfg.get_string("align.loss");
    if (loss == "gram") {
        a.loss = AlignmentLoss::Gram;
    } else if (loss == "pairwise") {
        a.loss = AlignmentLoss::PairwiseCosine;
    } else {
        throw ConfigError("align.loss must be gram or pairwise");
    }
    const unsigned anchor = parse_modality_mask(cfg.get_string("align.anchor").substr(0, 1));
    a.anchor = anchor == kMaskAudio ? Modality::Audio : anchor == kMaskVideo ? Modality::Video : Modality::Text;
    a.lr = cfg.get_double("align.lr", a.lr);
    a.batch = positive_int(cfg, "align.batch");
    a.steps = positive_int(cfg, "align.steps");
    a.temperature = cfg.get_double("align.temperature", a.temperature);
    a.seed = cfg.get_u64("seed", 0);
    return a;
}

std::string loss_curve_csv(const std::vector<std::pair<int, double>> & rows, const std::vector<int> & phases) {
    std::ostringstream os;
    os.precision(10);
    os << "step,phase,loss\n";
    for (size_t i = 0; i < rows.size(); ++i) os << rows[i].first << ',' << phases[i] << ',' << rows[i].second << '\n';
    return os.str();
}

void cmd_gen_data(Run & run) {
    const Config & cfg = run.cfg;
    const std::string kind = cfg.get_string("data.kind");
    const int classes = positive_int(cfg, "data.classes");
    const int samples = positive_int(cfg, "data.samples");
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    Dataset d;
    if (kind == "alignment") {
        d = generate_dataset(classes, samples, seed);
    } else if (kind == "foley") {
        FoleyConfig fc;
        fc.classes = classes;
        fc.samples = samples;
        fc.seed = seed;
        d = generate_foley_dataset(fc);
    } else {
        throw ConfigError("data.kind must be alignment or foley");
    }
    const fs::path path = run.artifact("dataset", ".gfck");
    d.to_checkpoint().save(path);
    run.wrote(path);
}

void cmd_train_align(Run & run) {
    const Dataset data = load_dataset(run.cfg);
    const auto [train, test] = split_dataset(data, fraction(run.cfg, "align.holdout"));
    const AlignConfig ac = align_config(run.cfg);
    const AlignRun result = train_alignment(train, ac);
    const fs::path path = run.artifact("encoders", ".gfck");
    result.state.to_checkpoint().save(path);
    run.wrote(path);
    std::vector<std::pair<int, double>> rows;
    for (size_t i = 0; i < result.loss_curve.size(); ++i) rows.emplace_back(static_cast<int>(i) + 1, result.loss_curve[i]);
    const fs::path curve = run.artifact("align_loss", ".csv");
    write_text(curve, loss_curve_csv(rows, std::vector<int>(rows.size(), 1)));
    run.wrote(curve);
}

void cmd_eval_align(Run & run) {
    const Dataset data = load_dataset(run.cfg);
    const TrainState state = load_encoders(run.cfg);
    const auto [train, test] = split_dataset(data, fraction(run.cfg, "align.holdout"));
    const int candidates = positive_int(run.cfg, "align.candidates");
    const RetrievalReport rr = evaluate_retrieval(state, test, candidates);
    const AlignmentStats st = alignment_stats(state, test);
    const std::uint64_t seed = run.cfg.get_u64("seed", 0);
    const std::vector<MetricRow> rows = {
        {"recall_at_1", rr.recall_at_1, seed, run.hash},
        {"recall_at_5", rr.recall_at_5, seed, run.hash},
        {"matched_av_cosine", st.mean_matched_av_cosine, seed, run.hash},
        {"matched_volume", st.mean_matched_volume, seed, run.hash},
        {"mismatched_volume", st.mean_mismatched_volume, seed, run.hash},
        {"volume_mann_whitney_p", st.mann_whitney_p, seed, run.hash},
    };
    const fs::path path = run.artifact("align_metrics", ".csv");
    write_metric_csv(path, rows);
    run.wrote(path);
}

void cmd_extract_env(Run & run) {
    const Waveform w = read_wav(required(run.cfg, "input"));
    const Envelope e = rms_envelope(w, static_cast<std::size_t>(positive_int(run.cfg, "window")),
                                    static_cast<std::size_t>(positive_int(run.cfg, "hop")));
    const fs::path path = run.artifact("envelope", ".csv");
    write_envelope_csv(path, e);
    run.wrote(path);
}

void cmd_train_gen(Run & run) {
    const Config & cfg = run.cfg;
    const Dataset data = load_dataset(cfg);
    if (data.kind != DatasetKind::Foley) fail(ErrorCode::InvalidConfig, "train-gen needs a foley dataset");
    const TrainState enc = load_encoders(cfg);
    const auto [train, test] = split_dataset(data, fraction(cfg, "eval.holdout"));
    const std::vector<GenTrainItem> items =
        make_train_items(train, enc.params, static_cast<std::size_t>(positive_int(cfg, "window")),
                         static_cast<std::size_t>(positive_int(cfg, "hop")));

    DenoiserConfig dc;
    dc.latent_length = static_cast<int>(items.front().z0.size());
    dc.width = positive_int(cfg, "gen.width");
    dc.blocks = positive_int(cfg, "gen.blocks");
    dc.embedding_dim = static_cast<int>(enc.params.audio.output_dim());
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    Denoiser net(dc, seed);
    const int diffusion_steps = positive_int(cfg, "gen.diffusion_steps");
    const NoiseSchedule schedule = build_schedule(diffusion_steps);

    GenTrainConfig gc;
    gc.batch = positive_int(cfg, "gen.batch");
    gc.lr = cfg.get_double("gen.lr", gc.lr);
    gc.modality_dropout = cfg.get_double("gen.dropout", gc.modality_dropout);
    gc.unconditional_dropout = cfg.get_double("gen.uncond_dropout", gc.unconditional_dropout);
    gc.seed = seed;
    std::uint64_t step = 0;
    std::vector<std::pair<int, double>> rows;
    std::vector<int> phases;
    for (TrainPhase phase : {TrainPhase::Main, TrainPhase::Control}) {
        gc.phase = phase;
        gc.steps = static_cast<int>(cfg.get_int(phase == TrainPhase::Main ? "gen.main_steps" : "gen.control_steps", 0));
        if (gc.steps < 0) throw ConfigError("generator step counts must be non-negative");
        const GenTrainResult r = train_generator(net, items, schedule, gc, step);
        for (double loss : r.loss_curve) {
            rows.emplace_back(static_cast<int>(rows.size()) + 1, loss);
            phases.push_back(static_cast<int>(phase));
        }
    }
    Checkpoint ck = net.to_checkpoint();
    ck.add_u64("meta.diffusion_steps", static_cast<std::uint64_t>(diffusion_steps));
    ck.add_u64("meta.step", step);
    const fs::path path = run.artifact("generator", ".gfck");
    ck.save(path);
    run.wrote(path);
    const fs::path curve = run.artifact("gen_loss", ".csv");
    write_text(curve, loss_curve_csv(rows, phases));
    run.wrote(curve);
}

void cmd_generate(Run & run) {
    const Config & cfg = run.cfg;
    const Dataset data = load_dataset(cfg);
    const TrainState enc = load_encoders(cfg);
    const Generator gen = load_generator(cfg);
    const GenEvalOptions o = eval_options(cfg);
    const long long clip = cfg.get_int("clip", 0);
    if (clip < 0 || static_cast<size_t>(clip) >= data.size()) fail(ErrorCode::InvalidConfig, "clip index out of range");
    const SyntheticSample & s = data.samples[static_cast<size_t>(clip)];
    if (s.waveform.empty()) fail(ErrorCode::InvalidConfig, "generate needs a foley dataset");

    Waveform source;
    if (cfg.has("envelope")) {
        source = read_wav(cfg.get_string("envelope"));
    } else {
        source = Waveform::from_mono(std::vector<double>(s.waveform.begin(), s.waveform.end()), data.sample_rate);
    }
    const Envelope env = rms_envelope(source, o.window, o.hop);
    const ControlSignal ctrl = resample_envelope(env, static_cast<std::size_t>(gen.net.config().latent_length));
    const Conditioning cond = Conditioning::from_embeddings(encode(enc.params, s)).masked(o.mask);
    const Waveform out = sample(gen.net, gen.schedule, cond, ctrl, o.sampling, o.seed, data.sample_rate);

    const fs::path wav = run.artifact("generated", ".wav");
    write_wav(wav, out);
    run.wrote(wav);

    // Overlay of the conditioning envelope and the envelope of the output.
    const Envelope got = rms_envelope(out, o.window, o.hop);
    const std::vector<double> aligned = resample_linear(got.frames, env.frames.size());
    std::ostringstream os;
    os.precision(9);
    os << "frame,conditioning,generated\n";
    for (size_t i = 0; i < env.frames.size(); ++i) os << i << ',' << env.frames[i] << ',' << aligned[i] << '\n';
    const fs::path overlay = run.artifact("envelope_overlay", ".csv");
    write_text(overlay, os.str());
    run.wrote(overlay);
}

void cmd_evaluate(Run & run) {
    const Config & cfg = run.cfg;
    const Dataset data = load_dataset(cfg);
    const TrainState enc = load_encoders(cfg);
    const Generator gen = load_generator(cfg);
    const auto [train, test] = split_dataset(data, fraction(cfg, "eval.holdout"));
    const GenEvalOptions o = eval_options(cfg);
    const GenEvalResult r = evaluate_generation(gen.net, gen.schedule, enc.params, train, test, o);
    const std::vector<MetricRow> rows = {
        {"fad", r.fad, o.seed, run.hash},
        {"cosine_score", r.cosine, o.seed, run.hash},
        {"envelope_correlation", r.envelope_correlation, o.seed, run.hash},
        {"class_accuracy", r.class_accuracy, o.seed, run.hash},
        {"class_accuracy_p", r.class_p, o.seed, run.hash},
    };
    const fs::path path = run.artifact("metrics", ".csv");
    write_metric_csv(path, rows);
    run.wrote(path);
}

void cmd_ablate(Run & run) {
    const Config & cfg = run.cfg;
    const Dataset data = load_dataset(cfg);
    const TrainState enc = load_encoders(cfg);
    const Generator gen = load_generator(cfg);
    const auto [train, test] = split_dataset(data, fraction(cfg, "eval.holdout"));
    const GenEvalOptions o = eval_options(cfg);
    const auto rows = run_ablation(gen.net, gen.schedule, enc.params, train, test, o);
    const fs::path path = run.artifact("ablation", ".csv");
    write_text(path, ablation_csv(rows));
    run.wrote(path);
}

const std::map<std::string, std::function<void(Run &)>> & handlers() {
    static const std::map<std::string, std::function<void(Run &)>> table = {
        {"gen-data", cmd_gen_data},       {"train-align", cmd_train_align}, {"eval-align", cmd_eval_align},
        {"extract-env", cmd_extract_env}, {"train-gen", cmd_train_gen},     {"generate", cmd_generate},
        {"evaluate", cmd_evaluate},       {"ablate", cmd_ablate},
    };
    return table;
}

} // namespace

const std::vector<std::string> & command_names() {
    static const std::vector<std::string> names = {"gen-data", "train-align", "eval-align", "extract-env",
                                                   "train-gen", "generate",   "evaluate",   "ablate"};
    return names;
}

Config resolve_config(const std::string & name, const Config & cfg) {
    const auto it = command_defaults().find(name);
    if (it == command_defaults().end()) throw ConfigError("unknown command '" + name + "'");
    Config out = cfg;
    out.set("command", name);
    if (!out.has("seed")) out.set("seed", "0");
    for (const Defaults & group : it->second)
        for (const auto & [key, value] : group)
            if (!out.has(key)) out.set(key, value);
    return out;
}

CommandResult run_command(const std::string & name, const Config & cfg) {
    Run run;
    run.cfg = resolve_config(name, cfg);
    run.hash = run.cfg.hash();
    run.out = run.cfg.get_string("out", ".");
    run.result.config_hash = run.hash;
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) fail(ErrorCode::Io, "cannot create output directory " + run.out.string());
    handlers().at(name)(run);
    const fs::path resolved = run.artifact("config", ".ini");
    write_text(resolved, run.cfg.canonical());
    run.wrote(resolved);
    return run.result;
}

} // namespace foleygram
