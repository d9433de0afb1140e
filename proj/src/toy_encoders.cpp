#include "toy_encoders.hpp"

#include "error.hpp"
#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace foleygram {

namespace {

constexpr std::uint64_t kStreamMaps = 0x6d617073;
constexpr std::uint64_t kStreamInit = 0x696e6974;
constexpr std::uint64_t kStreamBatch = 0x62617463;

double round_to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

Eigen::VectorXd gaussian(Eigen::Index n, double scale, std::mt19937_64 & rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * dist(rng);
    return v;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double scale, std::mt19937_64 & rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * dist(rng);
    return m;
}

Eigen::VectorXd rounded(const Eigen::VectorXd & v) { return v.unaryExpr(&round_to_float); }

std::vector<float> to_floats(const Eigen::MatrixXd & m) {
    // row-major payload
    std::vector<float> out(static_cast<size_t>(m.size()));
    size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = static_cast<float>(m(r, c));
    return out;
}

Eigen::MatrixXd from_tensor(const NamedTensor & t) {
    if (t.dims.empty() || t.dims.size() > 2) fail(ErrorCode::CorruptHeader, "tensor " + t.name + " is not a matrix");
    const Eigen::Index rows = t.dims[0];
    const Eigen::Index cols = t.dims.size() == 2 ? t.dims[1] : 1;
    Eigen::MatrixXd m(rows, cols);
    size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = t.data[k++];
    return m;
}

void add_matrix(Checkpoint & ck, const std::string & name, const Eigen::MatrixXd & m) {
    ck.add(name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, to_floats(m));
}

void add_views(Checkpoint & ck, const std::string & name, const Dataset & d,
               const Eigen::VectorXd SyntheticSample::*field) {
    const auto n = static_cast<std::uint32_t>(d.size());
    const auto dim = static_cast<std::uint32_t>((d.samples.front().*field).size());
    std::vector<float> data;
    data.reserve(static_cast<size_t>(n) * dim);
    for (const auto & s : d.samples)
        for (Eigen::Index i = 0; i < (s.*field).size(); ++i) data.push_back(static_cast<float>((s.*field)[i]));
    ck.add(name, {n, dim}, std::move(data));
}

} // namespace

// ---------------------------------------------------------------------------
// Dataset

Eigen::VectorXd template_text_view(int action, int frequency, int material, int materials, double noise,
                                   std::mt19937_64 & rng) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(4 + materials);
    t[action] = 1.0;
    t[2 + frequency] = 1.0;
    t[4 + material] = 1.0;
    return t + gaussian(t.size(), noise, rng);
}

std::string template_prompt(int action, int frequency, int material) {
    static const char * actions[] = {"hit", "scratch"};
    static const char * frequencies[] = {"once", "multiple times"};
    return std::string("person ") + actions[action & 1] + " " + frequencies[frequency & 1] + " material-" +
           std::to_string(material);
}

Dataset generate_dataset(const DatasetConfig & cfg) {
    if (cfg.classes < 2 || cfg.samples < cfg.classes) {
        fail(ErrorCode::InvalidConfig, "dataset needs C >= 2 and N >= C");
    }
    if (cfg.latent_dim < cfg.classes) fail(ErrorCode::InvalidConfig, "latent dimension must be at least C");

    std::mt19937_64 maps_rng(mix_seed(cfg.seed, kStreamMaps));
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    const Eigen::MatrixXd audio_map = gaussian_matrix(cfg.audio_dim, cfg.latent_dim, map_scale, maps_rng);
    const Eigen::MatrixXd video_map = gaussian_matrix(cfg.video_dim, cfg.latent_dim, map_scale, maps_rng);
    const int materials = (cfg.classes + 3) / 4;

    Dataset d;
    d.kind = DatasetKind::Alignment;
    d.classes = cfg.classes;
    d.seed = cfg.seed;
    d.samples.reserve(static_cast<size_t>(cfg.samples));
    for (int i = 0; i < cfg.samples; ++i) {
        SyntheticSample s;
        s.class_id = i % cfg.classes;
        s.latent_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i) + 1);
        s.action = s.class_id % 2;
        s.frequency = (s.class_id / 2) % 2;
        s.material = s.class_id / 4;
        std::mt19937_64 rng(s.latent_seed);
        Eigen::VectorXd latent = Eigen::VectorXd::Zero(cfg.latent_dim);
        latent[s.class_id] = cfg.prototype_scale;
        latent += gaussian(cfg.latent_dim, cfg.latent_noise, rng);
        const Eigen::VectorXd za = latent + gaussian(cfg.latent_dim, cfg.view_noise, rng);
        const Eigen::VectorXd zv = latent + gaussian(cfg.latent_dim, cfg.view_noise, rng);
        s.audio_view = rounded((audio_map * za).array().tanh().matrix());
        s.video_view = rounded((video_map * zv).array().tanh().matrix());
        s.text_view = rounded(template_text_view(s.action, s.frequency, s.material, materials, cfg.view_noise, rng));
        d.samples.push_back(std::move(s));
    }
    return d;
}

Dataset generate_dataset(int classes, int samples, std::uint64_t seed) {
    DatasetConfig cfg;
    cfg.classes = classes;
    cfg.samples = samples;
    cfg.seed = seed;
    cfg.latent_dim = std::max(16, classes);
    return generate_dataset(cfg);
}

std::pair<Dataset, Dataset> split_dataset(const Dataset & data, double holdout_fraction) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        fail(ErrorCode::InvalidConfig, "holdout fraction must lie in (0, 1)");
    }
    const auto n = data.size();
    const auto held = static_cast<size_t>(std::llround(static_cast<double>(n) * holdout_fraction));
    if (held == 0 || held >= n) fail(ErrorCode::InvalidConfig, "split leaves an empty partition");
    Dataset train = data;
    Dataset test = data;
    train.samples.assign(data.samples.begin(), data.samples.end() - static_cast<std::ptrdiff_t>(held));
    test.samples.assign(data.samples.end() - static_cast<std::ptrdiff_t>(held), data.samples.end());
    return {std::move(train), std::move(test)};
}

Checkpoint Dataset::to_checkpoint() const {
    if (samples.empty()) fail(ErrorCode::InvalidArgument, "cannot dump an empty dataset");
    Checkpoint ck;
    ck.add_u64("meta.kind", static_cast<std::uint64_t>(kind));
    ck.add_u64("meta.classes", static_cast<std::uint64_t>(classes));
    ck.add_u64("meta.seed", seed);
    ck.add_u64("meta.sample_rate", sample_rate);
    const auto n = static_cast<std::uint32_t>(size());
    std::vector<float> slots;
    std::vector<float> seeds;
    for (const auto & s : samples) {
        slots.insert(slots.end(), {static_cast<float>(s.class_id), static_cast<float>(s.action),
                                   static_cast<float>(s.frequency), static_cast<float>(s.material)});
        for (int i = 0; i < 4; ++i) seeds.push_back(static_cast<float>((s.latent_seed >> (16 * i)) & 0xffff));
    }
    ck.add("labels", {n, 4}, std::move(slots));
    ck.add("latent_seed", {n, 4}, std::move(seeds));
    add_views(ck, "audio_view", *this, &SyntheticSample::audio_view);
    add_views(ck, "video_view", *this, &SyntheticSample::video_view);
    add_views(ck, "text_view", *this, &SyntheticSample::text_view);
    if (!samples.front().waveform.empty()) {
        const auto len = static_cast<std::uint32_t>(samples.front().waveform.size());
        std::vector<float> wave;
        wave.reserve(static_cast<size_t>(n) * len);
        for (const auto & s : samples) {
            if (s.waveform.size() != len) fail(ErrorCode::ShapeMismatch, "waveforms differ in length");
            wave.insert(wave.end(), s.waveform.begin(), s.waveform.end());
        }
        ck.add("waveform", {n, len}, std::move(wave));
    }
    return ck;
}

Dataset Dataset::from_checkpoint(const Checkpoint & ck) {
    Dataset d;
    d.kind = static_cast<DatasetKind>(ck.get_u64("meta.kind"));
    d.classes = static_cast<int>(ck.get_u64("meta.classes"));
    d.seed = ck.get_u64("meta.seed");
    d.sample_rate = static_cast<std::uint32_t>(ck.get_u64("meta.sample_rate"));
    const Eigen::MatrixXd labels = from_tensor(ck.get("labels"));
    const Eigen::MatrixXd seeds = from_tensor(ck.get("latent_seed"));
    const Eigen::MatrixXd audio = from_tensor(ck.get("audio_view"));
    const Eigen::MatrixXd video = from_tensor(ck.get("video_view"));
    const Eigen::MatrixXd text = from_tensor(ck.get("text_view"));
    const auto n = labels.rows();
    if (seeds.rows() != n || audio.rows() != n || video.rows() != n || text.rows() != n) {
        fail(ErrorCode::CorruptHeader, "dataset tensors disagree on sample count");
    }
    const NamedTensor * wave = ck.find("waveform");
    d.samples.resize(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto & s = d.samples[static_cast<size_t>(i)];
        s.class_id = static_cast<int>(labels(i, 0));
        s.action = static_cast<int>(labels(i, 1));
        s.frequency = static_cast<int>(labels(i, 2));
        s.material = static_cast<int>(labels(i, 3));
        for (int k = 0; k < 4; ++k) s.latent_seed |= static_cast<std::uint64_t>(seeds(i, k)) << (16 * k);
        s.audio_view = audio.row(i).transpose();
        s.video_view = video.row(i).transpose();
        s.text_view = text.row(i).transpose();
        if (wave) {
            const size_t len = wave->dims.at(1);
            const auto begin = wave->data.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(i) * len);
            s.waveform.assign(begin, begin + static_cast<std::ptrdiff_t>(len));
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Encoders

Mlp & EncoderParams::of(Modality m) {
    switch (m) {
        case Modality::Audio: return audio;
        case Modality::Video: return video;
        case Modality::Text: return text;
    }
    fail(ErrorCode::InvalidArgument, "unknown modality");
}

const Mlp & EncoderParams::of(Modality m) const { return const_cast<EncoderParams *>(this)->of(m); }

std::array<Param<double> *, 12> EncoderParams::params() {
    return {&audio.w1, &audio.b1, &audio.w2, &audio.b2, &video.w1, &video.b1,
            &video.w2, &video.b2, &text.w1,  &text.b1,  &text.w2,  &text.b2};
}

EncoderParams init_encoders(Eigen::Index audio_dim, Eigen::Index video_dim, Eigen::Index text_dim,
                            std::uint64_t seed, int hidden, int out) {
    std::mt19937_64 rng(mix_seed(seed, kStreamInit));
    auto make = [&](Eigen::Index in) {
        Mlp m;
        m.w1 = Param<double>(uniform_fan_in<double>(hidden, in, in, rng));
        m.b1 = Param<double>(uniform_fan_in<double>(hidden, 1, in, rng));
        m.w2 = Param<double>(uniform_fan_in<double>(out, hidden, hidden, rng));
        m.b2 = Param<double>(uniform_fan_in<double>(out, 1, hidden, rng));
        return m;
    };
    EncoderParams p;
    p.audio = make(audio_dim);
    p.video = make(video_dim);
    p.text = make(text_dim);
    return p;
}

namespace {

struct MlpForward {
    Eigen::MatrixXd hidden;  // tanh activations
    Eigen::MatrixXd raw;     // pre-normalization output
    Eigen::VectorXd norms;
    Eigen::MatrixXd out;
};

MlpForward forward(const Mlp & mlp, const Eigen::MatrixXd & views) {
    if (views.rows() != mlp.input_dim()) fail(ErrorCode::DimensionMismatch, "view dimension does not match encoder");
    MlpForward f;
    f.hidden = ((mlp.w1.value * views).colwise() + mlp.b1.value.col(0)).array().tanh().matrix();
    f.raw = (mlp.w2.value * f.hidden).colwise() + mlp.b2.value.col(0);
    f.norms = f.raw.colwise().norm().transpose();
    f.out.resize(f.raw.rows(), f.raw.cols());
    for (Eigen::Index j = 0; j < f.raw.cols(); ++j) {
        if (!(f.norms[j] >= kZeroNormThreshold)) fail(ErrorCode::ZeroVector, "encoder produced a zero embedding");
        f.out.col(j) = f.raw.col(j) / f.norms[j];
    }
    return f;
}

Eigen::MatrixXd views_matrix(const Dataset & data, std::span<const std::size_t> indices, Modality m) {
    const auto & first = data.samples.at(indices.front());
    const Eigen::Index dim = m == Modality::Audio   ? first.audio_view.size()
                             : m == Modality::Video ? first.video_view.size()
                                                    : first.text_view.size();
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(indices.size()));
    for (size_t j = 0; j < indices.size(); ++j) {
        const auto & s = data.samples.at(indices[j]);
        const auto & v = m == Modality::Audio ? s.audio_view : m == Modality::Video ? s.video_view : s.text_view;
        x.col(static_cast<Eigen::Index>(j)) = v;
    }
    return x;
}

std::vector<std::size_t> all_indices(const Dataset & data) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

} // namespace

Eigen::MatrixXd encode_views(const Mlp & mlp, const Eigen::MatrixXd & views) { return forward(mlp, views).out; }

Embedding encode_view(const Mlp & mlp, const Eigen::VectorXd & view, Modality modality) {
    return Embedding{encode_views(mlp, view).col(0), modality};
}

std::array<Embedding, 3> encode(const EncoderParams & params, const SyntheticSample & sample) {
    return {encode_view(params.audio, sample.audio_view, Modality::Audio),
            encode_view(params.video, sample.video_view, Modality::Video),
            encode_view(params.text, sample.text_view, Modality::Text)};
}

TripletBatch encode_batch(const EncoderParams & params, const Dataset & data, std::span<const std::size_t> indices) {
    if (indices.empty()) fail(ErrorCode::InvalidBatch, "cannot encode an empty batch");
    return TripletBatch{encode_views(params.audio, views_matrix(data, indices, Modality::Audio)),
                        encode_views(params.video, views_matrix(data, indices, Modality::Video)),
                        encode_views(params.text, views_matrix(data, indices, Modality::Text))};
}

TripletBatch encode_all(const EncoderParams & params, const Dataset & data) {
    const auto idx = all_indices(data);
    return encode_batch(params, data, idx);
}

void backward_views(Mlp & mlp, const Eigen::MatrixXd & views, const Eigen::MatrixXd & grad_embeddings) {
    const MlpForward f = forward(mlp, views);
    // d(y/|y|)/dy = (I - e eᵀ)/|y|
    Eigen::MatrixXd d_raw(f.raw.rows(), f.raw.cols());
    for (Eigen::Index j = 0; j < f.raw.cols(); ++j) {
        const Eigen::VectorXd e = f.out.col(j);
        const Eigen::VectorXd g = grad_embeddings.col(j);
        d_raw.col(j) = (g - e * e.dot(g)) / f.norms[j];
    }
    mlp.w2.grad += d_raw * f.hidden.transpose();
    mlp.b2.grad += d_raw.rowwise().sum();
    const Eigen::MatrixXd d_pre =
        ((mlp.w2.value.transpose() * d_raw).array() * (1.0 - f.hidden.array().square())).matrix();
    mlp.w1.grad += d_pre * views.transpose();
    mlp.b1.grad += d_pre.rowwise().sum();
}

// ---------------------------------------------------------------------------
// Training

Checkpoint TrainState::to_checkpoint() const {
    Checkpoint ck;
    ck.add_u64("meta.step", step);
    ck.add_u64("meta.seed", seed);
    ck.add_u64("meta.loss", static_cast<std::uint64_t>(loss));
    auto & self = const_cast<TrainState &>(*this);
    const char * mod_names[] = {"audio", "video", "text"};
    const char * param_names[] = {"w1", "b1", "w2", "b2"};
    auto ps = self.params.params();
    for (size_t k = 0; k < ps.size(); ++k) {
        const std::string base = std::string("encoder.") + mod_names[k / 4] + "." + param_names[k % 4];
        add_matrix(ck, base, ps[k]->value);
        add_matrix(ck, "adam.m." + base.substr(8), ps[k]->m);
        add_matrix(ck, "adam.v." + base.substr(8), ps[k]->v);
    }
    return ck;
}

TrainState TrainState::from_checkpoint(const Checkpoint & ck) {
    TrainState st;
    st.step = ck.get_u64("meta.step");
    st.seed = ck.get_u64("meta.seed");
    st.loss = static_cast<AlignmentLoss>(ck.get_u64("meta.loss"));
    const char * mod_names[] = {"audio", "video", "text"};
    const char * param_names[] = {"w1", "b1", "w2", "b2"};
    auto ps = st.params.params();
    for (size_t k = 0; k < ps.size(); ++k) {
        const std::string base = std::string("encoder.") + mod_names[k / 4] + "." + param_names[k % 4];
        *ps[k] = Param<double>(from_tensor(ck.get(base)));
        ps[k]->m = from_tensor(ck.get("adam.m." + base.substr(8)));
        ps[k]->v = from_tensor(ck.get("adam.v." + base.substr(8)));
    }
    return st;
}

TrainState init_train_state(const Dataset & data, const AlignConfig & cfg) {
    if (data.samples.empty()) fail(ErrorCode::InvalidConfig, "alignment training needs data");
    TrainState st;
    st.params = init_encoders(data.audio_dim(), data.video_dim(), data.text_dim(), cfg.seed);
    st.seed = cfg.seed;
    st.loss = cfg.loss;
    return st;
}

namespace {

LossConfig loss_config(const AlignConfig & cfg) {
    LossConfig lc;
    lc.temperature = cfg.temperature;
    lc.direction = LossDirection::Combined;
    return lc;
}

std::vector<std::size_t> draw_batch(std::size_t population, std::size_t batch, std::uint64_t seed,
                                    std::uint64_t step) {
    std::mt19937_64 rng(mix_seed(mix_seed(seed, kStreamBatch), step));
    std::vector<std::size_t> idx(population);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t b = std::min(batch, population);
    for (std::size_t i = 0; i < b; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(b);
    return idx;
}

} // namespace

double alignment_loss(const EncoderParams & params, const Dataset & data, std::span<const std::size_t> indices,
                      const AlignConfig & cfg) {
    const TripletBatch batch = encode_batch(params, data, indices);
    const LossConfig lc = loss_config(cfg);
    return cfg.loss == AlignmentLoss::Gram ? loss_combined(batch, lc)
                                           : pairwise_infonce_baseline(batch, lc, cfg.anchor);
}

AlignRun train_alignment(TrainState state, const Dataset & data, const AlignConfig & cfg) {
    if (data.samples.empty()) fail(ErrorCode::InvalidConfig, "alignment training needs data");
    if (cfg.batch < 1 || cfg.steps < 0 || !(cfg.lr > 0.0)) fail(ErrorCode::InvalidConfig, "invalid alignment config");
    AdamWConfig opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    const LossConfig lc = loss_config(cfg);

    AlignRun run;
    run.loss_curve.reserve(static_cast<size_t>(cfg.steps));
    auto params = state.params.params();
    for (int s = 0; s < cfg.steps; ++s) {
        const auto idx = draw_batch(data.size(), static_cast<size_t>(cfg.batch), state.seed, state.step);
        const Eigen::MatrixXd xa = views_matrix(data, idx, Modality::Audio);
        const Eigen::MatrixXd xv = views_matrix(data, idx, Modality::Video);
        const Eigen::MatrixXd xt = views_matrix(data, idx, Modality::Text);
        const TripletBatch batch{encode_views(state.params.audio, xa), encode_views(state.params.video, xv),
                                 encode_views(state.params.text, xt)};
        double loss = 0.0;
        TripletGradient grad;
        if (cfg.loss == AlignmentLoss::Gram) {
            loss = loss_combined(batch, lc);
            grad = loss_gradient(batch, lc);
        } else {
            loss = pairwise_infonce_baseline(batch, lc, cfg.anchor);
            grad = pairwise_infonce_gradient(batch, lc, cfg.anchor);
        }
        if (!std::isfinite(loss)) {
            fail(ErrorCode::DivergenceDetected, "alignment loss became non-finite at step " + std::to_string(state.step));
        }
        run.loss_curve.push_back(loss);
        for (auto * p : params) p->zero_grad();
        backward_views(state.params.audio, xa, grad.audio);
        backward_views(state.params.video, xv, grad.video);
        backward_views(state.params.text, xt, grad.text);
        ++state.step;
        adamw_step<double>(params, opt, state.step);
    }
    run.state = std::move(state);
    return run;
}

AlignRun train_alignment(const Dataset & data, const AlignConfig & cfg) {
    return train_alignment(init_train_state(data, cfg), data, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

constexpr double kVolumeTie = 1e-9;

double triplet_volume_of(const TripletBatch & e, Eigen::Index text, Eigen::Index av) {
    Eigen::MatrixXd cols(e.dim(), 3);
    cols.col(0) = e.audio.col(av);
    cols.col(1) = e.video.col(av);
    cols.col(2) = e.text.col(text);
    return volume(cols);
}

std::vector<std::vector<Eigen::Index>> members_by_class(std::span<const int> class_ids, int classes) {
    std::vector<std::vector<Eigen::Index>> out(static_cast<size_t>(classes));
    for (size_t i = 0; i < class_ids.size(); ++i) out.at(static_cast<size_t>(class_ids[i])).push_back(static_cast<Eigen::Index>(i));
    return out;
}

} // namespace

RetrievalReport evaluate_retrieval(const TripletBatch & embedded, std::span<const int> class_ids, int candidates,
                                   AlignmentLoss ranking) {
    if (candidates < 2) fail(ErrorCode::InvalidConfig, "retrieval needs at least two candidates");
    if (static_cast<Eigen::Index>(class_ids.size()) != embedded.size()) {
        fail(ErrorCode::DimensionMismatch, "class ids do not match embeddings");
    }
    const int classes = *std::max_element(class_ids.begin(), class_ids.end()) + 1;
    const auto members = members_by_class(class_ids, classes);

    RetrievalReport rep;
    rep.candidates = candidates;
    int hits1 = 0;
    int hits5 = 0;
    for (Eigen::Index i = 0; i < embedded.size(); ++i) {
        const int c = class_ids[static_cast<size_t>(i)];
        std::vector<Eigen::Index> cand{i};
        for (int round = 0; static_cast<int>(cand.size()) < candidates && round < candidates; ++round) {
            for (int off = 1; off < classes && static_cast<int>(cand.size()) < candidates; ++off) {
                const auto & pool = members[static_cast<size_t>((c + off) % classes)];
                if (pool.empty()) continue;
                cand.push_back(pool[static_cast<size_t>(i + round) % pool.size()]);
            }
        }
        if (cand.size() < 2) continue;
        auto cosine = [&](Eigen::Index t) {
            return 0.5 * (embedded.text.col(t).dot(embedded.audio.col(i)) + embedded.text.col(t).dot(embedded.video.col(i)));
        };
        // True when candidate t ranks at or above the matched text. Volumes
        // that agree to within kVolumeTie fall back to the cosine ordering,
        // since a collinear audio-video pair gives every text zero volume.
        auto outranks = [&](Eigen::Index t) {
            if (ranking == AlignmentLoss::Gram) {
                const double vt = triplet_volume_of(embedded, t, i);
                const double vm = triplet_volume_of(embedded, i, i);
                if (std::abs(vt - vm) > kVolumeTie) return vt < vm;
            }
            return cosine(t) >= cosine(i);
        };
        int better = 0;
        for (size_t k = 1; k < cand.size(); ++k)
            if (outranks(cand[k])) ++better;
        ++rep.queries;
        if (better == 0) ++hits1;
        if (better < 5) ++hits5;
    }
    if (rep.queries == 0) fail(ErrorCode::InvalidConfig, "no query had a candidate from another class");
    rep.recall_at_1 = static_cast<double>(hits1) / rep.queries;
    rep.recall_at_5 = static_cast<double>(hits5) / rep.queries;
    return rep;
}

RetrievalReport evaluate_retrieval(const TrainState & state, const Dataset & data, int candidates) {
    const TripletBatch e = encode_all(state.params, data);
    std::vector<int> ids;
    for (const auto & s : data.samples) ids.push_back(s.class_id);
    return evaluate_retrieval(e, ids, candidates, state.loss);
}

AlignmentStats alignment_stats(const TripletBatch & embedded, std::span<const int> class_ids) {
    const int classes = *std::max_element(class_ids.begin(), class_ids.end()) + 1;
    const auto members = members_by_class(class_ids, classes);
    std::vector<double> matched;
    std::vector<double> mismatched;
    std::vector<double> cosines;
    for (Eigen::Index i = 0; i < embedded.size(); ++i) {
        const int c = class_ids[static_cast<size_t>(i)];
        matched.push_back(triplet_volume_of(embedded, i, i));
        cosines.push_back(embedded.audio.col(i).dot(embedded.video.col(i)));
        for (int off = 1; off < classes; ++off) {
            const auto & pool = members[static_cast<size_t>((c + off) % classes)];
            if (pool.empty()) continue;
            mismatched.push_back(triplet_volume_of(embedded, pool[static_cast<size_t>(i) % pool.size()], i));
            break;
        }
    }
    AlignmentStats st;
    st.mean_matched_av_cosine = mean(cosines);
    st.mean_matched_volume = mean(matched);
    if (!mismatched.empty()) {
        st.mean_mismatched_volume = mean(mismatched);
        st.mann_whitney_p = mann_whitney_less_p(matched, mismatched);
    }
    return st;
}

AlignmentStats alignment_stats(const TrainState & state, const Dataset & data) {
    const TripletBatch e = encode_all(state.params, data);
    std::vector<int> ids;
    for (const auto & s : data.samples) ids.push_back(s.class_id);
    return alignment_stats(e, ids);
}

} // namespace foleygram
