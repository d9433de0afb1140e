#include "denoiser.hpp"

#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace foleygram {

// ---------------------------------------------------------------------------
// Modality masks and conditioning

unsigned parse_modality_mask(const std::string & text) {
    if (text.empty()) fail(ErrorCode::InvalidConfig, "empty modality mask");
    unsigned mask = 0;
    for (char ch : text) {
        switch (std::tolower(static_cast<unsigned char>(ch))) {
            case 'a': mask |= kMaskAudio; break;
            case 'v': mask |= kMaskVideo; break;
            case 't': mask |= kMaskText; break;
            default: fail(ErrorCode::InvalidConfig, "unknown modality letter in mask '" + text + "'");
        }
    }
    return mask;
}

std::string modality_mask_name(unsigned mask) {
    std::string out;
    if (mask & kMaskAudio) out += 'A';
    if (mask & kMaskVideo) out += 'V';
    if (mask & kMaskText) out += 'T';
    return out.empty() ? "none" : out;
}

std::array<unsigned, 7> ablation_masks() {
    return {kMaskAll,  kMaskAudio | kMaskVideo, kMaskAudio | kMaskText, kMaskVideo | kMaskText,
            kMaskAudio, kMaskVideo, kMaskText};
}

Conditioning Conditioning::from_embeddings(std::span<const Embedding> embeddings) {
    Conditioning c;
    for (const auto & e : embeddings) {
        std::vector<float> v(static_cast<size_t>(e.values.size()));
        for (Eigen::Index i = 0; i < e.values.size(); ++i) v[static_cast<size_t>(i)] = static_cast<float>(e.values[i]);
        c.embeddings[static_cast<size_t>(e.modality)] = std::move(v);
    }
    return c;
}

unsigned Conditioning::mask() const {
    unsigned m = 0;
    for (unsigned i = 0; i < 3; ++i)
        if (embeddings[i]) m |= 1u << i;
    return m;
}

Conditioning Conditioning::masked(unsigned mask) const {
    Conditioning c;
    for (unsigned i = 0; i < 3; ++i)
        if (mask & (1u << i)) c.embeddings[i] = embeddings[i];
    return c;
}

// ---------------------------------------------------------------------------

namespace {

using MatF = Mat<float>;
using VecF = Eigen::VectorXf;

constexpr std::uint64_t kStreamDenoiser = 0x64656e6f;

Denoiser::Dense make_dense(int out, int in, std::mt19937_64 & rng) {
    return Denoiser::Dense{Param<float>(uniform_fan_in<float>(out, in, in, rng)),
                           Param<float>(uniform_fan_in<float>(out, 1, in, rng))};
}

Denoiser::Dense make_zero_dense(int out, int in) {
    return Denoiser::Dense{Param<float>(MatF::Zero(out, in)), Param<float>(MatF::Zero(out, 1))};
}

Denoiser::Conv1d make_conv(int out, int in, int dilation, std::mt19937_64 & rng) {
    return Denoiser::Conv1d{Param<float>(uniform_fan_in<float>(out, 3 * in, 3 * in, rng)),
                            Param<float>(uniform_fan_in<float>(out, 1, 3 * in, rng)), dilation};
}

float silu(float x) { return x / (1.0f + std::exp(-x)); }

float silu_grad(float x) {
    const float s = 1.0f / (1.0f + std::exp(-x));
    return s * (1.0f + x * (1.0f - s));
}

MatF silu(const MatF & x) { return x.unaryExpr([](float v) { return silu(v); }); }

MatF silu_grad(const MatF & x) { return x.unaryExpr([](float v) { return silu_grad(v); }); }

// Rows [0, C) hold x[:, t - d], [C, 2C) x[:, t], [2C, 3C) x[:, t + d]; zero outside.
MatF im2col(const MatF & x, int d) {
    const Eigen::Index c = x.rows();
    const Eigen::Index n = x.cols();
    MatF cols = MatF::Zero(3 * c, n);
    if (d < n) {
        cols.block(0, d, c, n - d) = x.leftCols(n - d);
        cols.block(2 * c, 0, c, n - d) = x.rightCols(n - d);
    }
    cols.block(c, 0, c, n) = x;
    return cols;
}

MatF col2im(const MatF & dcols, int d) {
    const Eigen::Index c = dcols.rows() / 3;
    const Eigen::Index n = dcols.cols();
    MatF dx = dcols.block(c, 0, c, n);
    if (d < n) {
        dx.leftCols(n - d) += dcols.block(0, d, c, n - d);
        dx.rightCols(n - d) += dcols.block(2 * c, 0, c, n - d);
    }
    return dx;
}

MatF conv_forward(const Denoiser::Conv1d & conv, const MatF & cols) {
    MatF y(conv.weight.value.rows(), cols.cols());
    y.noalias() = conv.weight.value * cols;
    y.colwise() += conv.bias.value.col(0);
    return y;
}

MatF dense_forward(const Denoiser::Dense & dense, const MatF & x) {
    MatF y(dense.weight.value.rows(), x.cols());
    y.noalias() = dense.weight.value * x;
    y.colwise() += dense.bias.value.col(0);
    return y;
}

void accumulate_weight_grad(Denoiser::Dense & dense, const MatF & dy, const MatF & x) {
    dense.weight.grad.noalias() += dy * x.transpose();
    dense.bias.grad += dy.rowwise().sum();
}

void accumulate_weight_grad(Denoiser::Conv1d & conv, const MatF & dy, const MatF & cols) {
    conv.weight.grad.noalias() += dy * cols.transpose();
    conv.bias.grad += dy.rowwise().sum();
}

VecF timestep_features(int t, int count) {
    VecF f(count);
    const int half = count / 2;
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(1000.0) * static_cast<double>(k) / half);
        f[k] = static_cast<float>(std::sin(t * freq));
        f[half + k] = static_cast<float>(std::cos(t * freq));
    }
    return f;
}

VecF conditioning_vector(const Conditioning & cond, int embedding_dim) {
    VecF v = VecF::Zero(3 * embedding_dim + 3);
    for (int m = 0; m < 3; ++m) {
        const auto & e = cond.embeddings[static_cast<size_t>(m)];
        if (!e) continue;
        if (static_cast<int>(e->size()) != embedding_dim) {
            fail(ErrorCode::ShapeMismatch, "conditioning embedding has the wrong dimension");
        }
        for (int i = 0; i < embedding_dim; ++i) v[m * embedding_dim + i] = (*e)[static_cast<size_t>(i)];
        v[3 * embedding_dim + m] = 1.0f;
    }
    return v;
}

} // namespace

struct Denoiser::Cache {
    MatF patches;
    VecF time_features;
    VecF cond_vector;
    VecF pre_cond;
    VecF cond;
    std::vector<MatF> states;  // input embedding then each block output

    struct BlockCache {
        MatF cols1;
        MatF u1;
        MatF u2;
        MatF cols2;
        VecF scale;
        VecF shift;
    };
    std::vector<BlockCache> blocks;

    bool control_on = false;
    MatF control_patches;
    std::vector<MatF> control_pre;   // pre-activation input of each control conv
    std::vector<MatF> control_cols;
    MatF control_features;
    std::vector<MatF> control_out;

    MatF out_act;
    MatF out;
};

Denoiser::Denoiser(const DenoiserConfig & cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.patch < 1 || cfg.latent_length % cfg.patch != 0 || cfg.width < 1 || cfg.blocks < 1 ||
        cfg.time_features < 2 || cfg.time_features % 2 != 0 || cfg.embedding_dim < 1 || cfg.control_layers < 1) {
        fail(ErrorCode::InvalidConfig, "invalid denoiser configuration");
    }
    std::mt19937_64 rng(mix_seed(seed, kStreamDenoiser));
    const int w = cfg.width;
    input_ = make_dense(w, cfg.patch, rng);
    time_proj_ = make_dense(w, cfg.time_features, rng);
    cond_proj_ = make_dense(w, 3 * cfg.embedding_dim + 3, rng);
    for (int b = 0; b < cfg.blocks; ++b) {
        Block blk;
        blk.conv1 = make_conv(w, w, 1 << b, rng);
        blk.film = make_dense(2 * w, w, rng);
        blk.conv2 = make_conv(w, w, 1, rng);
        blocks_.push_back(std::move(blk));
    }
    output_ = make_dense(cfg.patch, w, rng);
    control_input_ = make_dense(w, cfg.patch, rng);
    for (int l = 0; l < cfg.control_layers; ++l) control_convs_.push_back(make_conv(w, w, 1 << l, rng));
    for (int b = 0; b < cfg.blocks; ++b) control_zero_.push_back(make_zero_dense(w, w));
}

void Denoiser::run_forward(std::span<const float> zt, int t, const Conditioning & cond,
                           std::span<const float> control, Cache & c) const {
    const int len = cfg_.latent_length;
    const int tokens = cfg_.tokens();
    if (static_cast<int>(zt.size()) != len) fail(ErrorCode::ShapeMismatch, "latent length does not match denoiser");
    if (!control.empty() && static_cast<int>(control.size()) != len) {
        fail(ErrorCode::ShapeMismatch, "control signal length must equal the latent length");
    }
    c.patches = Eigen::Map<const MatF>(zt.data(), cfg_.patch, tokens);
    c.time_features = timestep_features(t, cfg_.time_features);
    c.cond_vector = conditioning_vector(cond, cfg_.embedding_dim);
    c.pre_cond = dense_forward(time_proj_, c.time_features) + dense_forward(cond_proj_, c.cond_vector);
    c.cond = c.pre_cond.unaryExpr([](float v) { return silu(v); });

    c.control_on = !control.empty();
    if (c.control_on) {
        c.control_patches = Eigen::Map<const MatF>(control.data(), cfg_.patch, tokens);
        MatF e = dense_forward(control_input_, c.control_patches);
        c.control_pre.clear();
        c.control_cols.clear();
        for (const auto & conv : control_convs_) {
            c.control_pre.push_back(e);
            c.control_cols.push_back(im2col(silu(e), conv.dilation));
            e = conv_forward(conv, c.control_cols.back());
        }
        c.control_features = std::move(e);
        c.control_out.clear();
        for (const auto & z : control_zero_) c.control_out.push_back(dense_forward(z, c.control_features));
    }

    c.states.clear();
    c.states.push_back(dense_forward(input_, c.patches));
    c.blocks.resize(blocks_.size());
    for (size_t b = 0; b < blocks_.size(); ++b) {
        const Block & blk = blocks_[b];
        auto & bc = c.blocks[b];
        const MatF & h = c.states.back();
        bc.cols1 = im2col(h, blk.conv1.dilation);
        bc.u1 = conv_forward(blk.conv1, bc.cols1);
        const VecF film = dense_forward(blk.film, c.cond);
        bc.scale = film.head(cfg_.width);
        bc.shift = film.tail(cfg_.width);
        bc.u2 = (bc.u1.array().colwise() * (1.0f + bc.scale.array())).colwise() + bc.shift.array();
        bc.cols2 = im2col(silu(bc.u2), blk.conv2.dilation);
        MatF next = h + conv_forward(blk.conv2, bc.cols2);
        if (c.control_on) next += c.control_out[b];
        c.states.push_back(std::move(next));
    }
    c.out_act = silu(c.states.back());
    c.out = dense_forward(output_, c.out_act);
}

std::vector<float> Denoiser::forward(std::span<const float> zt, int t, const Conditioning & cond,
                                     std::span<const float> control) const {
    Cache c;
    run_forward(zt, t, cond, control, c);
    return std::vector<float>(c.out.data(), c.out.data() + c.out.size());
}

double Denoiser::accumulate_gradient(std::span<const float> zt, int t, const Conditioning & cond,
                                     std::span<const float> control, std::span<const float> target, float scale,
                                     const GradientScope & scope) {
    Cache c;
    run_forward(zt, t, cond, control, c);
    if (static_cast<int>(target.size()) != cfg_.latent_length) fail(ErrorCode::ShapeMismatch, "target length mismatch");
    const MatF tgt = Eigen::Map<const MatF>(target.data(), cfg_.patch, cfg_.tokens());
    const MatF diff = c.out - tgt;
    const double sq = static_cast<double>(diff.squaredNorm());

    const MatF d_out = scale * diff;
    if (scope.main) accumulate_weight_grad(output_, d_out, c.out_act);
    MatF dh = (output_.weight.value.transpose() * d_out).cwiseProduct(silu_grad(c.states.back()));

    VecF d_cond = VecF::Zero(cfg_.width);
    std::vector<MatF> d_control(blocks_.size());
    for (size_t bi = blocks_.size(); bi-- > 0;) {
        Block & blk = blocks_[bi];
        auto & bc = c.blocks[bi];
        if (c.control_on) d_control[bi] = dh;
        // h_{b+1} = h_b + conv2(silu(u2))
        if (scope.main) accumulate_weight_grad(blk.conv2, dh, bc.cols2);
        MatF du2 = col2im(blk.conv2.weight.value.transpose() * dh, blk.conv2.dilation).cwiseProduct(silu_grad(bc.u2));
        VecF d_film(2 * cfg_.width);
        d_film.head(cfg_.width) = (du2.cwiseProduct(bc.u1)).rowwise().sum();
        d_film.tail(cfg_.width) = du2.rowwise().sum();
        if (scope.main) accumulate_weight_grad(blk.film, d_film, c.cond);
        d_cond.noalias() += blk.film.weight.value.transpose() * d_film;
        MatF du1 = du2.array().colwise() * (1.0f + bc.scale.array());
        if (scope.main) accumulate_weight_grad(blk.conv1, du1, bc.cols1);
        dh += col2im(blk.conv1.weight.value.transpose() * du1, blk.conv1.dilation);
    }
    if (scope.main) accumulate_weight_grad(input_, dh, c.patches);

    const VecF d_pre = d_cond.cwiseProduct(c.pre_cond.unaryExpr([](float v) { return silu_grad(v); }));
    if (scope.main) accumulate_weight_grad(time_proj_, d_pre, c.time_features);
    if (scope.projection) accumulate_weight_grad(cond_proj_, d_pre, c.cond_vector);

    if (scope.control && c.control_on) {
        MatF de = MatF::Zero(cfg_.width, cfg_.tokens());
        for (size_t b = 0; b < control_zero_.size(); ++b) {
            accumulate_weight_grad(control_zero_[b], d_control[b], c.control_features);
            de.noalias() += control_zero_[b].weight.value.transpose() * d_control[b];
        }
        for (size_t l = control_convs_.size(); l-- > 0;) {
            Conv1d & conv = control_convs_[l];
            accumulate_weight_grad(conv, de, c.control_cols[l]);
            de = col2im(conv.weight.value.transpose() * de, conv.dilation).cwiseProduct(silu_grad(c.control_pre[l]));
        }
        accumulate_weight_grad(control_input_, de, c.control_patches);
    }
    return sq;
}

std::vector<Param<float> *> Denoiser::main_params() {
    std::vector<Param<float> *> out{&input_.weight, &input_.bias, &time_proj_.weight, &time_proj_.bias};
    for (auto & b : blocks_) {
        out.insert(out.end(), {&b.conv1.weight, &b.conv1.bias, &b.film.weight, &b.film.bias, &b.conv2.weight,
                               &b.conv2.bias});
    }
    out.insert(out.end(), {&output_.weight, &output_.bias});
    return out;
}

std::vector<Param<float> *> Denoiser::projection_params() { return {&cond_proj_.weight, &cond_proj_.bias}; }

std::vector<Param<float> *> Denoiser::control_params() {
    std::vector<Param<float> *> out{&control_input_.weight, &control_input_.bias};
    for (auto & c : control_convs_) out.insert(out.end(), {&c.weight, &c.bias});
    for (auto & z : control_zero_) out.insert(out.end(), {&z.weight, &z.bias});
    return out;
}

void Denoiser::zero_grad() {
    for (auto * p : main_params()) p->zero_grad();
    for (auto * p : projection_params()) p->zero_grad();
    for (auto * p : control_params()) p->zero_grad();
}

std::vector<std::pair<std::string, Param<float> *>> Denoiser::named_params() {
    std::vector<std::pair<std::string, Param<float> *>> out;
    auto dense = [&](const std::string & name, Dense & d) {
        out.emplace_back(name + ".weight", &d.weight);
        out.emplace_back(name + ".bias", &d.bias);
    };
    auto conv = [&](const std::string & name, Conv1d & c) {
        out.emplace_back(name + ".weight", &c.weight);
        out.emplace_back(name + ".bias", &c.bias);
    };
    dense("main.input", input_);
    dense("main.time", time_proj_);
    dense("cond.projection", cond_proj_);
    for (size_t b = 0; b < blocks_.size(); ++b) {
        const std::string base = "main.block" + std::to_string(b);
        conv(base + ".conv1", blocks_[b].conv1);
        dense(base + ".film", blocks_[b].film);
        conv(base + ".conv2", blocks_[b].conv2);
    }
    dense("main.output", output_);
    dense("control.input", control_input_);
    for (size_t l = 0; l < control_convs_.size(); ++l) conv("control.conv" + std::to_string(l), control_convs_[l]);
    for (size_t b = 0; b < control_zero_.size(); ++b) dense("control.zero" + std::to_string(b), control_zero_[b]);
    return out;
}

Checkpoint Denoiser::to_checkpoint() const {
    Checkpoint ck;
    ck.add_u64("meta.latent_length", static_cast<std::uint64_t>(cfg_.latent_length));
    ck.add_u64("meta.patch", static_cast<std::uint64_t>(cfg_.patch));
    ck.add_u64("meta.width", static_cast<std::uint64_t>(cfg_.width));
    ck.add_u64("meta.blocks", static_cast<std::uint64_t>(cfg_.blocks));
    ck.add_u64("meta.embedding_dim", static_cast<std::uint64_t>(cfg_.embedding_dim));
    ck.add_u64("meta.time_features", static_cast<std::uint64_t>(cfg_.time_features));
    ck.add_u64("meta.control_layers", static_cast<std::uint64_t>(cfg_.control_layers));
    for (auto & [name, p] : const_cast<Denoiser *>(this)->named_params()) {
        const MatF & v = p->value;
        std::vector<float> data(static_cast<size_t>(v.size()));
        size_t k = 0;
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            for (Eigen::Index col = 0; col < v.cols(); ++col) data[k++] = v(r, col);
        ck.add("denoiser." + name, {static_cast<std::uint32_t>(v.rows()), static_cast<std::uint32_t>(v.cols())},
               std::move(data));
    }
    return ck;
}

Denoiser Denoiser::from_checkpoint(const Checkpoint & ck) {
    DenoiserConfig cfg;
    cfg.latent_length = static_cast<int>(ck.get_u64("meta.latent_length"));
    cfg.patch = static_cast<int>(ck.get_u64("meta.patch"));
    cfg.width = static_cast<int>(ck.get_u64("meta.width"));
    cfg.blocks = static_cast<int>(ck.get_u64("meta.blocks"));
    cfg.embedding_dim = static_cast<int>(ck.get_u64("meta.embedding_dim"));
    cfg.time_features = static_cast<int>(ck.get_u64("meta.time_features"));
    cfg.control_layers = static_cast<int>(ck.get_u64("meta.control_layers"));
    Denoiser net(cfg, 0);
    for (auto & [name, p] : net.named_params()) {
        const NamedTensor & t = ck.get("denoiser." + name);
        if (t.dims.size() != 2 || t.dims[0] != p->value.rows() || t.dims[1] != p->value.cols()) {
            fail(ErrorCode::ShapeMismatch, "checkpoint tensor " + t.name + " has the wrong shape");
        }
        size_t k = 0;
        for (Eigen::Index r = 0; r < p->value.rows(); ++r)
            for (Eigen::Index col = 0; col < p->value.cols(); ++col) p->value(r, col) = t.data[k++];
        p->reset_state();
    }
    return net;
}

} // namespace foleygram
