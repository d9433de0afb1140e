#include "gram_loss.hpp"

#include "error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace foleygram {

namespace {

constexpr double kUnitTolerance = 1e-6;

Eigen::Index negatives_of(const TripletBatch & batch, const LossConfig & cfg) {
    return cfg.negatives == 0 ? batch.size() : cfg.negatives;
}

Eigen::Index negatives_of(const Eigen::MatrixXd & volumes, const LossConfig & cfg) {
    return cfg.negatives == 0 ? volumes.rows() : cfg.negatives;
}

double log_sum_exp(const Eigen::VectorXd & x) {
    const double m = x.maxCoeff();
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::exp(x[i] - m);
    return m + std::log(s);
}

Eigen::VectorXd softmax(const Eigen::VectorXd & x) {
    const double m = x.maxCoeff();
    Eigen::VectorXd e = (x.array() - m).exp();
    return e / e.sum();
}

void check_unit_columns(const Eigen::MatrixXd & m, const char * name) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double norm = m.col(j).norm();
        if (std::abs(norm - 1.0) > kUnitTolerance) {
            fail(ErrorCode::InvalidBatch, std::string(name) + " embedding " + std::to_string(j) +
                                              " is not unit norm (" + std::to_string(norm) + ")");
        }
    }
}

double triplet_volume(const Eigen::VectorXd & a, const Eigen::VectorXd & v, const Eigen::VectorXd & t) {
    // Product of the modified Gram-Schmidt residual norms, i.e. |det R| of a
    // thin QR, without allocating.
    const double ra = a.norm();
    if (ra == 0.0) return 0.0;
    const Eigen::VectorXd qa = a / ra;
    Eigen::VectorXd rv = v - qa.dot(v) * qa;
    const double nv = rv.norm();
    if (nv == 0.0) return 0.0;
    rv /= nv;
    Eigen::VectorXd rt = t - qa.dot(t) * qa;
    rt -= rv.dot(rt) * rv;
    return ra * nv * rt.norm();
}

// d loss / d M for the softmax over texts (column-wise in M).
Eigen::MatrixXd av2t_coefficients(const Eigen::MatrixXd & volumes, Eigen::Index k, double tau) {
    const Eigen::Index b = volumes.cols();
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(volumes.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd logits = -volumes.col(i).head(k) / tau;
        Eigen::VectorXd p = softmax(logits);
        coef(i, i) += 1.0 / tau;
        for (Eigen::Index j = 0; j < k; ++j) coef(j, i) -= p[j] / tau;
    }
    return coef / static_cast<double>(b);
}

// d loss / d M for the softmax over audio–video pairs (row-wise in M).
Eigen::MatrixXd t2av_coefficients(const Eigen::MatrixXd & volumes, Eigen::Index k, double tau) {
    const Eigen::Index b = volumes.rows();
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(b, volumes.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd logits = -volumes.row(i).head(k).transpose() / tau;
        Eigen::VectorXd p = softmax(logits);
        coef(i, i) += 1.0 / tau;
        for (Eigen::Index j = 0; j < k; ++j) coef(i, j) -= p[j] / tau;
    }
    return coef / static_cast<double>(b);
}

} // namespace

void validate(const TripletBatch & batch, const LossConfig & cfg) {
    if (batch.size() < 1) fail(ErrorCode::InvalidBatch, "batch must hold at least one triplet");
    if (batch.video.cols() != batch.size() || batch.text.cols() != batch.size()) {
        fail(ErrorCode::InvalidBatch, "audio, video and text lists differ in length");
    }
    if (batch.video.rows() != batch.dim() || batch.text.rows() != batch.dim()) {
        fail(ErrorCode::InvalidBatch, "modality embeddings differ in dimension");
    }
    if (batch.dim() < 3) fail(ErrorCode::InvalidBatch, "triplet volume needs embedding dimension >= 3");
    check_unit_columns(batch.audio, "audio");
    check_unit_columns(batch.video, "video");
    check_unit_columns(batch.text, "text");
    if (!(cfg.temperature > 0.0)) fail(ErrorCode::InvalidConfig, "temperature must be positive");
    if (cfg.negatives < 0 || cfg.negatives > batch.size()) {
        fail(ErrorCode::InvalidConfig, "negatives K must satisfy K <= B");
    }
}

Eigen::MatrixXd volume_matrix(const TripletBatch & batch) {
    const Eigen::Index b = batch.size();
    Eigen::MatrixXd m(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const Eigen::VectorXd t = batch.text.col(i);
        for (Eigen::Index j = 0; j < b; ++j) {
            m(i, j) = triplet_volume(batch.audio.col(j), batch.video.col(j), t);
        }
    }
    return m;
}

double loss_av2t_from_volumes(const Eigen::MatrixXd & volumes, const LossConfig & cfg) {
    const Eigen::Index b = volumes.cols();
    const Eigen::Index k = negatives_of(volumes, cfg);
    const double tau = cfg.temperature;
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd logits = -volumes.col(i).head(k) / tau;
        total += volumes(i, i) / tau + log_sum_exp(logits);
    }
    return total / static_cast<double>(b);
}

double loss_t2av_from_volumes(const Eigen::MatrixXd & volumes, const LossConfig & cfg) {
    const Eigen::Index b = volumes.rows();
    const Eigen::Index k = negatives_of(volumes, cfg);
    const double tau = cfg.temperature;
    double total = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd logits = -volumes.row(i).head(k).transpose() / tau;
        total += volumes(i, i) / tau + log_sum_exp(logits);
    }
    return total / static_cast<double>(b);
}

double loss_av2t(const TripletBatch & batch, const LossConfig & cfg) {
    validate(batch, cfg);
    return loss_av2t_from_volumes(volume_matrix(batch), cfg);
}

double loss_t2av(const TripletBatch & batch, const LossConfig & cfg) {
    validate(batch, cfg);
    return loss_t2av_from_volumes(volume_matrix(batch), cfg);
}

double loss_combined(const TripletBatch & batch, const LossConfig & cfg) {
    validate(batch, cfg);
    const Eigen::MatrixXd volumes = volume_matrix(batch);
    return 0.5 * (loss_av2t_from_volumes(volumes, cfg) + loss_t2av_from_volumes(volumes, cfg));
}

double gram_loss(const TripletBatch & batch, const LossConfig & cfg) {
    switch (cfg.direction) {
        case LossDirection::AV2T: return loss_av2t(batch, cfg);
        case LossDirection::T2AV: return loss_t2av(batch, cfg);
        case LossDirection::Combined: return loss_combined(batch, cfg);
    }
    fail(ErrorCode::InvalidConfig, "unknown loss direction");
}

TripletGradient loss_gradient(const TripletBatch & batch, const LossConfig & cfg) {
    validate(batch, cfg);
    const Eigen::Index b = batch.size();
    const Eigen::Index k = negatives_of(batch, cfg);
    const Eigen::MatrixXd volumes = volume_matrix(batch);

    Eigen::MatrixXd coef;
    switch (cfg.direction) {
        case LossDirection::AV2T: coef = av2t_coefficients(volumes, k, cfg.temperature); break;
        case LossDirection::T2AV: coef = t2av_coefficients(volumes, k, cfg.temperature); break;
        case LossDirection::Combined:
            coef = 0.5 * (av2t_coefficients(volumes, k, cfg.temperature) +
                          t2av_coefficients(volumes, k, cfg.temperature));
            break;
    }

    TripletGradient grad{Eigen::MatrixXd::Zero(batch.dim(), b), Eigen::MatrixXd::Zero(batch.dim(), b),
                         Eigen::MatrixXd::Zero(batch.dim(), b)};
    Eigen::MatrixXd columns(batch.dim(), 3);
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) {
            const double c = coef(i, j);
            if (c == 0.0) continue;
            columns.col(0) = batch.audio.col(j);
            columns.col(1) = batch.video.col(j);
            columns.col(2) = batch.text.col(i);
            const Eigen::MatrixXd dv = volume_gradient(columns);
            grad.audio.col(j) += c * dv.col(0);
            grad.video.col(j) += c * dv.col(1);
            grad.text.col(i) += c * dv.col(2);
        }
    }
    return grad;
}

namespace {

const Eigen::MatrixXd & modality_matrix(const TripletBatch & batch, Modality m) {
    switch (m) {
        case Modality::Audio: return batch.audio;
        case Modality::Video: return batch.video;
        case Modality::Text: return batch.text;
    }
    fail(ErrorCode::InvalidArgument, "unknown modality");
}

Eigen::MatrixXd & modality_matrix(TripletGradient & grad, Modality m) {
    switch (m) {
        case Modality::Audio: return grad.audio;
        case Modality::Video: return grad.video;
        case Modality::Text: return grad.text;
    }
    fail(ErrorCode::InvalidArgument, "unknown modality");
}

void others_of(Modality anchor, Modality & first, Modality & second) {
    switch (anchor) {
        case Modality::Audio: first = Modality::Video; second = Modality::Text; return;
        case Modality::Video: first = Modality::Audio; second = Modality::Text; return;
        case Modality::Text: first = Modality::Audio; second = Modality::Video; return;
    }
    fail(ErrorCode::InvalidArgument, "unknown anchor modality");
}

// Symmetric InfoNCE over S = xᵀy / τ; returns the loss and dL/dS.
double infonce(const Eigen::MatrixXd & x, const Eigen::MatrixXd & y, const LossConfig & cfg,
               Eigen::MatrixXd * dlogits) {
    const Eigen::Index b = x.cols();
    const Eigen::Index k = cfg.negatives == 0 ? b : cfg.negatives;
    const Eigen::MatrixXd s = x.transpose() * y / cfg.temperature;
    double rows = 0.0;
    double cols = 0.0;
    if (dlogits) *dlogits = Eigen::MatrixXd::Zero(b, b);
    const double w = 0.5 / static_cast<double>(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd r = s.row(i).head(k).transpose();
        rows += log_sum_exp(r) - s(i, i);
        Eigen::VectorXd c = s.col(i).head(k);
        cols += log_sum_exp(c) - s(i, i);
        if (dlogits) {
            Eigen::VectorXd pr = softmax(r);
            Eigen::VectorXd pc = softmax(c);
            for (Eigen::Index j = 0; j < k; ++j) {
                (*dlogits)(i, j) += w * pr[j];
                (*dlogits)(j, i) += w * pc[j];
            }
            (*dlogits)(i, i) -= 2.0 * w;
        }
    }
    return 0.5 * (rows + cols) / static_cast<double>(b);
}

} // namespace

double pairwise_infonce_baseline(const TripletBatch & batch, const LossConfig & cfg, Modality anchor) {
    validate(batch, cfg);
    Modality first{};
    Modality second{};
    others_of(anchor, first, second);
    const auto & x = modality_matrix(batch, anchor);
    return infonce(x, modality_matrix(batch, first), cfg, nullptr) +
           infonce(x, modality_matrix(batch, second), cfg, nullptr);
}

TripletGradient pairwise_infonce_gradient(const TripletBatch & batch, const LossConfig & cfg, Modality anchor) {
    validate(batch, cfg);
    Modality first{};
    Modality second{};
    others_of(anchor, first, second);
    TripletGradient grad{Eigen::MatrixXd::Zero(batch.dim(), batch.size()),
                         Eigen::MatrixXd::Zero(batch.dim(), batch.size()),
                         Eigen::MatrixXd::Zero(batch.dim(), batch.size())};
    const auto & x = modality_matrix(batch, anchor);
    for (Modality other : {first, second}) {
        const auto & y = modality_matrix(batch, other);
        Eigen::MatrixXd ds;
        infonce(x, y, cfg, &ds);
        // S = xᵀy/τ: dL/dx = y dSᵀ/τ, dL/dy = x dS/τ
        modality_matrix(grad, anchor) += y * ds.transpose() / cfg.temperature;
        modality_matrix(grad, other) += x * ds / cfg.temperature;
    }
    return grad;
}

} // namespace foleygram
