#include "metrics.hpp"

#include "error.hpp"
#include "stats.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>

namespace foleygram {

EmbeddingSet EmbeddingSet::fit(Eigen::MatrixXd samples) {
    if (samples.rows() < 2 || samples.cols() < 1) {
        fail(ErrorCode::InvalidArgument, "embedding set needs at least two samples");
    }
    EmbeddingSet s;
    s.mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
    s.covariance = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
    s.samples = std::move(samples);
    return s;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd & s) {
    const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "eigendecomposition did not converge");
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_distance(const Eigen::VectorXd & mu_a, const Eigen::MatrixXd & sigma_a, const Eigen::VectorXd & mu_b,
                        const Eigen::MatrixXd & sigma_b) {
    const auto n = mu_a.size();
    if (mu_b.size() != n || sigma_a.rows() != n || sigma_a.cols() != n || sigma_b.rows() != n ||
        sigma_b.cols() != n) {
        fail(ErrorCode::DimensionMismatch, "Frechet distance needs sets of equal dimension");
    }
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd ra = sigma_a + kCovarianceRegularization * id;
    const Eigen::MatrixXd rb = sigma_b + kCovarianceRegularization * id;
    // Tr (Σ_A Σ_B)^{1/2} = Tr (Σ_A^{1/2} Σ_B Σ_A^{1/2})^{1/2}; the inner product is symmetric PSD.
    const Eigen::MatrixXd root_a = symmetric_sqrt(ra);
    Eigen::MatrixXd inner = root_a * rb * root_a;
    inner = (0.5 * (inner + inner.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "eigendecomposition did not converge");
    const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = (mu_a - mu_b).squaredNorm() + ra.trace() + rb.trace() - 2.0 * trace_sqrt;
    return std::max(d, 0.0);
}

double frechet_distance(const EmbeddingSet & a, const EmbeddingSet & b) {
    return frechet_distance(a.mean, a.covariance, b.mean, b.covariance);
}

double cosine_score(const Eigen::MatrixXd & gen, const Eigen::MatrixXd & ref) {
    if (gen.rows() != ref.rows() || gen.cols() != ref.cols() || gen.rows() == 0) {
        fail(ErrorCode::DimensionMismatch, "cosine score needs paired sets of equal shape");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < gen.rows(); ++i) {
        const double denom = gen.row(i).norm() * ref.row(i).norm();
        if (!(denom > 0.0)) fail(ErrorCode::ZeroVector, "cosine of a zero embedding");
        total += gen.row(i).dot(ref.row(i)) / denom;
    }
    return total / static_cast<double>(gen.rows());
}

double cosine_score(const EmbeddingSet & gen, const EmbeddingSet & ref) {
    return cosine_score(gen.samples, ref.samples);
}

double envelope_correlation(const Envelope & conditioning, const Waveform & generated) {
    const Envelope produced = rms_envelope(generated, conditioning.window, conditioning.hop);
    std::vector<double> aligned = produced.frames;
    if (aligned.size() != conditioning.frames.size()) {
        aligned = resample_linear(produced.frames, conditioning.frames.size());
    }
    return pearson(conditioning.frames, aligned);
}

std::string metric_csv(const std::vector<MetricRow> & rows) {
    std::ostringstream os;
    os.precision(10);
    os << "metric,value,seed,config_hash\n";
    for (const auto & r : rows) os << r.metric << ',' << r.value << ',' << r.seed << ',' << r.config_hash << '\n';
    return os.str();
}

void write_metric_csv(const std::filesystem::path & path, const std::vector<MetricRow> & rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f << metric_csv(rows);
}

} // namespace foleygram
