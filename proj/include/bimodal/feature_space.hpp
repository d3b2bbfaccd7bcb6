#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "bimodal/image.hpp"
#include "bimodal/networks.hpp"

namespace bimodal {

// ---------------------------------------------------------------------------
// Multivariate Gaussian fit of a feature matrix.
// ---------------------------------------------------------------------------

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    int n_samples = 0;
};

inline constexpr double kCovarianceRidge = 1e-6;

// Unbiased sample covariance plus a ridge of 1e-6 * I.
inline GaussianStats fit_gaussian(const Eigen::MatrixXd& features) {
    const int n = static_cast<int>(features.rows());
    const int d = static_cast<int>(features.cols());
    if (n < 2) throw InputError("fit_gaussian: need at least 2 samples");
    if (!features.allFinite()) throw InputError("fit_gaussian: non-finite feature values");
    GaussianStats s;
    s.n_samples = n;
    s.mean = features.colwise().mean();
    Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
    s.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
    s.covariance += kCovarianceRidge * Eigen::MatrixXd::Identity(d, d);
    return s;
}

// ---------------------------------------------------------------------------
// Tr((a b)^(1/2)) through the symmetric form Tr((a^(1/2) b a^(1/2))^(1/2)).
// Eigenvalues pushed slightly negative by roundoff are clamped to zero.
// ---------------------------------------------------------------------------

inline double matrix_sqrt_product_trace(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw InputError("matrix_sqrt_product_trace: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(0.5 * (a + a.transpose()));
    if (ea.info() != Eigen::Success)
        throw NumericError("matrix_sqrt_product_trace: eigendecomposition of a failed");
    Eigen::VectorXd ev = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd sqrt_a = ea.eigenvectors() * ev.asDiagonal() * ea.eigenvectors().transpose();
    Eigen::MatrixXd m = sqrt_a * (0.5 * (b + b.transpose())) * sqrt_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()));
    if (em.info() != Eigen::Success)
        throw NumericError("matrix_sqrt_product_trace: eigendecomposition of a^1/2 b a^1/2 failed");
    return em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

// ---------------------------------------------------------------------------
// Frechet (Wasserstein-2) distance between Gaussian fits:
//   ||mu_g - mu_r||^2 + Tr(S_g + S_r - 2 (S_g S_r)^(1/2)).
// Small negative results from roundoff are clamped to zero; larger negatives
// indicate a broken matrix square root and are reported as errors.
// ---------------------------------------------------------------------------

inline double frechet_distance(const GaussianStats& g, const GaussianStats& r) {
    if (g.mean.size() != r.mean.size())
        throw InputError("frechet_distance: dimension mismatch");
    const double mean_term = (g.mean - r.mean).squaredNorm();
    const double tr_term =
        g.covariance.trace() + r.covariance.trace() - 2.0 * matrix_sqrt_product_trace(g.covariance, r.covariance);
    double d = mean_term + tr_term;
    if (d < 0.0) {
        if (d < -1e-6)
            throw NumericError("frechet_distance: negative value " + std::to_string(d) +
                               " beyond numerical slack (condition suspect)");
        d = 0.0;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Feature extractor: a fixed-seed convolutional stack with a tap after every
// layer; per-tap features are channel means over space (global average
// pooling). A pretrained backbone can be substituted behind the same surface;
// everything downstream keys on the descriptor string.
// ---------------------------------------------------------------------------

template <class T>
struct FeatureExtractor {
    std::vector<Conv2d<T>> convs;
    int image_size = 0;
    int in_channels = 1;
    std::uint64_t seed = 0;

    static constexpr int kTaps = 4;

    void configure(int image_size_, int in_channels_, std::uint64_t seed_) {
        image_size = image_size_;
        in_channels = in_channels_;
        seed = seed_;
        const int channels[kTaps] = {16, 32, 64, 128};
        convs.clear();
        int cin = in_channels;
        for (int j = 0; j < kTaps; ++j) {
            Conv2d<T> L;
            L.configure(cin, channels[j], 4, 2, 1);
            Rng rng(derive_seed(seed, "extractor", static_cast<std::uint64_t>(j)));
            L.init_he(rng);
            cin = channels[j];
            convs.push_back(std::move(L));
        }
    }

    int n_taps() const { return kTaps; }
    std::vector<int> layer_ids() const { return {0, 1, 2, 3}; }

    std::string descriptor() const {
        std::ostringstream os;
        os << "rfe-v1;s" << image_size << ";in" << in_channels << ";c16-32-64-128;seed" << seed;
        return os.str();
    }

    // One feature matrix per tap; rows = images, cols = channels of that tap.
    std::vector<Eigen::MatrixXd> extract(const Tensor<T>& batch) const {
        if (batch.h != image_size || batch.c != in_channels)
            throw InputError("FeatureExtractor: input shape mismatch for " + descriptor());
        std::vector<Eigen::MatrixXd> taps(kTaps);
        for (int j = 0; j < kTaps; ++j)
            taps[j].resize(batch.n, convs[j].cout);
        Tensor<T> a = batch;
        for (int j = 0; j < kTaps; ++j) {
            Tensor<T> u;
            conv_forward(convs[j], a, u, static_cast<ConvCache<T>*>(nullptr));
            leaky_relu_forward(u, T(0.2), static_cast<Tensor<T>*>(nullptr));
            for (int i = 0; i < u.n; ++i)
                for (int ci = 0; ci < u.c; ++ci) {
                    const T* p = &u.at(i, ci, 0, 0);
                    double acc = 0.0;
                    for (std::size_t t = 0; t < u.plane(); ++t) acc += static_cast<double>(p[t]);
                    taps[j](i, ci) = acc / static_cast<double>(u.plane());
                }
            a = std::move(u);
        }
        return taps;
    }

    std::vector<Eigen::MatrixXd> extract_images(const std::vector<const Image*>& imgs) const {
        return extract(images_to_tensor<T>(imgs));
    }
};

// ---------------------------------------------------------------------------
// Synthesis complexity: summed per-tap Frechet distances between generated and
// real feature distributions.
// ---------------------------------------------------------------------------

struct ComplexityScore {
    double total = 0.0;
    std::vector<double> per_layer;
    std::string modality;
    int n_generated = 0;
    int n_real = 0;
    std::string extractor_descriptor;

    std::string to_report() const {
        std::ostringstream os;
        os << "modality: " << modality << "\n";
        os << "total: " << total << "\n";
        for (std::size_t i = 0; i < per_layer.size(); ++i)
            os << "layer_" << i << ": " << per_layer[i] << "\n";
        os << "n_generated: " << n_generated << "\n";
        os << "n_real: " << n_real << "\n";
        os << "extractor: " << extractor_descriptor << "\n";
        return os.str();
    }
};

template <class T>
ComplexityScore synthesis_complexity(const FeatureExtractor<T>& extractor,
                                     const std::vector<const Image*>& generated,
                                     const std::vector<const Image*>& real) {
    if (generated.size() < 2 || real.size() < 2)
        throw InputError("synthesis_complexity: need at least 2 images per set");
    for (const Image* im : generated)
        if (im->modality != generated[0]->modality)
            throw InputError("synthesis_complexity: mixed modalities in generated set");
    for (const Image* im : real)
        if (im->modality != generated[0]->modality)
            throw InputError("synthesis_complexity: generated/real modality mismatch");
    const auto fg = extractor.extract_images(generated);
    const auto fr = extractor.extract_images(real);
    ComplexityScore score;
    score.modality = generated[0]->modality;
    score.n_generated = static_cast<int>(generated.size());
    score.n_real = static_cast<int>(real.size());
    score.extractor_descriptor = extractor.descriptor();
    for (std::size_t i = 0; i < fg.size(); ++i) {
        const double d = frechet_distance(fit_gaussian(fg[i]), fit_gaussian(fr[i]));
        score.per_layer.push_back(d);
        score.total += d;
    }
    return score;
}

// Lower-complexity modality first; exact ties broken lexicographically (with a
// warning the caller can surface).
inline std::pair<std::string, std::string> decide_order(const ComplexityScore& a,
                                                        const ComplexityScore& b,
                                                        bool* tie_warning = nullptr) {
    if (a.modality == b.modality) throw InputError("decide_order: identical modalities");
    if (tie_warning) *tie_warning = false;
    if (a.total < b.total) return {a.modality, b.modality};
    if (b.total < a.total) return {b.modality, a.modality};
    if (tie_warning) *tie_warning = true;
    return a.modality < b.modality ? std::make_pair(a.modality, b.modality)
                                   : std::make_pair(b.modality, a.modality);
}

} // namespace bimodal
