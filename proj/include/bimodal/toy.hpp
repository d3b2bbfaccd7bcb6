#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/image.hpp"
#include "bimodal/rng.hpp"

namespace bimodal {

// Procedural paired dataset: one random ellipse per pair, rendered as a smooth
// (blurred) modality and a textured (striped, hard-edged) modality. The binary
// attribute is eccentricity above/below a threshold, standing in for the
// CS/nonCS label of a clinical set.
struct ToyParams {
    int n_pairs = 500;
    int image_size = 32;
    double texture_frequency = 6.0; // stripe cycles per image width
    double blur_sigma = 1.5;        // pixels
    std::uint64_t seed = 0;
    double class_balance = 0.5;     // fraction of positive (high-eccentricity) pairs

    void validate() const {
        if (n_pairs < 1) throw ConfigError("toy: n_pairs must be >= 1");
        if (image_size < 8) throw ConfigError("toy: image_size must be >= 8");
        if (!(texture_frequency > 0.0)) throw ConfigError("toy: texture_frequency must be > 0");
        if (blur_sigma < 0.0) throw ConfigError("toy: blur_sigma must be >= 0");
        if (class_balance < 0.0 || class_balance > 1.0)
            throw ConfigError("toy: class_balance must be in [0,1]");
    }
};

inline constexpr const char* kToyModalitySmooth = "smooth";
inline constexpr const char* kToyModalityTextured = "textured";
inline constexpr double kToyEccentricityThreshold = 0.70;

struct ToyGeometry {
    double cx = 0, cy = 0;   // center, pixels
    double ax = 0, ay = 0;   // semi-axes, pixels (ax >= ay)
    double theta = 0;        // rotation, radians
    int label = 0;           // 1 if eccentricity > threshold
    double eccentricity() const { return std::sqrt(1.0 - (ay * ay) / (ax * ax)); }
};

// Geometry for pair `index` is a pure function of (params.seed, index).
inline ToyGeometry toy_pair_geometry(const ToyParams& p, int index) {
    Rng rng(derive_seed(p.seed, "toy-pair", static_cast<std::uint64_t>(index)));
    const double s = p.image_size;
    ToyGeometry g;
    g.label = rng.uniform() < p.class_balance ? 1 : 0;
    g.cx = rng.uniform_in(0.38, 0.62) * s;
    g.cy = rng.uniform_in(0.38, 0.62) * s;
    g.ax = rng.uniform_in(0.24, 0.40) * s;
    // Eccentricity sampled on the label's side of the threshold, with a margin
    // so the classes are separable but not trivially so.
    const double ecc = g.label ? rng.uniform_in(0.78, 0.95) : rng.uniform_in(0.15, 0.60);
    g.ay = g.ax * std::sqrt(1.0 - ecc * ecc);
    g.theta = rng.uniform_in(0.0, 3.14159265358979323846);
    return g;
}

inline std::vector<float> toy_ellipse_mask(const ToyGeometry& g, int size) {
    std::vector<float> mask(static_cast<std::size_t>(size) * size, 0.0f);
    const double ct = std::cos(g.theta), st = std::sin(g.theta);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = x + 0.5 - g.cx, dy = y + 0.5 - g.cy;
            const double u = (dx * ct + dy * st) / g.ax;
            const double v = (-dx * st + dy * ct) / g.ay;
            if (u * u + v * v <= 1.0) mask[static_cast<std::size_t>(y) * size + x] = 1.0f;
        }
    }
    return mask;
}

inline void separable_gaussian_blur(std::vector<float>& img, int size, double sigma) {
    if (sigma <= 0.0) return;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = static_cast<float>(std::exp(-0.5 * (i * i) / (sigma * sigma)));
        sum += kernel[i + radius];
    }
    for (float& k : kernel) k = static_cast<float>(k / sum);

    std::vector<float> tmp(img.size());
    auto clampi = [size](int i) { return std::min(std::max(i, 0), size - 1); };
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * img[static_cast<std::size_t>(y) * size + clampi(x + k)];
            tmp[static_cast<std::size_t>(y) * size + x] = acc;
        }
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(clampi(y + k)) * size + x];
            img[static_cast<std::size_t>(y) * size + x] = acc;
        }
}

// Smooth modality: blurred filled ellipse. Textured modality: the same
// ellipse carrying sinusoidal stripes (phase locked to the ellipse center, so
// the textured image is a deterministic function of the shared geometry) with
// a hard boundary. The stripe term vanishes identically as
// texture_frequency -> 0, leaving the two modalities pixelwise equal when
// blur_sigma = 0.
inline ImagePair make_toy_pair(const ToyParams& p, int index) {
    const ToyGeometry g = toy_pair_geometry(p, index);
    const int s = p.image_size;
    const std::vector<float> mask = toy_ellipse_mask(g, s);

    std::vector<float> smooth = mask;
    separable_gaussian_blur(smooth, s, p.blur_sigma);

    std::vector<float> textured(mask.size());
    const double ct = std::cos(g.theta), st = std::sin(g.theta);
    const double k = 2.0 * 3.14159265358979323846 * p.texture_frequency / s;
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * s + x;
            const double u = (x + 0.5 - g.cx) * ct + (y + 0.5 - g.cy) * st;
            textured[i] = mask[i] * static_cast<float>(1.0 + 0.6 * std::sin(k * u));
        }

    char buf[32];
    std::snprintf(buf, sizeof(buf), "toy_%06d", index);
    ImagePair pair;
    pair.pair_id = buf;
    pair.first = normalize_intensity(smooth, s, s, kToyModalitySmooth);
    pair.first.source_id = pair.pair_id;
    pair.second = normalize_intensity(textured, s, s, kToyModalityTextured);
    pair.second.source_id = pair.pair_id;
    return pair;
}

inline PairedDataset generate_toy_bimodal(const ToyParams& p) {
    p.validate();
    PairedDataset ds;
    ds.split = Split::train;
    ds.modality_names = {kToyModalitySmooth, kToyModalityTextured};
    ds.pairs.reserve(p.n_pairs);
    ds.labels.reserve(p.n_pairs);
    for (int i = 0; i < p.n_pairs; ++i) {
        ds.pairs.push_back(make_toy_pair(p, i));
        ds.labels.push_back(toy_pair_geometry(p, i).label);
    }
    return ds;
}

} // namespace bimodal
