#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bimodal/feature_space.hpp"
#include "bimodal/image.hpp"

namespace bimodal {

// All entropies and divergences are in nats.

// ---------------------------------------------------------------------------
// Inception score from conditional label distributions:
//   IS = exp( mean_i KL(p(y|I_i) || p_bar) ),  p_bar = mean_i p(y|I_i).
// Always in [1, K].
// ---------------------------------------------------------------------------

struct LabelDistribution {
    std::vector<double> probs;
};

inline void validate_simplex(const LabelDistribution& d) {
    double s = 0.0;
    for (double p : d.probs) {
        if (p < -1e-9) throw InputError("LabelDistribution: negative probability");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-6) throw InputError("LabelDistribution: probabilities must sum to 1");
}

inline double inception_score(const std::vector<LabelDistribution>& conditionals) {
    if (conditionals.empty()) throw InputError("inception_score: empty input");
    const std::size_t k = conditionals[0].probs.size();
    std::vector<double> marginal(k, 0.0);
    for (const auto& c : conditionals) {
        if (c.probs.size() != k) throw InputError("inception_score: inconsistent class counts");
        validate_simplex(c);
        for (std::size_t j = 0; j < k; ++j) marginal[j] += c.probs[j];
    }
    for (double& m : marginal) m /= static_cast<double>(conditionals.size());
    constexpr double eps = 1e-12;
    double mean_kl = 0.0;
    for (const auto& c : conditionals) {
        double kl = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            if (c.probs[j] > 0.0)
                kl += c.probs[j] * (std::log(c.probs[j]) - std::log(std::max(marginal[j], eps)));
        mean_kl += kl;
    }
    mean_kl /= static_cast<double>(conditionals.size());
    return std::exp(mean_kl);
}

// ---------------------------------------------------------------------------
// FID at one extractor tap (the deepest by default) and joint-FID on
// channel-concatenated pairs.
// ---------------------------------------------------------------------------

template <class T>
double fid(const std::vector<const Image*>& syn, const std::vector<const Image*>& real,
           const FeatureExtractor<T>& extractor, int layer) {
    if (syn.size() < 2 || real.size() < 2) throw InputError("fid: need at least 2 images per set");
    if (layer < 0 || layer >= extractor.n_taps()) throw InputError("fid: bad layer index");
    const auto fs = extractor.extract_images(syn);
    const auto fr = extractor.extract_images(real);
    return frechet_distance(fit_gaussian(fs[layer]), fit_gaussian(fr[layer]));
}

template <class T>
double joint_fid(const std::vector<const ImagePair*>& syn, const std::vector<const ImagePair*>& real,
                 const FeatureExtractor<T>& extractor2ch, int layer) {
    if (syn.size() < 2 || real.size() < 2)
        throw InputError("joint_fid: need at least 2 pairs per set");
    if (extractor2ch.in_channels != 2)
        throw InputError("joint_fid: extractor must accept 2-channel input");
    const auto fs = extractor2ch.extract(pairs_to_tensor<T>(syn));
    const auto fr = extractor2ch.extract(pairs_to_tensor<T>(real));
    return frechet_distance(fit_gaussian(fs[layer]), fit_gaussian(fr[layer]));
}

// ---------------------------------------------------------------------------
// Mutual information on a bins x bins joint histogram with equal-width cells
// over [-1,1]^2. Zero cells are skipped; result is >= 0.
// ---------------------------------------------------------------------------

inline int mi_bin(float v, int bins) {
    int b = static_cast<int>((static_cast<double>(v) + 1.0) * 0.5 * bins);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    return b;
}

inline double mutual_information(const Image& a, const Image& b, int bins = 32) {
    if (a.h != b.h || a.w != b.w) throw InputError("mutual_information: shape mismatch");
    if (bins < 2) throw InputError("mutual_information: bins must be >= 2");
    std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
    std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
    const std::size_t n = a.px.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int u = mi_bin(a.px[i], bins), v = mi_bin(b.px[i], bins);
        joint[static_cast<std::size_t>(u) * bins + v] += 1.0;
        pa[u] += 1.0;
        pb[v] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(n);
    double mi = 0.0;
    for (int u = 0; u < bins; ++u)
        for (int v = 0; v < bins; ++v) {
            const double puv = joint[static_cast<std::size_t>(u) * bins + v] * inv;
            if (puv <= 0.0) continue;
            mi += puv * std::log(puv / (pa[u] * inv * pb[v] * inv));
        }
    return mi < 0.0 && mi > -1e-12 ? 0.0 : mi;
}

// Marginal entropy under the same binning, for the MI(x,x) = H(x) identity.
inline double binned_entropy(const Image& a, int bins = 32) {
    std::vector<double> pa(bins, 0.0);
    for (float v : a.px) pa[mi_bin(v, bins)] += 1.0;
    const double inv = 1.0 / static_cast<double>(a.px.size());
    double h = 0.0;
    for (double c : pa)
        if (c > 0.0) h -= c * inv * std::log(c * inv);
    return h;
}

// First-order finite-sample bias bound of the histogram MI estimator.
inline double mi_bias_bound(int bins, std::size_t n_pixels) {
    return static_cast<double>(bins - 1) * (bins - 1) / (2.0 * static_cast<double>(n_pixels));
}

// ---------------------------------------------------------------------------
// MID: |mean MI over synthetic pairs - mean MI over real pairs|.
// ---------------------------------------------------------------------------

inline double mean_pair_mi(const std::vector<const ImagePair*>& pairs, int bins) {
    if (pairs.empty()) throw InputError("mean_pair_mi: empty set");
    double acc = 0.0;
    for (const ImagePair* p : pairs) acc += mutual_information(p->first, p->second, bins);
    return acc / static_cast<double>(pairs.size());
}

inline double mid(const std::vector<const ImagePair*>& syn, const std::vector<const ImagePair*>& real,
                  int bins = 32) {
    return std::abs(mean_pair_mi(syn, bins) - mean_pair_mi(real, bins));
}

// ---------------------------------------------------------------------------
// Grouped evaluation: split N items in order into 10 equal groups, score each,
// report mean and population standard deviation.
// ---------------------------------------------------------------------------

struct GroupedScore {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> group_values;
    std::string metric_name;
};

inline GroupedScore grouped_stats(std::vector<double> values, const std::string& name) {
    GroupedScore s;
    s.metric_name = name;
    s.group_values = std::move(values);
    for (double v : s.group_values) s.mean += v;
    s.mean /= static_cast<double>(s.group_values.size());
    for (double v : s.group_values) s.std += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(s.std / static_cast<double>(s.group_values.size()));
    return s;
}

template <class Item>
GroupedScore grouped_evaluation(const std::vector<Item>& items,
                                const std::function<double(const std::vector<Item>&)>& metric,
                                const std::string& name, int n_groups = 10) {
    if (n_groups < 1) throw InputError("grouped_evaluation: n_groups must be >= 1");
    if (items.empty() || items.size() % static_cast<std::size_t>(n_groups) != 0)
        throw InputError("grouped_evaluation: item count " + std::to_string(items.size()) +
                         " not divisible by " + std::to_string(n_groups) +
                         " groups; pad or trim the set");
    const std::size_t per = items.size() / n_groups;
    std::vector<double> vals;
    for (int gidx = 0; gidx < n_groups; ++gidx) {
        std::vector<Item> group(items.begin() + gidx * per, items.begin() + (gidx + 1) * per);
        vals.push_back(metric(group));
    }
    return grouped_stats(std::move(vals), name);
}

} // namespace bimodal
