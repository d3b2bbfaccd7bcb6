#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/rng.hpp"
#include "bimodal/tensor.hpp"

namespace bimodal {

// Single-channel image, intensities in [-1, 1] after normalization.
struct Image {
    int h = 0, w = 0;
    std::vector<float> px; // row-major, h*w
    std::string modality;
    std::string source_id;

    float& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    float at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

// Spatially aligned pair; first.modality != second.modality.
struct ImagePair {
    Image first;
    Image second;
    std::string pair_id;
};

enum class Split { train, test };

struct PairedDataset {
    std::vector<ImagePair> pairs;
    Split split = Split::train;
    std::array<std::string, 2> modality_names{};
    // Optional per-pair binary attribute (empty when the source has no labels).
    std::vector<int> labels;

    std::size_t size() const { return pairs.size(); }
};

// Per-image min-max map onto [-1, 1]. A constant image maps to all zeros
// (the midpoint). Whole-dataset normalization is handled by the loader.
inline Image normalize_intensity(const std::vector<float>& raw, int h, int w,
                                 const std::string& modality) {
    if (raw.empty() || h <= 0 || w <= 0 || raw.size() != static_cast<std::size_t>(h) * w)
        throw InputError("normalize_intensity: empty or inconsistently shaped input");
    float lo = raw[0], hi = raw[0];
    for (float x : raw) {
        if (!std::isfinite(x)) throw InputError("normalize_intensity: non-finite pixel value");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    Image out;
    out.h = h;
    out.w = w;
    out.modality = modality;
    out.px.resize(raw.size());
    if (hi > lo) {
        const float scale = hi - lo;
        for (std::size_t i = 0; i < raw.size(); ++i)
            out.px[i] = 2.0f * (raw[i] - lo) / scale - 1.0f;
    } // else: all zeros already
    return out;
}

inline Image normalize_intensity(const Image& img) {
    Image out = normalize_intensity(img.px, img.h, img.w, img.modality);
    out.source_id = img.source_id;
    return out;
}

// Breaks the pairing with a seeded derangement of the second-modality images
// (Sattolo cycle: no index keeps its partner). The per-modality image
// multisets are unchanged.
inline PairedDataset make_unpaired_view(const PairedDataset& ds, std::uint64_t seed) {
    if (ds.size() < 2)
        throw InputError("make_unpaired_view: need at least 2 pairs (no derangement of size 1)");
    Rng rng(derive_seed(seed, "unpaired-view"));
    std::vector<std::size_t> perm;
    rng.cyclic_permutation(perm, ds.size());
    PairedDataset out;
    out.split = ds.split;
    out.modality_names = ds.modality_names;
    out.pairs.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ImagePair p;
        p.first = ds.pairs[i].first;
        p.second = ds.pairs[perm[i]].second;
        p.pair_id = ds.pairs[i].pair_id + "~" + ds.pairs[perm[i]].pair_id;
        out.pairs.push_back(std::move(p));
    }
    return out;
}

inline void validate_dataset(const PairedDataset& ds) {
    std::unordered_set<std::string> ids;
    for (const auto& p : ds.pairs) {
        if (p.first.modality == p.second.modality)
            throw InputError("dataset: pair " + p.pair_id + " has equal modalities");
        if (p.first.h != p.second.h || p.first.w != p.second.w)
            throw InputError("dataset: pair " + p.pair_id + " has mismatched shapes");
        if (!ids.insert(p.pair_id).second)
            throw InputError("dataset: duplicate pair_id " + p.pair_id);
    }
    if (!ds.labels.empty() && ds.labels.size() != ds.pairs.size())
        throw InputError("dataset: label count does not match pair count");
}

// Batch assembly helpers.

template <class T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw InputError("images_to_tensor: empty batch");
    const int h = imgs[0]->h, w = imgs[0]->w;
    Tensor<T> t(static_cast<int>(imgs.size()), 1, h, w);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        if (imgs[i]->h != h || imgs[i]->w != w)
            throw InputError("images_to_tensor: inconsistent image shapes");
        T* dst = t.item(static_cast<int>(i));
        for (std::size_t k = 0; k < imgs[i]->px.size(); ++k) dst[k] = static_cast<T>(imgs[i]->px[k]);
    }
    return t;
}

template <class T>
Tensor<T> images_to_tensor(const std::vector<Image>& imgs) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(imgs.size());
    for (const auto& im : imgs) ptrs.push_back(&im);
    return images_to_tensor<T>(ptrs);
}

// 2-channel tensor from pairs (channel 0 = first, channel 1 = second).
template <class T>
Tensor<T> pairs_to_tensor(const std::vector<const ImagePair*>& pairs) {
    if (pairs.empty()) throw InputError("pairs_to_tensor: empty batch");
    const int h = pairs[0]->first.h, w = pairs[0]->first.w;
    Tensor<T> t(static_cast<int>(pairs.size()), 2, h, w);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Image& a = pairs[i]->first;
        const Image& b = pairs[i]->second;
        if (a.h != h || a.w != w || b.h != h || b.w != w)
            throw InputError("pairs_to_tensor: inconsistent shapes");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                t.at(static_cast<int>(i), 0, y, x) = static_cast<T>(a.at(y, x));
                t.at(static_cast<int>(i), 1, y, x) = static_cast<T>(b.at(y, x));
            }
    }
    return t;
}

template <class T>
Image tensor_slice_to_image(const Tensor<T>& t, int item, int channel, const std::string& modality,
                            const std::string& source_id) {
    Image im;
    im.h = t.h;
    im.w = t.w;
    im.modality = modality;
    im.source_id = source_id;
    im.px.resize(t.plane());
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            im.px[static_cast<std::size_t>(y) * t.w + x] = static_cast<float>(t.at(item, channel, y, x));
    return im;
}

} // namespace bimodal
