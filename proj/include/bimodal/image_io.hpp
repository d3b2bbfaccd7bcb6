#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bimodal/errors.hpp"
#include "bimodal/image.hpp"

namespace bimodal {

// PNG in/out. Internal representation is float in [-1,1]; on disk images are
// 16-bit grayscale (8-bit also accepted on read).

inline void write_image_png(const Image& img, const std::string& path) {
    cv::Mat m(img.h, img.w, CV_16UC1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float v = (img.at(y, x) + 1.0f) * 0.5f;
            v = std::min(std::max(v, 0.0f), 1.0f);
            m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        }
    if (!cv::imwrite(path, m)) throw InputError("failed to write image: " + path);
}

// Decode and resize to size x size (area filter when downscaling, bilinear
// otherwise). Pixel values are the raw intensities, not yet normalized.
inline std::vector<float> read_image_raw(const std::string& path, int size) {
    cv::Mat raw = cv::imread(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
    if (raw.empty()) throw InputError("unreadable image: " + path);
    cv::Mat f;
    raw.convertTo(f, CV_32FC1);
    if (raw.rows != size || raw.cols != size) {
        const int interp = (size < std::min(raw.rows, raw.cols)) ? cv::INTER_AREA : cv::INTER_LINEAR;
        cv::Mat resized;
        cv::resize(f, resized, cv::Size(size, size), 0, 0, interp);
        f = resized;
    }
    std::vector<float> px(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) px[static_cast<std::size_t>(y) * size + x] = f.at<float>(y, x);
    return px;
}

inline Image read_image_png(const std::string& path, int size, const std::string& modality) {
    Image img = normalize_intensity(read_image_raw(path, size), size, size, modality);
    img.source_id = path;
    return img;
}

struct ManifestRow {
    std::string pair_id;
    std::string path_a;
    std::string path_b;
    int label = -1; // -1 = absent
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

// manifest.csv: header `pair_id,path_a,path_b[,label]`, paths relative to the
// dataset root, one row per pair. Commas inside paths are not supported.
inline std::vector<ManifestRow> read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw InputError("cannot open manifest: " + manifest_path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty manifest: " + manifest_path);
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "pair_id" || header[1] != "path_a" || header[2] != "path_b")
        throw InputError("manifest header must be pair_id,path_a,path_b[,label]: " + manifest_path);
    const bool has_label = header.size() >= 4 && header[3] == "label";
    std::vector<ManifestRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cols = split_csv_line(line);
        if (cols.size() < 3)
            throw InputError("manifest row " + std::to_string(lineno) + " malformed in " + manifest_path);
        ManifestRow r;
        r.pair_id = cols[0];
        r.path_a = cols[1];
        r.path_b = cols[2];
        if (has_label && cols.size() >= 4 && !cols[3].empty()) r.label = std::stoi(cols[3]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::string modality_from_relpath(const std::string& rel) {
    const auto pos = rel.find('/');
    return pos == std::string::npos ? std::string("unknown") : rel.substr(0, pos);
}

enum class Normalization { per_image, per_dataset };

// Loads `<root>/<modality>/<pair_id>.png` pairs listed by the manifest,
// resized to image_size and normalized (per-image min-max by default,
// per-modality global min-max when norm = per_dataset). Row order is
// preserved.
inline PairedDataset load_paired_dataset(const std::string& root, const std::string& manifest,
                                         int image_size,
                                         Normalization norm = Normalization::per_image) {
    namespace fs = std::filesystem;
    const auto rows = read_manifest(manifest);
    PairedDataset ds;
    std::vector<std::array<std::vector<float>, 2>> raw;
    bool any_label = false;
    for (const auto& r : rows) {
        const std::string pa = (fs::path(root) / r.path_a).string();
        const std::string pb = (fs::path(root) / r.path_b).string();
        if (!fs::exists(pa))
            throw InputError("manifest row '" + r.pair_id + "': missing file " + pa);
        if (!fs::exists(pb))
            throw InputError("manifest row '" + r.pair_id + "': missing file " + pb);
        ImagePair pair;
        pair.pair_id = r.pair_id;
        try {
            if (norm == Normalization::per_image) {
                pair.first = read_image_png(pa, image_size, modality_from_relpath(r.path_a));
                pair.second = read_image_png(pb, image_size, modality_from_relpath(r.path_b));
            } else {
                raw.push_back({read_image_raw(pa, image_size), read_image_raw(pb, image_size)});
                pair.first.modality = modality_from_relpath(r.path_a);
                pair.first.source_id = pa;
                pair.second.modality = modality_from_relpath(r.path_b);
                pair.second.source_id = pb;
            }
        } catch (const InputError& e) {
            throw InputError("manifest row '" + r.pair_id + "': " + e.what());
        }
        ds.pairs.push_back(std::move(pair));
        ds.labels.push_back(r.label);
        if (r.label >= 0) any_label = true;
    }
    if (!any_label) ds.labels.clear();
    if (norm == Normalization::per_dataset) {
        for (int side = 0; side < 2; ++side) {
            float lo = 1e30f, hi = -1e30f;
            for (const auto& rp : raw)
                for (float v : rp[side]) {
                    if (!std::isfinite(v)) throw InputError("non-finite pixel in dataset");
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            for (std::size_t i = 0; i < raw.size(); ++i) {
                Image& im = side == 0 ? ds.pairs[i].first : ds.pairs[i].second;
                im.h = image_size;
                im.w = image_size;
                im.px.resize(raw[i][side].size());
                for (std::size_t k = 0; k < im.px.size(); ++k)
                    im.px[k] = hi > lo ? 2.0f * (raw[i][side][k] - lo) / (hi - lo) - 1.0f : 0.0f;
            }
        }
    }
    if (!ds.pairs.empty()) {
        ds.modality_names = {ds.pairs[0].first.modality, ds.pairs[0].second.modality};
    }
    validate_dataset(ds);
    return ds;
}

// Writes `<root>/<modality>/<pair_id>.png`, manifest.csv, and labels.csv when
// labels are present.
inline void save_paired_dataset(const PairedDataset& ds, const std::string& root) {
    namespace fs = std::filesystem;
    if (ds.pairs.empty()) throw InputError("save_paired_dataset: empty dataset");
    fs::create_directories(fs::path(root) / ds.modality_names[0]);
    fs::create_directories(fs::path(root) / ds.modality_names[1]);
    std::ofstream manifest((fs::path(root) / "manifest.csv").string());
    manifest << "pair_id,path_a,path_b" << (ds.labels.empty() ? "" : ",label") << "\n";
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        const auto& p = ds.pairs[i];
        const std::string rel_a = ds.modality_names[0] + "/" + p.pair_id + ".png";
        const std::string rel_b = ds.modality_names[1] + "/" + p.pair_id + ".png";
        write_image_png(p.first, (fs::path(root) / rel_a).string());
        write_image_png(p.second, (fs::path(root) / rel_b).string());
        manifest << p.pair_id << "," << rel_a << "," << rel_b;
        if (!ds.labels.empty()) manifest << "," << ds.labels[i];
        manifest << "\n";
    }
    if (!ds.labels.empty()) {
        std::ofstream labels((fs::path(root) / "labels.csv").string());
        labels << "pair_id,label\n";
        for (std::size_t i = 0; i < ds.pairs.size(); ++i)
            labels << ds.pairs[i].pair_id << "," << ds.labels[i] << "\n";
    }
}

} // namespace bimodal
