#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bimodal/classifier.hpp"
#include "bimodal/image_io.hpp"
#include "bimodal/networks.hpp"
#include "bimodal/toy.hpp"
#include "bimodal/trainer.hpp"

namespace bimodal {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Full run configuration. Everything is schema-checked before any work:
// unknown keys are rejected with their path, and the fully resolved document
// is written next to each command's outputs.
struct RunConfig {
    std::uint64_t seed = 1234;
    std::string out_dir = "runs/out";

    struct Data {
        std::string root;
        std::string manifest;
        int image_size = 32;
        Normalization normalization = Normalization::per_image;
    } data;

    ToyParams toy;

    NetConfig networks{32, 128, 32};

    TrainConfig train;
    std::string train_order = "auto"; // auto | as_listed | reversed
    int train_label_filter = -1;      // -1 none, else train only on this label
    int train_max_pairs = 0;          // 0 = all

    struct Complexity {
        int baseline_iterations = 3000;
        int n_generated = 500;
        std::uint64_t extractor_seed = 2024;
    } complexity;

    struct Eval {
        int n_groups = 10;
        int mi_bins = 32;
        std::uint64_t extractor_seed = 2024;
        int fid_layer = 3; // deepest tap
        int is_classifier_iterations = 800;
    } eval;

    ClassifierConfig classifier;
    int classifier_n_train = 500;
    int classifier_n_test = 50;

    json resolved() const {
        json j;
        j["schema_version"] = kSchemaVersion;
        j["seed"] = seed;
        j["out_dir"] = out_dir;
        j["data"] = {{"root", data.root},
                     {"manifest", data.manifest},
                     {"image_size", data.image_size},
                     {"normalization",
                      data.normalization == Normalization::per_image ? "per_image" : "per_dataset"}};
        j["toy"] = {{"n_pairs", toy.n_pairs},
                    {"image_size", toy.image_size},
                    {"texture_frequency", toy.texture_frequency},
                    {"blur_sigma", toy.blur_sigma},
                    {"class_balance", toy.class_balance}};
        j["networks"] = {{"image_size", networks.image_size},
                         {"latent_dim", networks.latent_dim},
                         {"base_channels", networks.base_channels}};
        j["train"] = {{"strategy", strategy_name(train.strategy)},
                      {"total_iterations", train.total_iterations},
                      {"batch_size", train.batch_size},
                      {"learning_rate", train.learning_rate},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"critic_steps", train.critic_steps},
                      {"lambda_gp", train.lambda_gp},
                      {"checkpoint_every", train.checkpoint_every},
                      {"encoder_prior_reg", train.encoder_prior_reg},
                      {"prior_weight", train.prior_weight},
                      {"order", train_order},
                      {"label_filter", train_label_filter},
                      {"max_pairs", train_max_pairs}};
        j["complexity"] = {{"baseline_iterations", complexity.baseline_iterations},
                           {"n_generated", complexity.n_generated},
                           {"extractor_seed", complexity.extractor_seed}};
        j["eval"] = {{"n_groups", eval.n_groups},
                     {"mi_bins", eval.mi_bins},
                     {"extractor_seed", eval.extractor_seed},
                     {"fid_layer", eval.fid_layer},
                     {"is_classifier_iterations", eval.is_classifier_iterations}};
        j["classifier"] = {{"learning_rate", classifier.learning_rate},
                           {"lr_decay_factor", classifier.lr_decay_factor},
                           {"lr_decay_every", classifier.lr_decay_every},
                           {"batch_size", classifier.batch_size},
                           {"weight_decay", classifier.weight_decay},
                           {"iterations", classifier.iterations},
                           {"momentum", classifier.momentum},
                           {"runs", classifier.runs},
                           {"channels_base", classifier.channels_base},
                           {"n_train", classifier_n_train},
                           {"n_test", classifier_n_test}};
        return j;
    }
};

namespace detail {

inline void expect_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("config: " + path + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
    }
}

template <class T>
void take(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value type at " + path + "." + key);
    }
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
    using detail::expect_keys;
    using detail::take;
    RunConfig c;
    expect_keys(j, "", {"schema_version", "seed", "out_dir", "data", "toy", "networks", "train",
                        "complexity", "eval", "classifier"});
    if (!j.contains("schema_version"))
        throw ConfigError("config: schema_version is required");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw ConfigError("config: unsupported schema_version");
    take(j, "", "seed", c.seed);
    take(j, "", "out_dir", c.out_dir);

    if (j.contains("data")) {
        const json& d = j.at("data");
        expect_keys(d, "data", {"root", "manifest", "image_size", "normalization"});
        take(d, "data", "root", c.data.root);
        take(d, "data", "manifest", c.data.manifest);
        take(d, "data", "image_size", c.data.image_size);
        std::string norm = "per_image";
        take(d, "data", "normalization", norm);
        if (norm == "per_image")
            c.data.normalization = Normalization::per_image;
        else if (norm == "per_dataset")
            c.data.normalization = Normalization::per_dataset;
        else
            throw ConfigError("config: data.normalization must be per_image or per_dataset");
    }
    if (j.contains("toy")) {
        const json& t = j.at("toy");
        expect_keys(t, "toy",
                    {"n_pairs", "image_size", "texture_frequency", "blur_sigma", "class_balance"});
        take(t, "toy", "n_pairs", c.toy.n_pairs);
        take(t, "toy", "image_size", c.toy.image_size);
        take(t, "toy", "texture_frequency", c.toy.texture_frequency);
        take(t, "toy", "blur_sigma", c.toy.blur_sigma);
        take(t, "toy", "class_balance", c.toy.class_balance);
    }
    if (j.contains("networks")) {
        const json& n = j.at("networks");
        expect_keys(n, "networks", {"image_size", "latent_dim", "base_channels"});
        take(n, "networks", "image_size", c.networks.image_size);
        take(n, "networks", "latent_dim", c.networks.latent_dim);
        take(n, "networks", "base_channels", c.networks.base_channels);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        expect_keys(t, "train",
                    {"strategy", "total_iterations", "batch_size", "learning_rate", "beta1",
                     "beta2", "critic_steps", "lambda_gp", "checkpoint_every",
                     "encoder_prior_reg", "prior_weight", "order", "label_filter", "max_pairs"});
        std::string strat = strategy_name(c.train.strategy);
        take(t, "train", "strategy", strat);
        c.train.strategy = strategy_from_name(strat);
        take(t, "train", "total_iterations", c.train.total_iterations);
        take(t, "train", "batch_size", c.train.batch_size);
        take(t, "train", "learning_rate", c.train.learning_rate);
        take(t, "train", "beta1", c.train.beta1);
        take(t, "train", "beta2", c.train.beta2);
        take(t, "train", "critic_steps", c.train.critic_steps);
        take(t, "train", "lambda_gp", c.train.lambda_gp);
        take(t, "train", "checkpoint_every", c.train.checkpoint_every);
        take(t, "train", "encoder_prior_reg", c.train.encoder_prior_reg);
        take(t, "train", "prior_weight", c.train.prior_weight);
        take(t, "train", "order", c.train_order);
        take(t, "train", "label_filter", c.train_label_filter);
        take(t, "train", "max_pairs", c.train_max_pairs);
        if (c.train_order != "auto" && c.train_order != "as_listed" && c.train_order != "reversed")
            throw ConfigError("config: train.order must be auto, as_listed or reversed");
    }
    if (j.contains("complexity")) {
        const json& x = j.at("complexity");
        expect_keys(x, "complexity", {"baseline_iterations", "n_generated", "extractor_seed"});
        take(x, "complexity", "baseline_iterations", c.complexity.baseline_iterations);
        take(x, "complexity", "n_generated", c.complexity.n_generated);
        take(x, "complexity", "extractor_seed", c.complexity.extractor_seed);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        expect_keys(e, "eval",
                    {"n_groups", "mi_bins", "extractor_seed", "fid_layer",
                     "is_classifier_iterations"});
        take(e, "eval", "n_groups", c.eval.n_groups);
        take(e, "eval", "mi_bins", c.eval.mi_bins);
        take(e, "eval", "extractor_seed", c.eval.extractor_seed);
        take(e, "eval", "fid_layer", c.eval.fid_layer);
        take(e, "eval", "is_classifier_iterations", c.eval.is_classifier_iterations);
    }
    if (j.contains("classifier")) {
        const json& k = j.at("classifier");
        expect_keys(k, "classifier",
                    {"learning_rate", "lr_decay_factor", "lr_decay_every", "batch_size",
                     "weight_decay", "iterations", "momentum", "runs", "channels_base", "n_train",
                     "n_test"});
        take(k, "classifier", "learning_rate", c.classifier.learning_rate);
        take(k, "classifier", "lr_decay_factor", c.classifier.lr_decay_factor);
        take(k, "classifier", "lr_decay_every", c.classifier.lr_decay_every);
        take(k, "classifier", "batch_size", c.classifier.batch_size);
        take(k, "classifier", "weight_decay", c.classifier.weight_decay);
        take(k, "classifier", "iterations", c.classifier.iterations);
        take(k, "classifier", "momentum", c.classifier.momentum);
        take(k, "classifier", "runs", c.classifier.runs);
        take(k, "classifier", "channels_base", c.classifier.channels_base);
        take(k, "classifier", "n_train", c.classifier_n_train);
        take(k, "classifier", "n_test", c.classifier_n_test);
    }

    // Cross-section consistency and domain validation.
    c.toy.seed = derive_seed(c.seed, "toy-data");
    c.train.seed = c.seed;
    c.classifier.seed = derive_seed(c.seed, "classifier");
    c.networks.validate();
    c.train.validate();
    c.classifier.validate();
    c.toy.validate();
    if (c.eval.n_groups < 1) throw ConfigError("config: eval.n_groups must be >= 1");
    if (c.eval.mi_bins < 2) throw ConfigError("config: eval.mi_bins must be >= 2");
    if (c.eval.fid_layer < 0 || c.eval.fid_layer >= FeatureExtractor<float>::kTaps)
        throw ConfigError("config: eval.fid_layer out of range");
    return c;
}

inline json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return j;
}

// Applies `--set section.key=value` overrides. Values parse as JSON when
// possible, otherwise as strings.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("override has an empty path segment: " + assignment);
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline void write_resolved_config(const RunConfig& c, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out((std::filesystem::path(dir) / "resolved_config.json").string());
    out << c.resolved().dump(2) << "\n";
}

} // namespace bimodal
