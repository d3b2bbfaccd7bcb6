#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "bimodal/config.hpp"
#include "bimodal/metrics.hpp"
#include "bimodal/report.hpp"
#include "bimodal/toy.hpp"
#include "bimodal/trainer.hpp"

namespace bimodal {

// ---------------------------------------------------------------------------
// Dataset helpers
// ---------------------------------------------------------------------------

inline PairedDataset filter_dataset(const PairedDataset& ds, int label_filter, int max_pairs) {
    PairedDataset out;
    out.split = ds.split;
    out.modality_names = ds.modality_names;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        if (label_filter >= 0) {
            if (ds.labels.empty()) throw InputError("label filter requested but dataset has no labels");
            if (ds.labels[i] != label_filter) continue;
        }
        out.pairs.push_back(ds.pairs[i]);
        if (!ds.labels.empty()) out.labels.push_back(ds.labels[i]);
        if (max_pairs > 0 && static_cast<int>(out.pairs.size()) >= max_pairs) break;
    }
    return out;
}

inline PairedDataset swap_modalities(const PairedDataset& ds) {
    PairedDataset out;
    out.split = ds.split;
    out.modality_names = {ds.modality_names[1], ds.modality_names[0]};
    out.labels = ds.labels;
    for (const auto& p : ds.pairs) {
        ImagePair q;
        q.pair_id = p.pair_id;
        q.first = p.second;
        q.second = p.first;
        out.pairs.push_back(std::move(q));
    }
    return out;
}

inline std::vector<const Image*> modality_images(const PairedDataset& ds, int which) {
    std::vector<const Image*> out;
    for (const auto& p : ds.pairs) out.push_back(which == 0 ? &p.first : &p.second);
    return out;
}

inline std::vector<const ImagePair*> pair_ptrs(const std::vector<ImagePair>& pairs) {
    std::vector<const ImagePair*> out;
    for (const auto& p : pairs) out.push_back(&p);
    return out;
}

inline std::vector<const ImagePair*> pair_ptrs(const PairedDataset& ds) {
    std::vector<const ImagePair*> out;
    for (const auto& p : ds.pairs) out.push_back(&p);
    return out;
}

// ---------------------------------------------------------------------------
// Complexity measurement: train the parallel baseline, synthesize N per
// modality, score Eq. 1 against the real sets, decide the order.
// ---------------------------------------------------------------------------

struct ComplexityDecision {
    ComplexityScore first;   // score of the dataset's first-listed modality
    ComplexityScore second;  // score of the second-listed modality
    std::pair<std::string, std::string> order;
    bool tie = false;
};

template <class T>
ComplexityDecision measure_complexity(const PairedDataset& real, const RunConfig& cfg,
                                      std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.strategy = Strategy::unsupervised;
    tc.total_iterations = cfg.complexity.baseline_iterations;
    tc.seed = seed;
    ParallelTrainer<T> trainer(cfg.networks, tc, real.modality_names);
    std::vector<Image> ra, rb;
    for (const auto& p : real.pairs) {
        ra.push_back(p.first);
        rb.push_back(p.second);
    }
    trainer.train(ra, rb);
    auto [syn_a, syn_b] = trainer.synthesize(cfg.complexity.n_generated, derive_seed(seed, "cmx-syn"));

    FeatureExtractor<T> ex;
    ex.configure(cfg.networks.image_size, 1, derive_seed(cfg.complexity.extractor_seed, "1ch"));
    auto ptrs = [](const std::vector<Image>& v) {
        std::vector<const Image*> out;
        for (const auto& im : v) out.push_back(&im);
        return out;
    };
    ComplexityDecision d;
    d.first = synthesis_complexity(ex, ptrs(syn_a), modality_images(real, 0));
    d.second = synthesis_complexity(ex, ptrs(syn_b), modality_images(real, 1));
    d.order = decide_order(d.first, d.second, &d.tie);
    return d;
}

// ---------------------------------------------------------------------------
// Metric evaluation of a synthetic set against a real reference set:
// IS per modality (label model trained on the real set), FID per modality,
// joint-FID, MID, all grouped per the 10-group protocol.
// ---------------------------------------------------------------------------

// `real` is the reference distribution for FID/joint-FID/MID. The IS label
// model is a fixed classifier trained on `label_source` (a labeled real set;
// defaults to `real`); IS rows are omitted when no labels are available.
template <class T>
MetricReport evaluate_synthetic(const std::vector<ImagePair>& syn, const PairedDataset& real,
                                const RunConfig& cfg, const std::string& run_name,
                                const PairedDataset* label_source = nullptr) {
    if (syn.size() < 2 || real.size() < 2)
        throw InputError("evaluate: need at least 2 synthetic and 2 real pairs");
    const int image_size = real.pairs[0].first.h;
    MetricReport rep;
    rep.name = run_name;

    FeatureExtractor<T> ex1, ex2;
    ex1.configure(image_size, 1, derive_seed(cfg.eval.extractor_seed, "1ch"));
    ex2.configure(image_size, 2, derive_seed(cfg.eval.extractor_seed, "2ch"));
    const int layer = cfg.eval.fid_layer;
    const int groups = cfg.eval.n_groups;

    auto syn_ptrs = pair_ptrs(syn);
    auto real_ptrs = pair_ptrs(real);

    // Label models for IS (only when the label source carries both classes).
    const PairedDataset& lsrc = label_source ? *label_source : real;
    ClassifierNet<T> label_model[2];
    bool have_is = !lsrc.labels.empty();
    if (have_is) {
        bool has0 = false, has1 = false;
        for (int v : lsrc.labels) (v ? has1 : has0) = true;
        have_is = has0 && has1;
    }
    if (have_is) {
        if (lsrc.modality_names != real.modality_names)
            throw InputError("evaluate: label source modalities differ from the reference set");
        ClassifierConfig cc = cfg.classifier;
        cc.iterations = cfg.eval.is_classifier_iterations;
        for (int m = 0; m < 2; ++m) {
            cc.seed = derive_seed(cfg.seed, "is-model", static_cast<std::uint64_t>(m));
            label_model[m] = train_label_model<T>(cc, modality_images(lsrc, m), lsrc.labels);
        }
    }

    for (int m = 0; m < 2; ++m) {
        const std::string& mod = real.modality_names[m];
        std::vector<const Image*> real_imgs = modality_images(real, m);
        std::vector<const Image*> syn_imgs;
        for (const auto* p : syn_ptrs) syn_imgs.push_back(m == 0 ? &p->first : &p->second);

        std::function<double(const std::vector<const Image*>&)> fid_fn =
            [&](const std::vector<const Image*>& group) { return fid(group, real_imgs, ex1, layer); };
        rep.rows.push_back({"fid", mod, grouped_evaluation(syn_imgs, fid_fn, "fid", groups)});

        if (have_is) {
            std::function<double(const std::vector<const Image*>&)> is_fn =
                [&](const std::vector<const Image*>& group) {
                    return inception_score(label_conditionals(label_model[m], group));
                };
            rep.rows.push_back({"is", mod, grouped_evaluation(syn_imgs, is_fn, "is", groups)});
        }
    }

    std::function<double(const std::vector<const ImagePair*>&)> jfid_fn =
        [&](const std::vector<const ImagePair*>& group) {
            return joint_fid(group, real_ptrs, ex2, layer);
        };
    rep.rows.push_back({"joint_fid", "", grouped_evaluation(syn_ptrs, jfid_fn, "joint_fid", groups)});

    const double real_mi = mean_pair_mi(real_ptrs, cfg.eval.mi_bins);
    std::function<double(const std::vector<const ImagePair*>&)> mid_fn =
        [&](const std::vector<const ImagePair*>& group) {
            return std::abs(mean_pair_mi(group, cfg.eval.mi_bins) - real_mi);
        };
    rep.rows.push_back({"mid", "", grouped_evaluation(syn_ptrs, mid_fn, "mid", groups)});
    return rep;
}

// ---------------------------------------------------------------------------
// Classifier protocol wiring. Splits a labeled real dataset into disjoint
// front/back slices: synthesizer/classifier training takes positives and
// negatives from the front, held-out test positives/negatives come from the
// back.
// ---------------------------------------------------------------------------

struct ProtocolData {
    std::vector<ImagePair> train_positives; // also the synthesizer training set
    std::vector<ImagePair> train_negatives;
    std::vector<LabeledPair> test_set;
};

inline ProtocolData split_protocol_data(const PairedDataset& real, int n_train, int n_test) {
    if (real.labels.empty()) throw InputError("protocol: real dataset must carry labels");
    std::vector<const ImagePair*> pos, neg;
    for (std::size_t i = 0; i < real.pairs.size(); ++i)
        (real.labels[i] ? pos : neg).push_back(&real.pairs[i]);
    if (static_cast<int>(pos.size()) < n_train + n_test ||
        static_cast<int>(neg.size()) < n_train + n_test)
        throw InputError("protocol: need " + std::to_string(n_train + n_test) +
                         " pairs per class, have " + std::to_string(pos.size()) + "/" +
                         std::to_string(neg.size()));
    ProtocolData d;
    for (int i = 0; i < n_train; ++i) {
        d.train_positives.push_back(*pos[i]);
        d.train_negatives.push_back(*neg[i]);
    }
    for (int i = 0; i < n_test; ++i) {
        d.test_set.push_back({*pos[pos.size() - 1 - i], 1});
        d.test_set.push_back({*neg[neg.size() - 1 - i], 0});
    }
    return d;
}

// ---------------------------------------------------------------------------
// Train command body: order decision, unpaired view, full run with resume.
// ---------------------------------------------------------------------------

struct TrainOutcome {
    std::array<std::string, 2> order;
    std::string checkpoint_path;
    bool resumed = false;
    bool already_complete = false;
};

template <class T>
TrainOutcome run_training(const RunConfig& cfg, const PairedDataset& dataset_in,
                          const std::string& out_dir,
                          typename Trainer<T>::Observer observer = nullptr) {
    namespace fs = std::filesystem;
    PairedDataset ds = filter_dataset(dataset_in, cfg.train_label_filter, cfg.train_max_pairs);
    if (ds.pairs.empty()) throw InputError("train: no pairs left after filtering");

    if (cfg.train_order == "reversed") {
        ds = swap_modalities(ds);
    } else if (cfg.train_order == "auto") {
        ComplexityDecision d = measure_complexity<T>(ds, cfg, derive_seed(cfg.seed, "order"));
        fs::create_directories(out_dir);
        std::ofstream rep((fs::path(out_dir) / "complexity_report.txt").string());
        rep << d.first.to_report() << "\n" << d.second.to_report() << "\n";
        rep << "order: " << d.order.first << " -> " << d.order.second << "\n";
        if (d.tie) rep << "warning: exact complexity tie, broke lexicographically\n";
        if (d.order.first == ds.modality_names[1]) ds = swap_modalities(ds);
    }

    PairedDataset unpaired;
    if (cfg.train.strategy != Strategy::supervised)
        unpaired = make_unpaired_view(ds, derive_seed(cfg.seed, "unpair"));

    Trainer<T> trainer(cfg.networks, cfg.train, ds.modality_names);
    trainer.observer = std::move(observer);
    fs::create_directories(out_dir);

    TrainOutcome out;
    out.order = ds.modality_names;
    out.checkpoint_path = (fs::path(out_dir) / "checkpoint_final.bmck").string();

    if (fs::exists(out.checkpoint_path)) {
        const std::int64_t it = trainer.load_checkpoint(out.checkpoint_path);
        if (it >= cfg.train.total_iterations - 1) {
            out.already_complete = true;
            return out;
        }
        out.resumed = true;
    } else {
        // resume from the newest intermediate checkpoint, if any
        std::string latest;
        std::int64_t best = -1;
        if (fs::exists(out_dir))
            for (const auto& e : fs::directory_iterator(out_dir)) {
                const std::string name = e.path().filename().string();
                if (name.rfind("checkpoint_", 0) == 0 && name.find(".bmck") != std::string::npos &&
                    name != "checkpoint_final.bmck") {
                    const std::int64_t it = std::atoll(name.substr(11, 8).c_str());
                    if (it > best) {
                        best = it;
                        latest = e.path().string();
                    }
                }
            }
        if (!latest.empty()) {
            trainer.load_checkpoint(latest);
            out.resumed = true;
        }
    }

    trainer.train(ds, unpaired, out_dir);
    trainer.log().save_csv((fs::path(out_dir) / "train_log.csv").string());
    return out;
}

// Rebuild a trainer able to load `checkpoint` (order parsed from its header).
template <class T>
Trainer<T> trainer_for_checkpoint(const RunConfig& cfg, const std::string& checkpoint) {
    const auto bytes = read_file_bytes(checkpoint);
    BinReader r{bytes.data(), bytes.data() + bytes.size()};
    const CkptHeader h = ckpt_read_header(r, "", sizeof(T));
    const auto pos = h.descriptor.find("order=");
    if (pos == std::string::npos)
        throw DescriptorMismatch("checkpoint is not a sequential-generator checkpoint: " +
                                 h.descriptor);
    const std::string tail = h.descriptor.substr(pos + 6);
    const auto arrow = tail.find("->");
    if (arrow == std::string::npos)
        throw DescriptorMismatch("malformed order in descriptor: " + h.descriptor);
    std::array<std::string, 2> order{tail.substr(0, arrow), tail.substr(arrow + 2)};
    Trainer<T> trainer(cfg.networks, cfg.train, order);
    trainer.load_checkpoint(checkpoint);
    return trainer;
}

} // namespace bimodal
