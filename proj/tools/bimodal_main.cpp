// Command-line pipeline: toy data generation, complexity measurement,
// training, synthesis, evaluation, the classifier protocol, and report/plot
// emission. Exit codes: 0 ok, 2 config/schema, 3 missing or corrupt input,
// 4 numerical failure, 5 checkpoint descriptor mismatch.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bimodal/bimodal.hpp"

namespace fs = std::filesystem;
using namespace bimodal;

namespace {

RunConfig load_run_config(const std::string& config_path, const std::vector<std::string>& sets) {
    json j = config_path.empty() ? json{{"schema_version", kSchemaVersion}}
                                 : load_config_json(config_path);
    for (const auto& s : sets) apply_override(j, s);
    return parse_config(j);
}

void check_device() {
    const char* dev = std::getenv("BIMODAL_DEVICE");
    if (dev && std::string(dev) != "cpu")
        throw ConfigError(std::string("BIMODAL_DEVICE=") + dev +
                          " is not supported; this build runs on cpu only");
}

PairedDataset load_data(const RunConfig& cfg) {
    if (cfg.data.root.empty() || cfg.data.manifest.empty())
        throw ConfigError("config: data.root and data.manifest are required for this command");
    return load_paired_dataset(cfg.data.root, cfg.data.manifest, cfg.data.image_size,
                               cfg.data.normalization);
}

int cmd_gen_toy_data(const RunConfig& cfg) {
    PairedDataset ds = generate_toy_bimodal(cfg.toy);
    fs::create_directories(cfg.out_dir);
    save_paired_dataset(ds, cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << "wrote " << ds.size() << " pairs to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_measure_complexity(const RunConfig& cfg) {
    PairedDataset ds = filter_dataset(load_data(cfg), cfg.train_label_filter, cfg.train_max_pairs);
    ComplexityDecision d = measure_complexity<float>(ds, cfg, derive_seed(cfg.seed, "order"));
    fs::create_directories(cfg.out_dir);
    std::ofstream rep((fs::path(cfg.out_dir) / "complexity_report.txt").string());
    rep << d.first.to_report() << "\n" << d.second.to_report() << "\n";
    rep << "order: " << d.order.first << " -> " << d.order.second << "\n";
    if (d.tie) {
        rep << "warning: exact complexity tie, broke lexicographically\n";
        std::cerr << "warning: exact complexity tie, broke lexicographically\n";
    }
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << "C(" << d.first.modality << ") = " << d.first.total << "\n";
    std::cout << "C(" << d.second.modality << ") = " << d.second.total << "\n";
    std::cout << "order: " << d.order.first << " -> " << d.order.second << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    PairedDataset ds = load_data(cfg);
    write_resolved_config(cfg, cfg.out_dir);
    TrainOutcome out = run_training<float>(cfg, ds, cfg.out_dir);
    if (out.already_complete)
        std::cout << "training already complete at " << out.checkpoint_path << "\n";
    else
        std::cout << (out.resumed ? "resumed and finished: " : "trained: ") << out.checkpoint_path
                  << " (order " << out.order[0] << " -> " << out.order[1] << ")\n";
    return 0;
}

int cmd_synthesize(const RunConfig& cfg, const std::string& checkpoint, int n, std::uint64_t seed) {
    Trainer<float> trainer = trainer_for_checkpoint<float>(cfg, checkpoint);
    auto pairs = trainer.synthesize(n, seed);
    PairedDataset ds;
    ds.modality_names = trainer.modalities();
    ds.pairs = std::move(pairs);
    fs::create_directories(cfg.out_dir);
    save_paired_dataset(ds, cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << "wrote " << ds.size() << " synthetic pairs to " << cfg.out_dir << "\n";
    return 0;
}

// Aligns a synthetic set's modality order to the real set's (synthesis order
// may differ from the dataset listing order).
PairedDataset align_to(const PairedDataset& syn, const PairedDataset& real) {
    if (syn.modality_names == real.modality_names) return syn;
    if (syn.modality_names[0] == real.modality_names[1] &&
        syn.modality_names[1] == real.modality_names[0])
        return swap_modalities(syn);
    throw InputError("synthetic and real datasets have different modalities");
}

int cmd_evaluate(const RunConfig& cfg, const std::string& syn_dir, const std::string& name) {
    PairedDataset real = load_data(cfg);
    PairedDataset syn = load_paired_dataset(
        syn_dir, (fs::path(syn_dir) / "manifest.csv").string(), cfg.data.image_size);
    syn = align_to(syn, real);
    MetricReport rep = evaluate_synthetic<float>(syn.pairs, real, cfg, name);
    fs::create_directories(cfg.out_dir);
    const std::string csv = (fs::path(cfg.out_dir) / (name + "_metrics.csv")).string();
    save_metric_report(rep, csv);
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << render_report_table({rep});
    std::cout << "wrote " << csv << "\n";
    return 0;
}

int cmd_train_classifier(const RunConfig& cfg, const std::string& syn_dir, const std::string& name) {
    PairedDataset real = load_data(cfg);
    ProtocolData proto = split_protocol_data(real, cfg.classifier_n_train, cfg.classifier_n_test);

    std::vector<ImagePair> positives;
    if (syn_dir.empty()) {
        positives = proto.train_positives; // real-data baseline
    } else {
        PairedDataset syn = load_paired_dataset(
            syn_dir, (fs::path(syn_dir) / "manifest.csv").string(), cfg.data.image_size);
        syn = align_to(syn, real);
        if (static_cast<int>(syn.size()) < cfg.classifier_n_train)
            throw InputError("train-classifier: synthetic set smaller than classifier.n_train");
        positives.assign(syn.pairs.begin(), syn.pairs.begin() + cfg.classifier_n_train);
    }

    std::vector<double> accs;
    GroupedScore score =
        run_protocol<float>(cfg.classifier, positives, proto.train_negatives, proto.test_set, &accs);
    fs::create_directories(cfg.out_dir);
    MetricReport rep;
    rep.name = name;
    rep.rows.push_back({"classification_accuracy", "", score});
    const std::string csv = (fs::path(cfg.out_dir) / (name + "_accuracy.csv")).string();
    save_metric_report(rep, csv);
    write_resolved_config(cfg, cfg.out_dir);
    std::cout << "accuracy " << score.mean << " +- " << score.std << " over " << cfg.classifier.runs
              << " runs; wrote " << csv << "\n";
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& csvs) {
    std::vector<MetricReport> reports;
    for (const auto& path : csvs) {
        std::string name = fs::path(path).stem().string();
        for (const std::string suffix : {"_metrics", "_accuracy"}) {
            const auto pos = name.rfind(suffix);
            if (pos != std::string::npos && pos + suffix.size() == name.size())
                name = name.substr(0, pos);
        }
        reports.push_back(load_metric_report(path, name));
    }
    fs::create_directories(cfg.out_dir);
    const std::string table = render_report_table(reports);
    std::ofstream((fs::path(cfg.out_dir) / "comparison.txt").string()) << table;
    std::cout << table;

    std::vector<std::pair<std::string, std::string>> keys;
    for (const auto& rep : reports)
        for (const auto& r : rep.rows) {
            const auto key = std::make_pair(r.metric, r.modality);
            bool seen = false;
            for (const auto& k : keys) seen = seen || k == key;
            if (!seen) keys.push_back(key);
        }
    for (const auto& [metric, modality] : keys) {
        const std::string fname =
            metric + (modality.empty() ? "" : "_" + modality) + ".png";
        plot_metric_bars(reports, metric, modality, (fs::path(cfg.out_dir) / fname).string());
    }
    std::cout << "wrote comparison table and " << keys.size() << " plots to " << cfg.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bimodal: sequential semi-supervised bi-modality image synthesis"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--set", sets, "override config values, e.g. --set train.seed=7");

    auto* gen = app.add_subcommand("gen-toy-data", "generate the procedural toy dataset");
    auto* cmx = app.add_subcommand("measure-complexity",
                                   "train the parallel baseline and decide the synthesis order");
    auto* train = app.add_subcommand("train", "train the sequential synthesizer");
    auto* synth = app.add_subcommand("synthesize", "sample image pairs from a checkpoint");
    auto* eval = app.add_subcommand("evaluate", "compute IS/FID/joint-FID/MID for a synthetic set");
    auto* clf = app.add_subcommand("train-classifier", "run the downstream classification protocol");
    auto* rpt = app.add_subcommand("report", "comparison tables and bar charts from metric CSVs");

    std::string checkpoint, syn_dir, run_name = "run";
    int n_synth = 500;
    std::uint64_t synth_seed = 1;
    std::vector<std::string> csvs;
    synth->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    synth->add_option("--n", n_synth, "number of pairs");
    synth->add_option("--seed", synth_seed, "sampling seed");
    eval->add_option("--syn-dir", syn_dir, "synthetic dataset directory")->required();
    eval->add_option("--name", run_name, "label for the report");
    clf->add_option("--syn-dir", syn_dir,
                    "synthetic positives directory (omit for the real-data baseline)");
    clf->add_option("--name", run_name, "label for the report");
    rpt->add_option("csvs", csvs, "metric CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        check_device();
        RunConfig cfg = load_run_config(config_path, sets);
        if (gen->parsed()) return cmd_gen_toy_data(cfg);
        if (cmx->parsed()) return cmd_measure_complexity(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (synth->parsed()) return cmd_synthesize(cfg, checkpoint, n_synth, synth_seed);
        if (eval->parsed()) return cmd_evaluate(cfg, syn_dir, run_name);
        if (clf->parsed()) return cmd_train_classifier(cfg, syn_dir, run_name);
        if (rpt->parsed()) return cmd_report(cfg, csvs);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DescriptorMismatch& e) {
        std::cerr << "descriptor mismatch: " << e.what() << "\n";
        return 5;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
