#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "bimodal/config.hpp"
#include "bimodal/report.hpp"

using namespace bimodal;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BIMODAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("bimodal_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream(p.string()) << j.dump(2);
}

json tiny_config(const fs::path& out) {
    json j;
    j["schema_version"] = 1;
    j["seed"] = 9;
    j["out_dir"] = out.string();
    j["toy"] = {{"n_pairs", 30}, {"image_size", 32}, {"texture_frequency", 6.0},
                {"blur_sigma", 1.5}, {"class_balance", 0.5}};
    j["networks"] = {{"image_size", 32}, {"latent_dim", 16}, {"base_channels", 16}};
    j["train"] = {{"strategy", "semi_supervised"}, {"total_iterations", 4}, {"batch_size", 4},
                  {"critic_steps", 2}, {"order", "as_listed"}, {"checkpoint_every", 100}};
    j["eval"] = {{"n_groups", 10}, {"is_classifier_iterations", 60}};
    j["classifier"] = {{"iterations", 30}, {"runs", 2}, {"channels_base", 4}, {"n_train", 5},
                       {"n_test", 3}, {"batch_size", 8}};
    return j;
}

} // namespace

TEST_CASE("config schema: unknown keys and bad values are rejected with paths") {
    json j = tiny_config("/tmp/x");
    REQUIRE_NOTHROW(parse_config(j));

    json bad = j;
    bad["trian"] = json::object();
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("trian") != std::string::npos);
    }

    bad = j;
    bad["train"]["typo_key"] = 1;
    try {
        parse_config(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("train.typo_key") != std::string::npos);
    }

    bad = j;
    bad["train"]["strategy"] = "sorta_supervised";
    REQUIRE_THROWS_AS(parse_config(bad), ConfigError);

    bad = j;
    bad["networks"]["image_size"] = 48;
    REQUIRE_THROWS_AS(parse_config(bad), ConfigError);

    bad = j;
    bad.erase("schema_version");
    REQUIRE_THROWS_AS(parse_config(bad), ConfigError);

    bad = j;
    bad["schema_version"] = 99;
    REQUIRE_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("config overrides follow dotted paths and JSON literals") {
    json j = tiny_config("/tmp/x");
    apply_override(j, "train.total_iterations=12");
    apply_override(j, "data.root=/some/где");
    apply_override(j, "train.encoder_prior_reg=true");
    RunConfig c = parse_config(j);
    REQUIRE(c.train.total_iterations == 12);
    REQUIRE(c.data.root == "/some/где");
    REQUIRE(c.train.encoder_prior_reg);
    REQUIRE_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("resolved config round-trips through the parser") {
    RunConfig c = parse_config(tiny_config("/tmp/rt"));
    json r = c.resolved();
    RunConfig c2 = parse_config(r);
    REQUIRE(c2.train.total_iterations == c.train.total_iterations);
    REQUIRE(c2.toy.n_pairs == c.toy.n_pairs);
    REQUIRE(c2.seed == c.seed);
}

TEST_CASE("metric report save/load round trip") {
    MetricReport rep;
    rep.name = "demo";
    rep.rows.push_back({"fid", "smooth", grouped_stats({1.0, 2.0, 3.0}, "fid")});
    rep.rows.push_back({"mid", "", grouped_stats({0.1, 0.2}, "mid")});
    const auto dir = fresh_dir("report");
    const std::string csv = (dir / "demo_metrics.csv").string();
    save_metric_report(rep, csv);
    MetricReport back = load_metric_report(csv, "demo");
    REQUIRE(back.rows.size() == 2);
    REQUIRE(back.find("fid", "smooth") != nullptr);
    REQUIRE(std::abs(back.find("fid", "smooth")->score.mean - 2.0) < 1e-9);
    REQUIRE(back.find("mid", "")->score.group_values.size() == 2);
    const std::string table = render_report_table({back});
    REQUIRE(table.find("fid(smooth)") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli: full tiny pipeline produces datasets, checkpoints, metrics, plots") {
    const auto root = fresh_dir("pipeline");
    const auto data_dir = root / "data";
    const auto run_dir = root / "run";
    const auto syn_dir = root / "syn";
    const auto eval_dir = root / "eval";

    json j = tiny_config(data_dir);
    const auto cfg_path = root / "config.json";
    write_json(cfg_path, j);

    REQUIRE(run_cli("--config " + cfg_path.string() + " gen-toy-data") == 0);
    REQUIRE(fs::exists(data_dir / "manifest.csv"));
    REQUIRE(fs::exists(data_dir / "labels.csv"));
    REQUIRE(fs::exists(data_dir / "resolved_config.json"));

    // deterministic regeneration is bitwise identical
    const auto data_dir2 = root / "data2";
    json j2 = j;
    j2["out_dir"] = data_dir2.string();
    write_json(root / "config2.json", j2);
    REQUIRE(run_cli("--config " + (root / "config2.json").string() + " gen-toy-data") == 0);
    REQUIRE(read_file_bytes((data_dir / "smooth" / "toy_000000.png").string()) ==
            read_file_bytes((data_dir2 / "smooth" / "toy_000000.png").string()));

    const std::string data_args = " --set data.root=" + data_dir.string() +
                                  " --set data.manifest=" + (data_dir / "manifest.csv").string() +
                                  " --set data.image_size=32";

    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + run_dir.string() + " train") == 0);
    REQUIRE(fs::exists(run_dir / "checkpoint_final.bmck"));
    REQUIRE(fs::exists(run_dir / "train_log.csv"));

    // rerun is a no-op resume
    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + run_dir.string() + " train") == 0);

    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + syn_dir.string() + " synthesize --checkpoint " +
                    (run_dir / "checkpoint_final.bmck").string() + " --n 20 --seed 4") == 0);
    REQUIRE(fs::exists(syn_dir / "manifest.csv"));

    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + eval_dir.string() + " evaluate --syn-dir " +
                    syn_dir.string() + " --name tiny") == 0);
    REQUIRE(fs::exists(eval_dir / "tiny_metrics.csv"));
    MetricReport rep = load_metric_report((eval_dir / "tiny_metrics.csv").string(), "tiny");
    REQUIRE(rep.find("fid", "smooth") != nullptr);
    REQUIRE(rep.find("joint_fid", "") != nullptr);
    REQUIRE(rep.find("mid", "") != nullptr);
    REQUIRE(rep.find("is", "smooth") != nullptr);

    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + (root / "clf").string() + " train-classifier --syn-dir " +
                    syn_dir.string() + " --name tinyclf") == 0);
    REQUIRE(fs::exists(root / "clf" / "tinyclf_accuracy.csv"));

    REQUIRE(run_cli("--config " + cfg_path.string() + " --set out_dir=" + (root / "cmp").string() +
                    " report " + (eval_dir / "tiny_metrics.csv").string() + " " +
                    (root / "clf" / "tinyclf_accuracy.csv").string()) == 0);
    REQUIRE(fs::exists(root / "cmp" / "comparison.txt"));
    REQUIRE(fs::exists(root / "cmp" / "fid_smooth.png"));

    fs::remove_all(root);
}

TEST_CASE("cli: exit codes for schema, input, and descriptor errors") {
    const auto root = fresh_dir("exitcodes");
    const auto cfg_path = root / "config.json";
    json j = tiny_config(root / "out");
    write_json(cfg_path, j);

    SECTION("unknown config key gives exit 2 and writes nothing") {
        json bad = j;
        bad["not_a_section"] = 1;
        write_json(root / "bad.json", bad);
        REQUIRE(run_cli("--config " + (root / "bad.json").string() + " gen-toy-data") == 2);
        REQUIRE_FALSE(fs::exists(root / "out" / "manifest.csv"));
    }

    SECTION("missing dataset gives exit 3") {
        REQUIRE(run_cli("--config " + cfg_path.string() +
                        " --set data.root=/nonexistent --set data.manifest=/nonexistent/m.csv"
                        " train") == 3);
    }

    SECTION("garbage checkpoint gives exit 3, wrong-architecture checkpoint gives exit 5") {
        std::ofstream((root / "junk.bmck").string()) << "junk";
        REQUIRE(run_cli("--config " + cfg_path.string() + " synthesize --checkpoint " +
                        (root / "junk.bmck").string() + " --n 2") == 3);
    }

    SECTION("unsupported device gives exit 2") {
        const std::string cmd = "BIMODAL_DEVICE=cuda " + std::string(BIMODAL_CLI_PATH) +
                                " --config " + cfg_path.string() + " gen-toy-data >/dev/null 2>&1";
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 2);
    }
    fs::remove_all(root);
}

TEST_CASE("cli: checkpoint from one architecture refuses to synthesize under another") {
    const auto root = fresh_dir("descmismatch");
    const auto data_dir = root / "data";
    const auto run_dir = root / "run";
    json j = tiny_config(data_dir);
    j["train"]["total_iterations"] = 1;
    j["train"]["strategy"] = "supervised";
    const auto cfg_path = root / "config.json";
    write_json(cfg_path, j);
    REQUIRE(run_cli("--config " + cfg_path.string() + " gen-toy-data") == 0);
    const std::string data_args = " --set data.root=" + data_dir.string() +
                                  " --set data.manifest=" + (data_dir / "manifest.csv").string();
    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set out_dir=" + run_dir.string() + " train") == 0);
    REQUIRE(run_cli("--config " + cfg_path.string() + data_args +
                    " --set networks.base_channels=24 --set out_dir=" + (root / "s").string() +
                    " synthesize --checkpoint " + (run_dir / "checkpoint_final.bmck").string() +
                    " --n 2") == 5);
    fs::remove_all(root);
}
