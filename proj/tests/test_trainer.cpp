#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "bimodal/hashing.hpp"
#include "bimodal/pipeline.hpp"
#include "bimodal/toy.hpp"
#include "bimodal/trainer.hpp"
#include "test_support.hpp"

using namespace bimodal;
using namespace bimodal::testutil;
namespace fs = std::filesystem;

namespace {
NetConfig net_cfg() {
    NetConfig c;
    c.image_size = 32;
    c.latent_dim = 16;
    c.base_channels = 16;
    return c;
}

TrainConfig train_cfg(int iters, Strategy s = Strategy::semi_supervised) {
    TrainConfig c;
    c.strategy = s;
    c.total_iterations = iters;
    c.batch_size = 4;
    c.critic_steps = 2;
    c.checkpoint_every = 1000;
    c.seed = 11;
    return c;
}

PairedDataset toy_set(int n, std::uint64_t seed) {
    ToyParams p;
    p.n_pairs = n;
    p.image_size = 32;
    p.seed = seed;
    return generate_toy_bimodal(p);
}
} // namespace

TEST_CASE("semi-supervised schedule alternates sup and unsup phases exactly") {
    auto ds = toy_set(12, 1);
    auto un = make_unpaired_view(ds, 2);
    Trainer<float> tr(net_cfg(), train_cfg(5), ds.modality_names);
    tr.train(ds, un);
    const auto& recs = tr.log().records;
    // per cycle: sup, k x unsup-critic, unsup-gen
    const int k = 2, per = 1 + k + 1;
    REQUIRE(recs.size() == static_cast<std::size_t>(5 * per));
    for (int it = 0; it < 5; ++it) {
        REQUIRE(recs[it * per].phase == "sup");
        for (int s = 0; s < k; ++s) REQUIRE(recs[it * per + 1 + s].phase == "unsup-critic");
        REQUIRE(recs[it * per + k + 1].phase == "unsup-gen");
        for (int j = 0; j < per; ++j) REQUIRE(recs[it * per + j].iteration == it);
    }
}

TEST_CASE("supervised-only and unsupervised-only strategies run only their phase") {
    auto ds = toy_set(12, 3);
    auto un = make_unpaired_view(ds, 4);
    {
        Trainer<float> tr(net_cfg(), train_cfg(3, Strategy::supervised), ds.modality_names);
        tr.train(ds, PairedDataset{});
        for (const auto& r : tr.log().records) REQUIRE(r.phase == "sup");
        REQUIRE(tr.log().records.size() == 3);
    }
    {
        Trainer<float> tr(net_cfg(), train_cfg(3, Strategy::unsupervised), ds.modality_names);
        tr.train(PairedDataset{}, un);
        for (const auto& r : tr.log().records) REQUIRE(r.phase != "sup");
        REQUIRE(tr.log().records.size() == 3 * 3);
    }
    {
        Trainer<float> tr(net_cfg(), train_cfg(3, Strategy::supervised), ds.modality_names);
        REQUIRE_THROWS_AS(tr.train(PairedDataset{}, un), InputError);
    }
}

TEST_CASE("phase parameter partition: sup never touches critics, unsup never touches encoder") {
    auto ds = toy_set(12, 5);
    auto un = make_unpaired_view(ds, 6);
    Trainer<float> tr(net_cfg(), train_cfg(4), ds.modality_names);

    IndexStream ps(ds.size(), 11, "paired");
    IndexStream u1(un.size(), 11, "unpaired1");
    IndexStream u2(un.size(), 11, "unpaired2");

    const std::uint64_t critic_hash_before = hash_params(tr.critics());
    auto [i1, i2] = tr.gather_pair_batch(ds, ps, 0);
    tr.supervised_step(i1, i2);
    REQUIRE(hash_params(tr.critics()) == critic_hash_before);

    const std::uint64_t enc_hash_before = hash_params(tr.generator().encoder);
    const std::uint64_t shared_before = hash_params(tr.generator().shared);
    tr.unsupervised_cycle(0, un, u1, u2, nullptr);
    REQUIRE(hash_params(tr.generator().encoder) == enc_hash_before);
    REQUIRE(hash_params(tr.generator().shared) != shared_before);
}

TEST_CASE("zero learning rate leaves every parameter bitwise unchanged") {
    // TrainConfig validation requires learning_rate > 0, so the degenerate
    // step contract lives at the optimizer level.
    GeneratorParams<float> g, grads;
    g.configure(net_cfg());
    grads.configure(net_cfg());
    init_generator(g, 7);
    Rng rng(8);
    visit_params(grads, "", [&](const std::string&, auto& v) {
        for (auto& x : v) x = static_cast<float>(rng.normal());
    });
    Adam<float, GeneratorParams<float>> opt(g, 0.0f, 0.5f, 0.9f);
    const std::uint64_t g0 = hash_params(g);
    opt.step(g, grads);
    opt.step(g, grads);
    REQUIRE(hash_params(g) == g0);

    // and a config with zero learning rate is rejected outright
    TrainConfig bad = train_cfg(1);
    bad.learning_rate = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("supervised overfit smoke: loss after 200 steps on a fixed batch decreases") {
    auto ds = toy_set(4, 9);
    TrainConfig cfg = train_cfg(1, Strategy::supervised);
    cfg.batch_size = 4;
    cfg.learning_rate = 2e-4;
    Trainer<float> tr(net_cfg(), cfg, ds.modality_names);
    IndexStream ps(ds.size(), cfg.seed, "paired");
    auto [i1, i2] = tr.gather_pair_batch(ds, ps, 0);
    const double first = tr.supervised_step(i1, i2).value;
    double last = first;
    for (int s = 0; s < 200; ++s) last = tr.supervised_step(i1, i2).value;
    REQUIRE(last < first);
}

TEST_CASE("critic updates increase the W estimate on fixed batches (optimization direction)") {
    auto ds = toy_set(16, 13);
    TrainConfig cfg = train_cfg(1);
    cfg.learning_rate = 5e-4;
    Trainer<float> tr(net_cfg(), cfg, ds.modality_names);
    IndexStream ps(ds.size(), cfg.seed, "paired");

    int improved = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        Tensor<float> real = tr.gather_batch(ds, ps, static_cast<std::uint64_t>(t), false);
        auto [f1, f2] = tr.make_fakes("w-test", static_cast<std::uint64_t>(t), cfg.batch_size);
        auto u = draw_interpolation_coeffs<float>(cfg.batch_size, derive_seed(99, "u", t));
        auto before = critic_objective_with_grads(tr.critics().d1, real, f1, float(cfg.lambda_gp),
                                                  u, nullptr);
        tr.critic_update(0, real, f1, u);
        auto after = critic_objective_with_grads(tr.critics().d1, real, f1, float(cfg.lambda_gp),
                                                 u, nullptr);
        if (after.component("w_estimate") >= before.component("w_estimate")) ++improved;
    }
    REQUIRE(improved >= 45); // >= 90%
}

TEST_CASE("identical config and seed give bitwise-identical final checkpoints") {
    auto ds = toy_set(12, 15);
    auto un = make_unpaired_view(ds, 16);
    auto run = [&](const std::string& dir) {
        fs::remove_all(dir);
        Trainer<float> tr(net_cfg(), train_cfg(3), ds.modality_names);
        tr.train(ds, un, dir);
        return read_file_bytes(dir + "/checkpoint_final.bmck");
    };
    const auto a = run((fs::temp_directory_path() / "bimodal_det_a").string());
    const auto b = run((fs::temp_directory_path() / "bimodal_det_b").string());
    REQUIRE(a == b);
    fs::remove_all(fs::temp_directory_path() / "bimodal_det_a");
    fs::remove_all(fs::temp_directory_path() / "bimodal_det_b");
}

TEST_CASE("checkpoint round trip restores parameters and iteration") {
    auto ds = toy_set(12, 17);
    auto un = make_unpaired_view(ds, 18);
    const std::string dir = (fs::temp_directory_path() / "bimodal_ckpt").string();
    fs::remove_all(dir);
    fs::create_directories(dir);

    Trainer<float> tr(net_cfg(), train_cfg(2), ds.modality_names);
    tr.train(ds, un, dir);
    const std::uint64_t h = hash_params(tr.generator());

    Trainer<float> fresh(net_cfg(), train_cfg(2), ds.modality_names);
    REQUIRE(hash_params(fresh.generator()) != h);
    const std::int64_t it = fresh.load_checkpoint(dir + "/checkpoint_final.bmck");
    REQUIRE(it == 2);
    REQUIRE(hash_params(fresh.generator()) == h);
    REQUIRE(hash_params(fresh.critics()) == hash_params(tr.critics()));

    SECTION("descriptor mismatch refuses to load") {
        NetConfig other = net_cfg();
        other.base_channels = 24;
        Trainer<float> wrong(other, train_cfg(2), ds.modality_names);
        REQUIRE_THROWS_AS(wrong.load_checkpoint(dir + "/checkpoint_final.bmck"),
                          DescriptorMismatch);
        Trainer<float> wrong_order(net_cfg(), train_cfg(2), {"textured", "smooth"});
        REQUIRE_THROWS_AS(wrong_order.load_checkpoint(dir + "/checkpoint_final.bmck"),
                          DescriptorMismatch);
    }
    fs::remove_all(dir);
}

TEST_CASE("resume from an intermediate checkpoint reproduces the uninterrupted run") {
    auto ds = toy_set(12, 19);
    auto un = make_unpaired_view(ds, 20);
    TrainConfig cfg = train_cfg(4);
    cfg.checkpoint_every = 2;

    const std::string d1 = (fs::temp_directory_path() / "bimodal_resume_full").string();
    fs::remove_all(d1);
    Trainer<float> full(net_cfg(), cfg, ds.modality_names);
    full.train(ds, un, d1);

    const std::string d2 = (fs::temp_directory_path() / "bimodal_resume_half").string();
    fs::remove_all(d2);
    fs::create_directories(d2);
    Trainer<float> resumed(net_cfg(), cfg, ds.modality_names);
    resumed.load_checkpoint(d1 + "/checkpoint_00000002.bmck");
    resumed.train(ds, un, d2);

    REQUIRE(read_file_bytes(d1 + "/checkpoint_final.bmck") ==
            read_file_bytes(d2 + "/checkpoint_final.bmck"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("synthesize: determinism, range, modality naming") {
    auto ds = toy_set(12, 21);
    Trainer<float> tr(net_cfg(), train_cfg(1), ds.modality_names);
    auto a = tr.synthesize(5, 31);
    auto b = tr.synthesize(5, 31);
    REQUIRE(a.size() == 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].first.px == b[i].first.px);
        REQUIRE(a[i].second.px == b[i].second.px);
        REQUIRE(a[i].first.modality == "smooth");
        REQUIRE(a[i].second.modality == "textured");
        for (float v : a[i].first.px) {
            REQUIRE(v >= -1.0f);
            REQUIRE(v <= 1.0f);
        }
    }
    auto c = tr.synthesize(5, 32);
    REQUIRE(a[0].first.px != c[0].first.px);
}

TEST_CASE("training log enforces finiteness and ordering") {
    TrainingLog log;
    LossValue bad;
    bad.value = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(log.append({0, "sup", bad, 0.0}), NumericError);
}

TEST_CASE("parallel baseline trains, synthesizes, and stays deterministic") {
    auto ds = toy_set(12, 23);
    std::vector<Image> ra, rb;
    for (auto& p : ds.pairs) {
        ra.push_back(p.first);
        rb.push_back(p.second);
    }
    auto run = [&]() {
        ParallelTrainer<float> pt(net_cfg(), train_cfg(2), ds.modality_names);
        pt.train(ra, rb);
        return pt.synthesize(3, 7);
    };
    auto [a1, b1] = run();
    auto [a2, b2] = run();
    REQUIRE(a1.size() == 3);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(a1[i].px == a2[i].px);
        REQUIRE(b1[i].px == b2[i].px);
        REQUIRE(a1[i].modality == "smooth");
        REQUIRE(b1[i].modality == "textured");
    }
}

TEST_CASE("shared-block identity holds after every training iteration") {
    auto ds = toy_set(12, 25);
    auto un = make_unpaired_view(ds, 26);
    Trainer<float> tr(net_cfg(), train_cfg(3), ds.modality_names);
    int checks = 0;
    tr.observer = [&](std::int64_t, const std::string&) {
        // decoder view and translator view are the same storage
        const SharedUp<float>& via_decoder = tr.generator().shared;
        const SharedUp<float>& via_translator = tr.generator().shared;
        REQUIRE(&via_decoder == &via_translator);
        SharedUp<float>& s = tr.generator().shared;
        REQUIRE(hash_params(s) == hash_params(s));
        ++checks;
    };
    tr.train(ds, un);
    REQUIRE(checks == 3 * 4);
}
