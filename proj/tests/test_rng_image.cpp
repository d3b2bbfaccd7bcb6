#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "bimodal/image.hpp"
#include "bimodal/rng.hpp"

using namespace bimodal;

TEST_CASE("rng streams are deterministic and tag-separated") {
    Rng a(derive_seed(7, "x")), b(derive_seed(7, "x")), c(derive_seed(7, "y"));
    for (int i = 0; i < 16; ++i) {
        const double va = a.uniform();
        REQUIRE(va == b.uniform());
        REQUIRE(va >= 0.0);
        REQUIRE(va < 1.0);
    }
    REQUIRE(Rng(derive_seed(7, "x")).uniform() != c.uniform());
    REQUIRE(derive_seed(7, "x", 0) != derive_seed(7, "x", 1));
}

TEST_CASE("normalize_intensity endpoint and midpoint mapping") {
    std::vector<float> raw = {0.0f, 255.0f, 128.0f, 64.0f};
    Image im = normalize_intensity(raw, 2, 2, "m");
    REQUIRE(im.px[0] == -1.0f);
    REQUIRE(im.px[1] == 1.0f);
    // 2*128/255 - 1
    REQUIRE(std::abs(im.px[2] - 0.00392156862745097f) < 1e-6f);
    for (float v : im.px) {
        REQUIRE(v >= -1.0f);
        REQUIRE(v <= 1.0f);
    }
}

TEST_CASE("normalize_intensity degenerate and error cases") {
    std::vector<float> flat(9, 7.0f);
    Image im = normalize_intensity(flat, 3, 3, "m");
    for (float v : im.px) REQUIRE(v == 0.0f);

    std::vector<float> bad = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    REQUIRE_THROWS_AS(normalize_intensity(bad, 1, 2, "m"), InputError);
    REQUIRE_THROWS_AS(normalize_intensity({}, 0, 0, "m"), InputError);
}

TEST_CASE("normalize_intensity is idempotent within one ulp") {
    Rng rng(3);
    std::vector<float> raw(64);
    for (auto& v : raw) v = static_cast<float>(rng.uniform_in(5.0, 90.0));
    raw[0] = 5.0f;
    raw[1] = 90.0f;
    Image once = normalize_intensity(raw, 8, 8, "m");
    Image twice = normalize_intensity(once);
    for (std::size_t i = 0; i < once.px.size(); ++i) {
        const float a = once.px[i], b = twice.px[i];
        REQUIRE(std::abs(a - b) <=
                std::numeric_limits<float>::epsilon() * std::max(1.0f, std::abs(a)));
    }
}

namespace {
PairedDataset tiny_dataset(int n) {
    PairedDataset ds;
    ds.modality_names = {"a", "b"};
    for (int i = 0; i < n; ++i) {
        ImagePair p;
        p.pair_id = "p" + std::to_string(i);
        p.first.h = p.first.w = 2;
        p.first.px = {float(i), 0, 0, 0};
        p.first.modality = "a";
        p.second.h = p.second.w = 2;
        p.second.px = {float(100 + i), 0, 0, 0};
        p.second.modality = "b";
        ds.pairs.push_back(p);
    }
    return ds;
}
} // namespace

TEST_CASE("make_unpaired_view is a seeded derangement conserving multisets") {
    auto ds = tiny_dataset(11);
    auto un = make_unpaired_view(ds, 5);
    REQUIRE(un.size() == ds.size());

    // derangement: no pair keeps its original partner
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(un.pairs[i].second.px[0] != ds.pairs[i].second.px[0]);

    // per-modality multisets unchanged
    std::multiset<float> before, after;
    for (const auto& p : ds.pairs) before.insert(p.second.px[0]);
    for (const auto& p : un.pairs) after.insert(p.second.px[0]);
    REQUIRE(before == after);
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(un.pairs[i].first.px[0] == ds.pairs[i].first.px[0]);

    // determinism
    auto un2 = make_unpaired_view(ds, 5);
    for (std::size_t i = 0; i < ds.size(); ++i)
        REQUIRE(un.pairs[i].second.px[0] == un2.pairs[i].second.px[0]);
    auto un3 = make_unpaired_view(ds, 6);
    bool differs = false;
    for (std::size_t i = 0; i < ds.size(); ++i)
        differs = differs || un.pairs[i].second.px[0] != un3.pairs[i].second.px[0];
    REQUIRE(differs);
}

TEST_CASE("make_unpaired_view rejects datasets without a derangement") {
    REQUIRE_THROWS_AS(make_unpaired_view(tiny_dataset(1), 3), InputError);
}

TEST_CASE("derangement property holds across many seeds") {
    auto ds = tiny_dataset(7);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto un = make_unpaired_view(ds, seed);
        for (std::size_t i = 0; i < ds.size(); ++i)
            REQUIRE(un.pairs[i].second.px[0] != ds.pairs[i].second.px[0]);
    }
}

TEST_CASE("dataset validation catches duplicates and shape mismatches") {
    auto ds = tiny_dataset(3);
    REQUIRE_NOTHROW(validate_dataset(ds));
    ds.pairs[2].pair_id = ds.pairs[0].pair_id;
    REQUIRE_THROWS_AS(validate_dataset(ds), InputError);
}
