#include <catch2/catch_amalgamated.hpp>

#include "bimodal/losses.hpp"
#include "test_support.hpp"

using namespace bimodal;
using namespace bimodal::testutil;

namespace {
NetConfig tiny_cfg() {
    NetConfig c;
    c.image_size = 32;
    c.latent_dim = 12;
    c.base_channels = 16;
    return c;
}
} // namespace

TEST_CASE("recon_l1: identity, constant offset, brute-force oracle") {
    auto r1 = random_tensor<double>(2, 1, 8, 8, 1);
    auto r2 = random_tensor<double>(2, 1, 8, 8, 2);

    SECTION("fake = real gives zero") {
        auto L = recon_l1(r1, r2, r1, r2);
        REQUIRE(L.value == 0.0);
    }

    SECTION("+0.5 everywhere in both modalities gives 1.0") {
        auto f1 = r1, f2 = r2;
        for (auto& v : f1.v) v += 0.5;
        for (auto& v : f2.v) v += 0.5;
        auto L = recon_l1(r1, r2, f1, f2);
        REQUIRE(std::abs(L.value - 1.0) < 1e-12);
        REQUIRE(std::abs(L.component("l1_mod1") - 0.5) < 1e-12);
    }

    SECTION("against zeros equals a pixel-loop mean absolute intensity") {
        Tensor<double> z1(2, 1, 8, 8), z2(2, 1, 8, 8);
        auto L = recon_l1(r1, r2, z1, z2);
        double m1 = 0, m2 = 0;
        for (double v : r1.v) m1 += std::abs(v);
        for (double v : r2.v) m2 += std::abs(v);
        m1 /= r1.size();
        m2 /= r2.size();
        REQUIRE(std::abs(L.value - (m1 + m2)) < 1e-12);
    }

    SECTION("symmetry and nonnegativity") {
        auto f1 = random_tensor<double>(2, 1, 8, 8, 3);
        auto f2 = random_tensor<double>(2, 1, 8, 8, 4);
        auto a = recon_l1(r1, r2, f1, f2);
        auto b = recon_l1(f1, f2, r1, r2);
        REQUIRE(a.value >= 0.0);
        REQUIRE(std::abs(a.value - b.value) < 1e-12);
    }
}

TEST_CASE("gradient penalty: closed-form critics") {
    const int n = 4;
    auto real = random_tensor<double>(n, 1, 6, 6, 7);
    auto fake = random_tensor<double>(n, 1, 6, 6, 8);

    SECTION("linear critic gives (||w||-1)^2 for any batch") {
        Rng rng(17);
        for (int trial = 0; trial < 20; ++trial) {
            LinearCritic<double> lc;
            lc.w.resize(36);
            for (auto& w : lc.w) w = rng.normal() * 0.5;
            double norm = 0;
            for (double w : lc.w) norm += w * w;
            norm = std::sqrt(norm);
            auto L = gradient_penalty(lc, real, fake, static_cast<std::uint64_t>(trial));
            const double expect = (norm - 1.0) * (norm - 1.0);
            REQUIRE(std::abs(L.value - expect) < 1e-10);
        }
    }

    SECTION("unit-norm linear critic gives zero") {
        LinearCritic<double> lc;
        lc.w.assign(36, 0.0);
        lc.w[5] = 1.0;
        auto L = gradient_penalty(lc, real, fake, 3);
        REQUIRE(std::abs(L.value) < 1e-15);
    }

    SECTION("constant critic gives exactly 1") {
        ConstantCritic<double> cc;
        auto L = gradient_penalty(cc, real, fake, 9);
        REQUIRE(L.value == 1.0);
    }

    SECTION("swapping real/fake with u -> 1-u leaves the penalty unchanged") {
        NetConfig cfg = tiny_cfg();
        CriticPair<double> c;
        c.configure(cfg);
        init_critics(c, 77);
        auto r = random_tensor<double>(3, 1, 32, 32, 10, 0.5);
        auto f = random_tensor<double>(3, 1, 32, 32, 11, 0.5);
        auto u = draw_interpolation_coeffs<double>(3, 123);
        std::vector<double> u_swapped;
        for (double x : u) u_swapped.push_back(1.0 - x);
        auto a = gradient_penalty(CriticNetRef<double>{c.d1}, r, f, u);
        auto b = gradient_penalty(CriticNetRef<double>{c.d1}, f, r, u_swapped);
        REQUIRE(std::abs(a.value - b.value) < 1e-12);
    }
}

TEST_CASE("gradient penalty parameter gradients match finite differences") {
    NetConfig cfg = tiny_cfg();
    CriticPair<double> c;
    c.configure(cfg);
    init_critics(c, 31);
    auto real = random_tensor<double>(3, 1, 32, 32, 13, 0.5);
    auto fake = random_tensor<double>(3, 1, 32, 32, 14, 0.5);
    auto u = draw_interpolation_coeffs<double>(3, 15);

    CriticPair<double> grads;
    grads.configure(cfg);
    zero_params(grads);
    gradient_penalty_with_param_grads(c.d1, real, fake, u, grads.d1, 1.0);

    auto value = [&]() { return gradient_penalty(CriticNetRef<double>{c.d1}, real, fake, u).value; };

    auto prefs = collect_params<double>(c.d1);
    auto grefs = collect_params<double>(grads.d1);
    Rng pick(16);
    int checked = 0;
    for (std::size_t b = 0; b < prefs.size(); ++b) {
        if (prefs[b].vec->empty()) continue;
        if (prefs[b].name.find(".b") != std::string::npos) {
            // bias gradients of the penalty are identically zero
            for (double g : *grefs[b].vec) REQUIRE(g == 0.0);
            continue;
        }
        for (int t = 0; t < 2; ++t) {
            const std::size_t i = pick.below(prefs[b].vec->size());
            const double fd = central_diff(*prefs[b].vec, i, 1e-5, value);
            REQUIRE(rel_close((*grefs[b].vec)[i], fd, 1e-3, 1e-7));
            ++checked;
        }
    }
    REQUIRE(checked >= 8);
}

TEST_CASE("critic objective: identical batches, lambda linearity, optimal linear critic") {
    NetConfig cfg = tiny_cfg();
    CriticPair<double> c;
    c.configure(cfg);
    init_critics(c, 41);
    auto real = random_tensor<double>(4, 1, 32, 32, 21, 0.5);

    SECTION("real = fake gives zero W estimate for any critic") {
        auto L = critic_objective(c.d1, real, real, 10.0, 5);
        REQUIRE(std::abs(L.component("w_estimate")) < 1e-9);
    }

    SECTION("doubling lambda doubles the penalty share, W estimate unchanged") {
        auto fake = random_tensor<double>(4, 1, 32, 32, 22, 0.5);
        auto u = draw_interpolation_coeffs<double>(4, 6);
        auto L1 = critic_objective_with_grads(c.d1, real, fake, 10.0, u, nullptr);
        auto L2 = critic_objective_with_grads(c.d1, real, fake, 20.0, u, nullptr);
        REQUIRE(std::abs(L1.component("w_estimate") - L2.component("w_estimate")) < 1e-12);
        REQUIRE(std::abs(L1.component("penalty") - L2.component("penalty")) < 1e-12);
        const double p = L1.component("penalty"), w = L1.component("w_estimate");
        REQUIRE(std::abs(L1.value - (-w + 10.0 * p)) < 1e-9);
        REQUIRE(std::abs(L2.value - (-w + 20.0 * p)) < 1e-9);
    }

    SECTION("1-D point masses with unit linear critic estimate |a-b|") {
        // lambda = 0, D(x) = w.x with ||w|| = 1: the W estimate at the optimal
        // sign of w equals |a - b|.
        const double a = 0.7, b = -0.4;
        Tensor<double> ra(1, 1, 1, 1), fb(1, 1, 1, 1);
        ra.v[0] = a;
        fb.v[0] = b;
        LinearCritic<double> lc;
        double best = -1e30;
        for (double w : {1.0, -1.0}) {
            lc.w = {w};
            best = std::max(best, lc.score(ra, 0) - lc.score(fb, 0));
        }
        REQUIRE(std::abs(best - std::abs(a - b)) < 1e-12);
    }
}

TEST_CASE("critic objective parameter gradients match finite differences") {
    NetConfig cfg = tiny_cfg();
    CriticPair<double> c;
    c.configure(cfg);
    init_critics(c, 51);
    auto real = random_tensor<double>(3, 1, 32, 32, 23, 0.5);
    auto fake = random_tensor<double>(3, 1, 32, 32, 24, 0.5);
    auto u = draw_interpolation_coeffs<double>(3, 25);
    const double lambda = 10.0;

    CriticPair<double> grads;
    grads.configure(cfg);
    zero_params(grads);
    critic_objective_with_grads(c.d1, real, fake, lambda, u, &grads.d1);

    auto value = [&]() {
        return critic_objective_with_grads(c.d1, real, fake, lambda, u, nullptr).value;
    };
    auto prefs = collect_params<double>(c.d1);
    auto grefs = collect_params<double>(grads.d1);
    Rng pick(26);
    int checked = 0;
    for (std::size_t b = 0; b < prefs.size(); ++b) {
        for (int t = 0; t < 2 && !prefs[b].vec->empty(); ++t) {
            const std::size_t i = pick.below(prefs[b].vec->size());
            const double fd = central_diff(*prefs[b].vec, i, 1e-5, value);
            REQUIRE(rel_close((*grefs[b].vec)[i], fd, 1e-3, 1e-7));
            ++checked;
        }
    }
    REQUIRE(checked >= 10);
}

TEST_CASE("generator unsupervised loss: zero critics, batch-mean linearity") {
    NetConfig cfg = tiny_cfg();
    CriticPair<double> c;
    c.configure(cfg);
    auto f1 = random_tensor<double>(4, 1, 32, 32, 31, 0.5);
    auto f2 = random_tensor<double>(4, 1, 32, 32, 32, 0.5);

    SECTION("all-zero critics give zero loss") {
        zero_params(c);
        auto L = generator_unsup_value(c.d1, c.d2, f1, f2);
        REQUIRE(L.value == 0.0);
    }

    SECTION("splitting a batch and averaging matches the full batch") {
        init_critics(c, 61);
        auto L = generator_unsup_value(c.d1, c.d2, f1, f2);
        auto slice = [&](const Tensor<double>& t, int from, int count) {
            Tensor<double> s(count, t.c, t.h, t.w);
            std::copy(t.item(from), t.item(from) + count * t.item_size(), s.v.begin());
            return s;
        };
        auto La = generator_unsup_value(c.d1, c.d2, slice(f1, 0, 2), slice(f2, 0, 2));
        auto Lb = generator_unsup_value(c.d1, c.d2, slice(f1, 2, 2), slice(f2, 2, 2));
        REQUIRE(std::abs((La.value + Lb.value) / 2.0 - L.value) < 1e-6);
        REQUIRE(std::abs(L.value - (L.component("w1_part") + L.component("w2_part"))) < 1e-12);
    }
}

// The Eq. 2 / Eq. 4 probe: analytic parameter gradients vs central finite
// differences on scalars spanning encoder, shared block, decoder tail,
// translator and critics (the unit-scale mirror of the acceptance criterion).
TEST_CASE("full-path loss gradients match finite differences across all blocks") {
    NetConfig cfg = tiny_cfg();
    GeneratorParams<double> g;
    g.configure(cfg);
    init_generator(g, 71);
    CriticPair<double> c;
    c.configure(cfg);
    init_critics(c, 72);

    auto i1 = random_tensor<double>(2, 1, 32, 32, 41, 0.5);
    auto i2 = random_tensor<double>(2, 1, 32, 32, 42, 0.5);
    auto z = sample_latent<double>(2, 43, cfg.latent_dim);

    SECTION("supervised reconstruction loss (encoder, shared, decoder tail, translator)") {
        GeneratorParams<double> grads;
        grads.configure(cfg);
        zero_params(grads);
        supervised_loss_with_grads(g, i1, i2, grads);
        auto value = [&]() {
            GeneratorParams<double> scratch;
            scratch.configure(cfg);
            zero_params(scratch);
            return supervised_loss_with_grads(g, i1, i2, scratch).value;
        };
        auto prefs = collect_params<double>(g);
        auto grefs = collect_params<double>(grads);
        Rng pick(44);
        int checked = 0;
        for (std::size_t b = 0; b < prefs.size(); ++b) {
            if (prefs[b].vec->empty()) continue;
            const std::size_t i = pick.below(prefs[b].vec->size());
            const double fd = central_diff(*prefs[b].vec, i, 1e-6, value);
            if (std::abs(fd) < 1e-10 && std::abs((*grefs[b].vec)[i]) < 1e-10) continue;
            INFO(prefs[b].name);
            REQUIRE(rel_close((*grefs[b].vec)[i], fd, 1e-3, 1e-8));
            ++checked;
        }
        REQUIRE(checked >= 12);
    }

    SECTION("unsupervised generator loss (shared, tails, translator, critics)") {
        GeneratorParams<double> grads;
        grads.configure(cfg);
        zero_params(grads);
        CriticPair<double> cgrads;
        cgrads.configure(cfg);
        zero_params(cgrads);
        unsup_gen_loss_with_grads(g, c, z, grads, &cgrads);
        auto value = [&]() {
            GeneratorParams<double> scratch;
            scratch.configure(cfg);
            zero_params(scratch);
            return unsup_gen_loss_with_grads(g, c, z, scratch).value;
        };

        // generator blocks (encoder must receive zero gradient in this phase)
        for (double v : *collect_params<double>(grads.encoder)[0].vec) REQUIRE(v == 0.0);

        auto prefs = collect_params<double>(g);
        auto grefs = collect_params<double>(grads);
        Rng pick(45);
        int checked = 0;
        for (std::size_t b = 0; b < prefs.size(); ++b) {
            if (prefs[b].vec->empty() || prefs[b].name.find(".enc") != std::string::npos) continue;
            const std::size_t i = pick.below(prefs[b].vec->size());
            const double fd = central_diff(*prefs[b].vec, i, 1e-6, value);
            if (std::abs(fd) < 1e-10 && std::abs((*grefs[b].vec)[i]) < 1e-10) continue;
            INFO(prefs[b].name);
            REQUIRE(rel_close((*grefs[b].vec)[i], fd, 1e-3, 1e-8));
            ++checked;
        }
        // critic scalars through the same loss
        auto cprefs = collect_params<double>(c);
        auto cgrefs = collect_params<double>(cgrads);
        for (std::size_t b = 0; b < cprefs.size(); b += 3) {
            if (cprefs[b].vec->empty()) continue;
            const std::size_t i = pick.below(cprefs[b].vec->size());
            const double fd = central_diff(*cprefs[b].vec, i, 1e-6, value);
            if (std::abs(fd) < 1e-10 && std::abs((*cgrefs[b].vec)[i]) < 1e-10) continue;
            INFO(cprefs[b].name);
            REQUIRE(rel_close((*cgrefs[b].vec)[i], fd, 1e-3, 1e-8));
            ++checked;
        }
        REQUIRE(checked >= 10);
    }
}

TEST_CASE("supervised loss with encoder prior regularizer stays finite and differentiable") {
    NetConfig cfg = tiny_cfg();
    GeneratorParams<double> g;
    g.configure(cfg);
    init_generator(g, 81);
    auto i1 = random_tensor<double>(3, 1, 32, 32, 51, 0.5);
    auto i2 = random_tensor<double>(3, 1, 32, 32, 52, 0.5);
    GeneratorParams<double> grads;
    grads.configure(cfg);
    zero_params(grads);
    auto L = supervised_loss_with_grads(g, i1, i2, grads, /*prior_reg=*/true, 0.5);
    REQUIRE(L.finite());
    REQUIRE(L.component("prior_reg") >= 0.0);

    auto value = [&]() {
        GeneratorParams<double> scratch;
        scratch.configure(cfg);
        zero_params(scratch);
        return supervised_loss_with_grads(g, i1, i2, scratch, true, 0.5).value;
    };
    auto& w = g.encoder.f2.w;
    auto& gw = grads.encoder.f2.w;
    Rng pick(53);
    for (int t = 0; t < 3; ++t) {
        const std::size_t i = pick.below(w.size());
        const double fd = central_diff(w, i, 1e-6, value);
        REQUIRE(rel_close(gw[i], fd, 1e-3, 1e-8));
    }
}
