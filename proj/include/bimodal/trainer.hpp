#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bimodal/checkpoint.hpp"
#include "bimodal/image.hpp"
#include "bimodal/losses.hpp"
#include "bimodal/networks.hpp"
#include "bimodal/optimizer.hpp"

namespace bimodal {

enum class Strategy { supervised, unsupervised, semi_supervised };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::supervised: return "supervised";
        case Strategy::unsupervised: return "unsupervised";
        case Strategy::semi_supervised: return "semi_supervised";
    }
    return "?";
}

inline Strategy strategy_from_name(const std::string& s) {
    if (s == "supervised") return Strategy::supervised;
    if (s == "unsupervised") return Strategy::unsupervised;
    if (s == "semi_supervised") return Strategy::semi_supervised;
    throw ConfigError("unknown strategy: " + s);
}

struct TrainConfig {
    Strategy strategy = Strategy::semi_supervised;
    // One iteration = one alternation cycle: one supervised step and/or one
    // unsupervised cycle (critic_steps critic updates + 1 generator update).
    // Reference scale is 40000; desk scale 5000-10000.
    int total_iterations = 10000;
    int batch_size = 32;
    double learning_rate = 1e-4;
    double beta1 = 0.5, beta2 = 0.9;
    int critic_steps = 5;
    double lambda_gp = 10.0;
    std::uint64_t seed = 0;
    int checkpoint_every = 2000;
    bool encoder_prior_reg = false;
    double prior_weight = 0.1;

    void validate() const {
        if (total_iterations < 1 || batch_size < 1 || critic_steps < 1 || checkpoint_every < 1)
            throw ConfigError("train: counts must be >= 1");
        if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
        if (lambda_gp < 0) throw ConfigError("train: lambda_gp must be >= 0");
    }
};

struct LogRecord {
    std::int64_t iteration = 0;
    std::string phase; // sup | unsup-critic | unsup-gen
    LossValue loss;
    double wall_ms = 0.0;
};

struct TrainingLog {
    std::vector<LogRecord> records;

    void append(LogRecord r) {
        if (!r.loss.finite())
            throw NumericError("training log: non-finite loss at iteration " +
                               std::to_string(r.iteration));
        if (!records.empty() && r.iteration < records.back().iteration)
            throw NumericError("training log: iterations must be non-decreasing");
        records.push_back(std::move(r));
    }

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        out << "iteration,phase,value,l1_mod1,l1_mod2,w_estimate,penalty,w1_part,w2_part,wall_ms\n";
        auto col = [](const LossValue& L, const char* name) -> std::string {
            for (const auto& [k, v] : L.components)
                if (k == name) return std::to_string(v);
            return "";
        };
        for (const auto& r : records) {
            out << r.iteration << "," << r.phase << "," << r.loss.value << ","
                << col(r.loss, "l1_mod1") << "," << col(r.loss, "l1_mod2") << ","
                << col(r.loss, "w_estimate") << "," << col(r.loss, "penalty") << ","
                << col(r.loss, "w1_part") << "," << col(r.loss, "w2_part") << "," << r.wall_ms
                << "\n";
        }
    }
};

// Stateless per-epoch shuffled index stream: position -> dataset index.
// Derived purely from (seed, tag, epoch), so resumed runs see the same order.
class IndexStream {
  public:
    IndexStream(std::size_t n, std::uint64_t seed, std::string tag)
        : n_(n), seed_(seed), tag_(std::move(tag)) {}

    std::size_t at(std::uint64_t pos) const {
        const std::uint64_t epoch = pos / n_;
        if (epoch != cached_epoch_ || perm_.empty()) {
            perm_.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
            Rng rng(derive_seed(seed_, tag_, epoch));
            rng.shuffle(perm_);
            cached_epoch_ = epoch;
        }
        return perm_[pos % n_];
    }

  private:
    std::size_t n_;
    std::uint64_t seed_;
    std::string tag_;
    mutable std::vector<std::size_t> perm_;
    mutable std::uint64_t cached_epoch_ = ~0ULL;
};

// Optimizer views: the encoder gets its own optimizer so unsupervised phases
// can leave it untouched, and supervised phases never reach the critics.
template <class T>
struct EncoderView {
    GeneratorParams<T>* g;
};
template <class T, class Fn>
void visit_params(EncoderView<T>& v, const std::string& p, Fn&& fn) {
    visit_params(v.g->encoder, p + ".enc", fn);
}

template <class T>
struct GenCoreView {
    GeneratorParams<T>* g;
};
template <class T, class Fn>
void visit_params(GenCoreView<T>& v, const std::string& p, Fn&& fn) {
    visit_params(v.g->dec_head, p + ".dec_head", fn);
    visit_params(v.g->shared, p + ".shared", fn);
    visit_params(v.g->dec_tail, p + ".dec_tail", fn);
    visit_params(v.g->transl_down, p + ".transl_down", fn);
    visit_params(v.g->transl_tail, p + ".transl_tail", fn);
}

// ---------------------------------------------------------------------------
// Sequential synthesizer trainer.
// ---------------------------------------------------------------------------

template <class T>
class Trainer {
  public:
    using Observer = std::function<void(std::int64_t iteration, const std::string& phase)>;

    Trainer(const NetConfig& net_cfg, const TrainConfig& cfg,
            std::array<std::string, 2> modality_order)
        : cfg_(cfg), modalities_(std::move(modality_order)) {
        cfg.validate();
        gen_.configure(net_cfg);
        grads_.configure(net_cfg);
        critics_.configure(net_cfg);
        cgrads_.configure(net_cfg);
        init_generator(gen_, derive_seed(cfg.seed, "gen-init"));
        init_critics(critics_, derive_seed(cfg.seed, "critic-init"));
        auto ev = enc_view();
        auto gv = core_view();
        opt_enc_ = Adam<T, EncoderView<T>>(ev, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_gen_ = Adam<T, GenCoreView<T>>(gv, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_d1_ = Adam<T, CriticNet<T>>(critics_.d1, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_d2_ = Adam<T, CriticNet<T>>(critics_.d2, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
    }

    GeneratorParams<T>& generator() { return gen_; }
    CriticPair<T>& critics() { return critics_; }
    const TrainingLog& log() const { return log_; }
    std::int64_t iteration() const { return iter_; }
    const std::array<std::string, 2>& modalities() const { return modalities_; }

    std::string descriptor() const {
        return gen_.descriptor() + ";order=" + modalities_[0] + "->" + modalities_[1];
    }

    // One gradient step on the reconstruction loss over encode->decode->
    // translate. Critics are never touched here.
    LossValue supervised_step(const Tensor<T>& i1, const Tensor<T>& i2) {
        zero_params(grads_);
        LossValue L = supervised_loss_with_grads(gen_, i1, i2, grads_, cfg_.encoder_prior_reg,
                                                 T(cfg_.prior_weight));
        if (!L.finite()) abort_non_finite("supervised");
        auto ev = enc_view();
        auto gv = core_view();
        auto gev = EncoderView<T>{&grads_};
        auto ggv = GenCoreView<T>{&grads_};
        opt_enc_.step(ev, gev);
        opt_gen_.step(gv, ggv);
        return L;
    }

    // One critic update for one modality (0 or 1) on given real/fake batches.
    LossValue critic_update(int which, const Tensor<T>& real, const Tensor<T>& fake,
                            const std::vector<T>& u) {
        CriticNet<T>& net = which == 0 ? critics_.d1 : critics_.d2;
        CriticNet<T>& gnet = which == 0 ? cgrads_.d1 : cgrads_.d2;
        zero_params(gnet);
        LossValue L = critic_objective_with_grads(net, real, fake, T(cfg_.lambda_gp), u, &gnet);
        if (!L.finite()) abort_non_finite("critic");
        (which == 0 ? opt_d1_ : opt_d2_).step(net, gnet);
        return L;
    }

    // Fresh fakes from the current generator (z derived from (seed, tag, index)).
    std::pair<Tensor<T>, Tensor<T>> make_fakes(const char* tag, std::uint64_t index, int n) {
        MatX<T> z = sample_latent<T>(n, derive_seed(cfg_.seed, tag, index), gen_.cfg.latent_dim);
        Tensor<T> f1 = decode_batch(gen_, z);
        Tensor<T> f2 = translate_batch(gen_, f1);
        return {std::move(f1), std::move(f2)};
    }

    // One unsupervised cycle: critic_steps updates of each critic on fresh
    // fakes, then one generator update on Eq. 4. The encoder is frozen in this
    // phase.
    std::vector<LossValue> unsupervised_cycle(std::int64_t iter, const PairedDataset& unpaired,
                                              const IndexStream& s1, const IndexStream& s2,
                                              TrainingLog* log_out) {
        std::vector<LossValue> out;
        const int n = cfg_.batch_size;
        for (int s = 0; s < cfg_.critic_steps; ++s) {
            const std::uint64_t sub = static_cast<std::uint64_t>(iter) * cfg_.critic_steps + s;
            auto [f1, f2] = make_fakes("z-critic", sub, n);
            Tensor<T> r1 = gather_batch(unpaired, s1, sub, /*second=*/false);
            Tensor<T> r2 = gather_batch(unpaired, s2, sub, /*second=*/true);
            auto u1 = draw_interpolation_coeffs<T>(n, derive_seed(cfg_.seed, "gp-u1", sub));
            auto u2 = draw_interpolation_coeffs<T>(n, derive_seed(cfg_.seed, "gp-u2", sub));
            LossValue L1 = critic_update(0, r1, f1, u1);
            LossValue L2 = critic_update(1, r2, f2, u2);
            LossValue combined;
            combined.value = L1.value + L2.value;
            combined.components = {{"w_estimate", L1.component("w_estimate") + L2.component("w_estimate")},
                                   {"penalty", L1.component("penalty") + L2.component("penalty")}};
            if (log_out) log_out->append({iter, "unsup-critic", combined, elapsed_ms()});
            if (observer) observer(iter, "unsup-critic");
            out.push_back(std::move(combined));
        }
        MatX<T> z = sample_latent<T>(n, derive_seed(cfg_.seed, "z-gen", static_cast<std::uint64_t>(iter)),
                                     gen_.cfg.latent_dim);
        zero_params(grads_);
        LossValue Lg = unsup_gen_loss_with_grads(gen_, critics_, z, grads_);
        if (!Lg.finite()) abort_non_finite("unsup-gen");
        auto gv = core_view();
        auto ggv = GenCoreView<T>{&grads_};
        opt_gen_.step(gv, ggv);
        if (log_out) log_out->append({iter, "unsup-gen", Lg, elapsed_ms()});
        if (observer) observer(iter, "unsup-gen");
        out.push_back(std::move(Lg));
        return out;
    }

    // Full run. `paired` may be empty for unsupervised strategy, `unpaired`
    // may be empty for supervised strategy.
    TrainingLog& train(const PairedDataset& paired, const PairedDataset& unpaired,
                       const std::string& out_dir = "") {
        const bool needs_paired = cfg_.strategy != Strategy::unsupervised;
        const bool needs_unpaired = cfg_.strategy != Strategy::supervised;
        if (needs_paired && paired.pairs.empty())
            throw InputError("train: strategy requires a paired dataset");
        if (needs_unpaired && unpaired.pairs.empty())
            throw InputError("train: strategy requires an unpaired dataset");

        IndexStream ps(std::max<std::size_t>(paired.size(), 1), cfg_.seed, "paired");
        IndexStream u1(std::max<std::size_t>(unpaired.size(), 1), cfg_.seed, "unpaired1");
        IndexStream u2(std::max<std::size_t>(unpaired.size(), 1), cfg_.seed, "unpaired2");

        if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
        start_clock();
        for (; iter_ < cfg_.total_iterations; ++iter_) {
            if (needs_paired) {
                auto [i1, i2] = gather_pair_batch(paired, ps, static_cast<std::uint64_t>(iter_));
                LossValue L = supervised_step(i1, i2);
                log_.append({iter_, "sup", L, elapsed_ms()});
                if (observer) observer(iter_, "sup");
            }
            if (needs_unpaired) unsupervised_cycle(iter_, unpaired, u1, u2, &log_);
            if (!out_dir.empty() && (iter_ + 1) % cfg_.checkpoint_every == 0 &&
                iter_ + 1 < cfg_.total_iterations) {
                char name[64];
                std::snprintf(name, sizeof(name), "checkpoint_%08lld.bmck",
                              static_cast<long long>(iter_ + 1));
                save_checkpoint((std::filesystem::path(out_dir) / name).string(), iter_ + 1);
            }
        }
        if (!out_dir.empty())
            save_checkpoint((std::filesystem::path(out_dir) / "checkpoint_final.bmck").string(),
                            iter_);
        return log_;
    }

    // n synthetic pairs from the trained generator, deterministic in `seed`.
    std::vector<ImagePair> synthesize(int n, std::uint64_t seed) {
        std::vector<ImagePair> out;
        const int chunk = 64;
        for (int done = 0; done < n; done += chunk) {
            const int b = std::min(chunk, n - done);
            MatX<T> z = sample_latent<T>(b, derive_seed(seed, "synth", done), gen_.cfg.latent_dim);
            Tensor<T> f1 = decode_batch(gen_, z);
            Tensor<T> f2 = translate_batch(gen_, f1);
            for (int i = 0; i < b; ++i) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "syn_%06d", done + i);
                ImagePair p;
                p.pair_id = buf;
                p.first = tensor_slice_to_image(f1, i, 0, modalities_[0], buf);
                p.second = tensor_slice_to_image(f2, i, 0, modalities_[1], buf);
                out.push_back(std::move(p));
            }
        }
        return out;
    }

    void save_checkpoint(const std::string& path, std::int64_t iteration) {
        BinWriter w;
        ckpt_begin(w, descriptor(), cfg_.seed, static_cast<std::uint64_t>(iteration), sizeof(T));
        ckpt_append_net<T>(w, "gen", gen_);
        ckpt_append_net<T>(w, "critics", critics_);
        ckpt_append_adam(w, "opt_enc", opt_enc_);
        ckpt_append_adam(w, "opt_gen", opt_gen_);
        ckpt_append_adam(w, "opt_d1", opt_d1_);
        ckpt_append_adam(w, "opt_d2", opt_d2_);
        write_file_atomic(path, w.buf);
    }

    std::int64_t load_checkpoint(const std::string& path) {
        const auto bytes = read_file_bytes(path);
        BinReader r{bytes.data(), bytes.data() + bytes.size()};
        const CkptHeader h = ckpt_read_header(r, descriptor(), sizeof(T));
        ckpt_read_net<T>(r, "gen", gen_);
        ckpt_read_net<T>(r, "critics", critics_);
        ckpt_read_adam(r, "opt_enc", opt_enc_);
        ckpt_read_adam(r, "opt_gen", opt_gen_);
        ckpt_read_adam(r, "opt_d1", opt_d1_);
        ckpt_read_adam(r, "opt_d2", opt_d2_);
        iter_ = static_cast<std::int64_t>(h.iteration);
        return iter_;
    }

    Observer observer;

    Tensor<T> gather_batch(const PairedDataset& ds, const IndexStream& s, std::uint64_t step,
                           bool second) {
        std::vector<const Image*> imgs;
        for (int j = 0; j < cfg_.batch_size; ++j) {
            const std::size_t idx = s.at(step * cfg_.batch_size + j);
            imgs.push_back(second ? &ds.pairs[idx].second : &ds.pairs[idx].first);
        }
        return images_to_tensor<T>(imgs);
    }

    std::pair<Tensor<T>, Tensor<T>> gather_pair_batch(const PairedDataset& ds, const IndexStream& s,
                                                      std::uint64_t step) {
        std::vector<const Image*> a, b;
        for (int j = 0; j < cfg_.batch_size; ++j) {
            const std::size_t idx = s.at(step * cfg_.batch_size + j);
            a.push_back(&ds.pairs[idx].first);
            b.push_back(&ds.pairs[idx].second);
        }
        return {images_to_tensor<T>(a), images_to_tensor<T>(b)};
    }

  private:
    EncoderView<T> enc_view() { return EncoderView<T>{&gen_}; }
    GenCoreView<T> core_view() { return GenCoreView<T>{&gen_}; }

    void abort_non_finite(const std::string& phase) {
        try {
            save_checkpoint("checkpoint_diagnostic.bmck", iter_);
        } catch (...) {
        }
        throw NumericError("non-finite loss in phase " + phase + " at iteration " +
                           std::to_string(iter_));
    }

    void start_clock() { t0_ = std::chrono::steady_clock::now(); }
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
            .count();
    }

    TrainConfig cfg_;
    std::array<std::string, 2> modalities_;
    GeneratorParams<T> gen_, grads_;
    CriticPair<T> critics_, cgrads_;
    Adam<T, EncoderView<T>> opt_enc_;
    Adam<T, GenCoreView<T>> opt_gen_;
    Adam<T, CriticNet<T>> opt_d1_, opt_d2_;
    TrainingLog log_;
    std::int64_t iter_ = 0;
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------------------
// Trainer for the parallel-GAN baseline (unsupervised only), used by the
// complexity measurer and the parallel-vs-sequential ablation.
// ---------------------------------------------------------------------------

template <class T>
class ParallelTrainer {
  public:
    ParallelTrainer(const NetConfig& net_cfg, const TrainConfig& cfg,
                    std::array<std::string, 2> modalities)
        : cfg_(cfg), modalities_(std::move(modalities)) {
        cfg.validate();
        net_cfg.validate();
        p_ = build_parallel_baseline<T>(net_cfg, cfg.seed);
        g_ = build_parallel_baseline<T>(net_cfg, cfg.seed); // shapes for grads
        zero_params(g_);
        opt_a_ = Adam<T, SoloGenerator<T>>(p_.gen_a, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_b_ = Adam<T, SoloGenerator<T>>(p_.gen_b, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_d1_ = Adam<T, CriticNet<T>>(p_.critics.d1, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
        opt_d2_ = Adam<T, CriticNet<T>>(p_.critics.d2, T(cfg.learning_rate), T(cfg.beta1), T(cfg.beta2));
    }

    ParallelBaseline<T>& model() { return p_; }
    const TrainingLog& log() const { return log_; }
    std::string descriptor() const {
        return p_.gen_a.descriptor() + ";mods=" + modalities_[0] + "," + modalities_[1];
    }

    std::pair<Tensor<T>, Tensor<T>> generate(const MatX<T>& z) {
        auto ra = up_refs(p_.gen_a.up12, p_.gen_a.tail);
        auto rb = up_refs(p_.gen_b.up12, p_.gen_b.tail);
        Tensor<T> fa = decode_forward(p_.gen_a.head, ra, p_.gen_a.cfg, z,
                                      static_cast<DecodeWS<T>*>(nullptr));
        Tensor<T> fb = decode_forward(p_.gen_b.head, rb, p_.gen_b.cfg, z,
                                      static_cast<DecodeWS<T>*>(nullptr));
        return {std::move(fa), std::move(fb)};
    }

    // Unsupervised-only training on per-modality image sets.
    TrainingLog& train(const std::vector<Image>& real_a, const std::vector<Image>& real_b) {
        if (real_a.empty() || real_b.empty())
            throw InputError("parallel baseline: empty real set");
        IndexStream sa(real_a.size(), cfg_.seed, "par-a");
        IndexStream sb(real_b.size(), cfg_.seed, "par-b");
        const int n = cfg_.batch_size;
        for (std::int64_t iter = 0; iter < cfg_.total_iterations; ++iter) {
            for (int s = 0; s < cfg_.critic_steps; ++s) {
                const std::uint64_t sub = static_cast<std::uint64_t>(iter) * cfg_.critic_steps + s;
                MatX<T> z = sample_latent<T>(n, derive_seed(cfg_.seed, "par-z", sub),
                                             p_.gen_a.cfg.latent_dim);
                auto [fa, fb] = generate(z);
                Tensor<T> ra = gather(real_a, sa, sub);
                Tensor<T> rb = gather(real_b, sb, sub);
                auto u1 = draw_interpolation_coeffs<T>(n, derive_seed(cfg_.seed, "par-u1", sub));
                auto u2 = draw_interpolation_coeffs<T>(n, derive_seed(cfg_.seed, "par-u2", sub));
                zero_params(g_.critics.d1);
                LossValue L1 = critic_objective_with_grads(p_.critics.d1, ra, fa, T(cfg_.lambda_gp),
                                                           u1, &g_.critics.d1);
                opt_d1_.step(p_.critics.d1, g_.critics.d1);
                zero_params(g_.critics.d2);
                LossValue L2 = critic_objective_with_grads(p_.critics.d2, rb, fb, T(cfg_.lambda_gp),
                                                           u2, &g_.critics.d2);
                opt_d2_.step(p_.critics.d2, g_.critics.d2);
                LossValue c;
                c.value = L1.value + L2.value;
                c.components = {{"w_estimate",
                                 L1.component("w_estimate") + L2.component("w_estimate")},
                                {"penalty", L1.component("penalty") + L2.component("penalty")}};
                log_.append({iter, "unsup-critic", c, 0.0});
            }
            // Generator step: both generators ascend their critics on a common z.
            MatX<T> z = sample_latent<T>(n, derive_seed(cfg_.seed, "par-zg",
                                                        static_cast<std::uint64_t>(iter)),
                                         p_.gen_a.cfg.latent_dim);
            zero_params(g_.gen_a);
            zero_params(g_.gen_b);
            auto ra = up_refs(p_.gen_a.up12, p_.gen_a.tail);
            auto rb = up_refs(p_.gen_b.up12, p_.gen_b.tail);
            DecodeWS<T> wa, wb;
            Tensor<T> fa = decode_forward(p_.gen_a.head, ra, p_.gen_a.cfg, z, &wa);
            Tensor<T> fb = decode_forward(p_.gen_b.head, rb, p_.gen_b.cfg, z, &wb);
            CriticWS<T> cwa, cwb;
            MatX<T> s1 = critic_forward(p_.critics.d1, fa, &cwa);
            MatX<T> s2 = critic_forward(p_.critics.d2, fb, &cwb);
            LossValue Lg;
            Lg.value = -s1.mean() - s2.mean();
            Lg.components = {{"w1_part", -s1.mean()}, {"w2_part", -s2.mean()}};
            if (!Lg.finite()) throw NumericError("parallel baseline: non-finite generator loss");
            MatX<T> seed = MatX<T>::Constant(n, 1, T(-1) / static_cast<T>(n));
            Tensor<T> dfa = critic_backward(p_.critics.d1, static_cast<CriticNet<T>*>(nullptr), cwa,
                                            seed, true);
            Tensor<T> dfb = critic_backward(p_.critics.d2, static_cast<CriticNet<T>*>(nullptr), cwb,
                                            seed, true);
            auto gra = up_refs(g_.gen_a.up12, g_.gen_a.tail);
            auto grb = up_refs(g_.gen_b.up12, g_.gen_b.tail);
            decode_backward(p_.gen_a.head, g_.gen_a.head, ra, gra, wa, std::move(dfa));
            decode_backward(p_.gen_b.head, g_.gen_b.head, rb, grb, wb, std::move(dfb));
            opt_a_.step(p_.gen_a, g_.gen_a);
            opt_b_.step(p_.gen_b, g_.gen_b);
            log_.append({iter, "unsup-gen", Lg, 0.0});
        }
        return log_;
    }

    // n images per modality from the trained baseline (common z per pair).
    std::pair<std::vector<Image>, std::vector<Image>> synthesize(int n, std::uint64_t seed) {
        std::vector<Image> a, d;
        const int chunk = 64;
        for (int done = 0; done < n; done += chunk) {
            const int b = std::min(chunk, n - done);
            MatX<T> z = sample_latent<T>(b, derive_seed(seed, "par-synth", done),
                                         p_.gen_a.cfg.latent_dim);
            auto [fa, fb] = generate(z);
            for (int i = 0; i < b; ++i) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "par_%06d", done + i);
                a.push_back(tensor_slice_to_image(fa, i, 0, modalities_[0], buf));
                d.push_back(tensor_slice_to_image(fb, i, 0, modalities_[1], buf));
            }
        }
        return {std::move(a), std::move(d)};
    }

  private:
    Tensor<T> gather(const std::vector<Image>& imgs, const IndexStream& s, std::uint64_t step) {
        std::vector<const Image*> batch;
        for (int j = 0; j < cfg_.batch_size; ++j)
            batch.push_back(&imgs[s.at(step * cfg_.batch_size + j)]);
        return images_to_tensor<T>(batch);
    }

    TrainConfig cfg_;
    std::array<std::string, 2> modalities_;
    ParallelBaseline<T> p_, g_;
    Adam<T, SoloGenerator<T>> opt_a_, opt_b_;
    Adam<T, CriticNet<T>> opt_d1_, opt_d2_;
    TrainingLog log_;
};

} // namespace bimodal
