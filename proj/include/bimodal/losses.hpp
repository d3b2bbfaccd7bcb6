#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bimodal/networks.hpp"

namespace bimodal {

struct LossValue {
    double value = 0.0;
    std::vector<std::pair<std::string, double>> components;

    double component(const std::string& name) const {
        for (const auto& [k, v] : components)
            if (k == name) return v;
        throw InputError("LossValue: no component named " + name);
    }
    bool finite() const {
        if (!std::isfinite(value)) return false;
        for (const auto& [k, v] : components)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Pixel-wise L1 reconstruction loss: mean over pixels per modality, averaged
// over the batch, summed over the two modalities.
// ---------------------------------------------------------------------------

template <class T>
double mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mean_abs_diff");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::abs(static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]));
    return acc / static_cast<double>(a.size());
}

template <class T>
LossValue recon_l1(const Tensor<T>& real1, const Tensor<T>& real2, const Tensor<T>& fake1,
                   const Tensor<T>& fake2) {
    LossValue L;
    const double m1 = mean_abs_diff(real1, fake1);
    const double m2 = mean_abs_diff(real2, fake2);
    L.value = m1 + m2;
    L.components = {{"l1_mod1", m1}, {"l1_mod2", m2}};
    return L;
}

inline LossValue recon_l1_pair(const ImagePair& real, const ImagePair& fake) {
    auto t = [&](const Image& im) {
        return images_to_tensor<double>(std::vector<const Image*>{&im});
    };
    return recon_l1(t(real.first), t(real.second), t(fake.first), t(fake.second));
}

// d(mean|x - r|)/dx, the L1 subgradient with sign(0) = 0.
template <class T>
Tensor<T> l1_grad(const Tensor<T>& fake, const Tensor<T>& real) {
    Tensor<T> g(fake.n, fake.c, fake.h, fake.w);
    const T scale = T(1) / static_cast<T>(fake.size());
    for (std::size_t i = 0; i < fake.size(); ++i) {
        const T d = fake.v[i] - real.v[i];
        g.v[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Gradient penalty: mean over the batch of (||grad_x D(x_hat)||_2 - 1)^2 with
// x_hat = u*real + (1-u)*fake, u per example. Works against anything exposing
// per-item input gradients, which lets the tests drive it with closed-form
// critics.
// ---------------------------------------------------------------------------

template <class T>
std::vector<T> draw_interpolation_coeffs(int n, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "gp-u"));
    std::vector<T> u(n);
    for (auto& x : u) x = static_cast<T>(rng.uniform());
    return u;
}

template <class T>
Tensor<T> interpolate_batch(const Tensor<T>& real, const Tensor<T>& fake, const std::vector<T>& u) {
    require_same_shape(real, fake, "interpolate_batch");
    if (static_cast<int>(u.size()) != real.n)
        throw InputError("interpolate_batch: coefficient count != batch size");
    Tensor<T> out(real.n, real.c, real.h, real.w);
    for (int i = 0; i < real.n; ++i) {
        const T* r = real.item(i);
        const T* f = fake.item(i);
        T* o = out.item(i);
        for (std::size_t t = 0; t < real.item_size(); ++t)
            o[t] = u[i] * r[t] + (T(1) - u[i]) * f[t];
    }
    return out;
}

template <class T>
double penalty_from_input_grads(const Tensor<T>& g) {
    double acc = 0.0;
    for (int i = 0; i < g.n; ++i) {
        const T* p = g.item(i);
        double sq = 0.0;
        for (std::size_t t = 0; t < g.item_size(); ++t) sq += static_cast<double>(p[t]) * p[t];
        const double d = std::sqrt(sq) - 1.0;
        acc += d * d;
    }
    return acc / g.n;
}

// CriticLike must provide: Tensor<T> input_gradients(const Tensor<T>&) const.
template <class T, class CriticLike>
LossValue gradient_penalty(const CriticLike& critic, const Tensor<T>& real, const Tensor<T>& fake,
                           const std::vector<T>& u) {
    const Tensor<T> xhat = interpolate_batch(real, fake, u);
    const Tensor<T> g = critic.input_gradients(xhat);
    LossValue L;
    L.value = penalty_from_input_grads(g);
    L.components = {{"penalty", L.value}};
    return L;
}

template <class T, class CriticLike>
LossValue gradient_penalty(const CriticLike& critic, const Tensor<T>& real, const Tensor<T>& fake,
                           std::uint64_t seed) {
    return gradient_penalty(critic, real, fake, draw_interpolation_coeffs<T>(real.n, seed));
}

// Adapter giving CriticNet the CriticLike surface.
template <class T>
struct CriticNetRef {
    CriticNet<T>& net;
    Tensor<T> input_gradients(const Tensor<T>& x) const { return critic_input_gradients(net, x); }
};

// Penalty value plus its parameter gradients, accumulated into gnet scaled by
// `scale`. Double-backward realized as a forward pass over the linearized
// critic (direction = d penalty / d gradient) followed by a reverse pass over
// that tangent stream; exact a.e. because the critic is piecewise linear.
template <class T>
double gradient_penalty_with_param_grads(CriticNet<T>& net, const Tensor<T>& real,
                                         const Tensor<T>& fake, const std::vector<T>& u,
                                         CriticNet<T>& gnet, T scale) {
    const Tensor<T> xhat = interpolate_batch(real, fake, u);
    CriticWS<T> ws;
    critic_forward(net, xhat, &ws);
    MatX<T> ones = MatX<T>::Ones(xhat.n, 1);
    Tensor<T> g = critic_backward(net, static_cast<CriticNet<T>*>(nullptr), ws, ones, true);

    double value = 0.0;
    Tensor<T> v(g.n, g.c, g.h, g.w);
    for (int i = 0; i < g.n; ++i) {
        const T* p = g.item(i);
        double sq = 0.0;
        for (std::size_t t = 0; t < g.item_size(); ++t) sq += static_cast<double>(p[t]) * p[t];
        const double norm = std::sqrt(sq);
        const double d = norm - 1.0;
        value += d * d;
        const double coef = norm > 1e-12 ? 2.0 * d / norm : 0.0;
        T* q = v.item(i);
        for (std::size_t t = 0; t < g.item_size(); ++t) q[t] = static_cast<T>(coef * p[t]);
    }
    value /= g.n;

    CriticTangentWS<T> tws;
    critic_tangent_forward(net, ws, v, &tws);
    MatX<T> seeds = MatX<T>::Constant(g.n, 1, scale / static_cast<T>(g.n));
    critic_tangent_backward(net, gnet, ws, tws, seeds);
    return value;
}

// ---------------------------------------------------------------------------
// Critic objective (to minimize over critic parameters):
//   -( mean D(real) - mean D(fake) - lambda * penalty )
// Components expose the signed Wasserstein estimate and the penalty.
// ---------------------------------------------------------------------------

template <class T>
LossValue critic_objective_with_grads(CriticNet<T>& net, const Tensor<T>& real,
                                      const Tensor<T>& fake, T lambda, const std::vector<T>& u,
                                      std::type_identity_t<CriticNet<T>>* gnet) {
    if (lambda < T(0)) throw InputError("critic_objective: lambda must be >= 0");
    require_same_shape(real, fake, "critic_objective");
    CriticWS<T> wsR, wsF;
    MatX<T> sr = critic_forward(net, real, &wsR);
    MatX<T> sf = critic_forward(net, fake, &wsF);
    const double w_est = sr.mean() - sf.mean();

    double penalty;
    if (gnet) {
        MatX<T> dr = MatX<T>::Constant(real.n, 1, T(-1) / static_cast<T>(real.n));
        critic_backward(net, gnet, wsR, dr, false);
        MatX<T> df = MatX<T>::Constant(fake.n, 1, T(1) / static_cast<T>(fake.n));
        critic_backward(net, gnet, wsF, df, false);
        penalty = gradient_penalty_with_param_grads(net, real, fake, u, *gnet, lambda);
    } else {
        penalty = gradient_penalty(CriticNetRef<T>{net}, real, fake, u).value;
    }

    LossValue L;
    L.value = -w_est + static_cast<double>(lambda) * penalty;
    L.components = {{"w_estimate", w_est}, {"penalty", penalty},
                    {"lambda", static_cast<double>(lambda)}};
    return L;
}

template <class T>
LossValue critic_objective(CriticNet<T>& net, const Tensor<T>& real, const Tensor<T>& fake,
                           T lambda, std::uint64_t seed) {
    return critic_objective_with_grads(net, real, fake, lambda,
                                       draw_interpolation_coeffs<T>(real.n, seed), nullptr);
}

// ---------------------------------------------------------------------------
// Generator loss on unpaired data: the generator ascends both critics' scores
// on fakes. Only the fake-dependent part of the W estimates appears; the
// real-data and penalty terms are constant w.r.t. generator parameters.
// ---------------------------------------------------------------------------

template <class T>
LossValue generator_unsup_value(CriticNet<T>& d1, CriticNet<T>& d2, const Tensor<T>& fake1,
                                const Tensor<T>& fake2) {
    if (fake1.n == 0 || fake2.n == 0) throw InputError("generator_unsup_loss: empty batch");
    MatX<T> s1 = critic_forward(d1, fake1, static_cast<CriticWS<T>*>(nullptr));
    MatX<T> s2 = critic_forward(d2, fake2, static_cast<CriticWS<T>*>(nullptr));
    LossValue L;
    const double w1 = -s1.mean(), w2 = -s2.mean();
    L.value = w1 + w2;
    L.components = {{"w1_part", w1}, {"w2_part", w2}};
    return L;
}

// ---------------------------------------------------------------------------
// Full-path losses with parameter gradients. These are the Eq.-level entry
// points used by the trainer and by the finite-difference checks.
// ---------------------------------------------------------------------------

// Supervised reconstruction: encode -> decode -> translate against the real
// pair. Fills gradients for encoder, shared block, decoder tail and translator.
template <class T>
LossValue supervised_loss_with_grads(GeneratorParams<T>& g, const Tensor<T>& i1, const Tensor<T>& i2,
                                     GeneratorParams<T>& grads, bool prior_reg = false,
                                     T prior_weight = T(0.1)) {
    EncodeWS<T> ews;
    MatX<T> z = encode_forward(g.encoder, i1, &ews);
    DecodeWS<T> dws;
    auto drefs = up_refs(g.shared, g.dec_tail);
    Tensor<T> f1 = decode_forward(g.dec_head, drefs, g.cfg, z, &dws);
    TranslateWS<T> tws;
    auto trefs = up_refs(g.shared, g.transl_tail);
    Tensor<T> f2 = translate_forward(g.transl_down, trefs, f1, &tws);

    LossValue L = recon_l1(i1, i2, f1, f2);

    Tensor<T> df2 = l1_grad(f2, i2);
    auto gtrefs = up_refs(grads.shared, grads.transl_tail);
    Tensor<T> df1 = translate_backward(g.transl_down, grads.transl_down, trefs, gtrefs, tws,
                                       std::move(df2));
    {
        Tensor<T> df1_l1 = l1_grad(f1, i1);
        for (std::size_t t = 0; t < df1.size(); ++t) df1.v[t] += df1_l1.v[t];
    }
    auto gdrefs = up_refs(grads.shared, grads.dec_tail);
    MatX<T> dz = decode_backward(g.dec_head, grads.dec_head, drefs, gdrefs, dws, std::move(df1));

    if (prior_reg) {
        // Moment matching of encodings to N(0, I): ||mean||^2 + ||var - 1||^2
        // over latent coordinates (optional, off by default).
        const int n = static_cast<int>(z.rows()), d = static_cast<int>(z.cols());
        Eigen::Matrix<T, 1, Eigen::Dynamic> mu = z.colwise().mean();
        MatX<T> cz = z.rowwise() - mu;
        Eigen::Matrix<T, 1, Eigen::Dynamic> var = cz.array().square().colwise().sum() / T(n);
        double reg = (mu.array().square().sum() + (var.array() - T(1)).square().sum()) / d;
        L.components.push_back({"prior_reg", static_cast<double>(prior_weight) * reg});
        L.value += static_cast<double>(prior_weight) * reg;
        // d reg / dz
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                dz(i, j) += prior_weight *
                            (T(2) * mu(j) / (T(n) * T(d)) +
                             T(4) * (var(j) - T(1)) * cz(i, j) / (T(n) * T(d)));
    }

    encode_backward(g.encoder, grads.encoder, ews, dz);
    return L;
}

// Unsupervised generator loss from latent draws. Fills decoder/translator
// gradients; optionally also the critics' (the loss depends on them even
// though the generator step never applies those).
template <class T>
LossValue unsup_gen_loss_with_grads(GeneratorParams<T>& g, CriticPair<T>& critics, const MatX<T>& z,
                                    GeneratorParams<T>& grads, CriticPair<T>* cgrads = nullptr) {
    DecodeWS<T> dws;
    auto drefs = up_refs(g.shared, g.dec_tail);
    Tensor<T> f1 = decode_forward(g.dec_head, drefs, g.cfg, z, &dws);
    TranslateWS<T> tws;
    auto trefs = up_refs(g.shared, g.transl_tail);
    Tensor<T> f2 = translate_forward(g.transl_down, trefs, f1, &tws);

    CriticWS<T> ws1, ws2;
    MatX<T> s1 = critic_forward(critics.d1, f1, &ws1);
    MatX<T> s2 = critic_forward(critics.d2, f2, &ws2);

    LossValue L;
    const double w1 = -s1.mean(), w2 = -s2.mean();
    L.value = w1 + w2;
    L.components = {{"w1_part", w1}, {"w2_part", w2}};

    const int n = f1.n;
    MatX<T> seed = MatX<T>::Constant(n, 1, T(-1) / static_cast<T>(n));
    Tensor<T> df1_c = critic_backward(critics.d1, cgrads ? &cgrads->d1 : nullptr, ws1, seed, true);
    Tensor<T> df2_c = critic_backward(critics.d2, cgrads ? &cgrads->d2 : nullptr, ws2, seed, true);

    auto gtrefs = up_refs(grads.shared, grads.transl_tail);
    Tensor<T> df1_t = translate_backward(g.transl_down, grads.transl_down, trefs, gtrefs, tws,
                                         std::move(df2_c));
    for (std::size_t t = 0; t < df1_c.size(); ++t) df1_c.v[t] += df1_t.v[t];
    auto gdrefs = up_refs(grads.shared, grads.dec_tail);
    decode_backward(g.dec_head, grads.dec_head, drefs, gdrefs, dws, std::move(df1_c));
    return L;
}

} // namespace bimodal
