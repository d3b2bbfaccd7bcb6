#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bimodal/image.hpp"
#include "bimodal/layers.hpp"

namespace bimodal {

// Reference architecture: 64x64 images, latent 128, base 256 channels at the
// 4x4 bottleneck. 32x32 and 128x128 drop/add one up/down layer at each end;
// the shared block is always the first two transposed convolutions counted
// from the coarsest resolution.
struct NetConfig {
    int image_size = 64;
    int latent_dim = 128;
    int base_channels = 256;

    int n_up() const {
        int s = image_size, n = 0;
        while (s > 4) {
            s /= 2;
            ++n;
        }
        return n;
    }

    void validate() const {
        int s = image_size;
        while (s > 4 && s % 2 == 0) s /= 2;
        if (s != 4 || image_size < 32 || image_size > 128)
            throw ConfigError("networks: image_size must be 32, 64 or 128");
        if (latent_dim < 1) throw ConfigError("networks: latent_dim must be >= 1");
        if (base_channels < 16 || base_channels % 8 != 0)
            throw ConfigError("networks: base_channels must be >= 16 and divisible by 8");
    }

    std::string descriptor_core() const {
        return "s" + std::to_string(image_size) + ";z" + std::to_string(latent_dim) + ";b" +
               std::to_string(base_channels);
    }
};

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

// z -> image-of-modality-1 entry: FC to the 4x4 bottleneck.
template <class T>
struct DecHead {
    Dense<T> fc;
    void configure(const NetConfig& c) { fc.configure(c.latent_dim, 16 * c.base_channels); }
};

// The first two upsampling layers, owned once, referenced by both the decoder
// and the translator.
template <class T>
struct SharedUp {
    ConvT2d<T> t1, t2;
    void configure(const NetConfig& c) {
        const int b = c.base_channels;
        t1.configure(b, b / 2, 4, 2, 1);
        t2.configure(b / 2, b / 4, 4, 2, 1);
    }
};

// Remaining upsampling layers after the shared block, down to one channel.
template <class T>
struct UpTail {
    std::vector<ConvT2d<T>> ts;
    void configure(const NetConfig& c) {
        const int b = c.base_channels, n = c.n_up();
        ts.clear();
        for (int j = 3; j <= n; ++j) {
            ConvT2d<T> L;
            L.configure(b >> (j - 1), j == n ? 1 : (b >> j), 4, 2, 1);
            ts.push_back(L);
        }
    }
};

template <class T>
struct EncoderNet {
    Conv2d<T> c1, c2;
    Dense<T> f1, f2;
    void configure(const NetConfig& c) {
        const int b = c.base_channels;
        c1.configure(1, b / 8, 4, 2, 1);
        c2.configure(b / 8, b / 4, 4, 2, 1);
        const int side = c.image_size / 4;
        f1.configure(side * side * (b / 4), 2 * b);
        f2.configure(2 * b, c.latent_dim);
    }
};

template <class T>
struct TranslatorDown {
    std::vector<Conv2d<T>> cs;
    void configure(const NetConfig& c) {
        const int b = c.base_channels, n = c.n_up();
        cs.clear();
        int cin = 1;
        for (int j = 1; j <= n; ++j) {
            Conv2d<T> L;
            const int cout = b >> (n - j);
            L.configure(cin, cout, 4, 2, 1);
            cs.push_back(L);
            cin = cout;
        }
    }
};

// Wasserstein critic: stride-2 convolutions to 4x4, flatten, scalar head.
// Piecewise-linear on purpose (leaky ReLU only, no normalization).
template <class T>
struct CriticNet {
    std::vector<Conv2d<T>> convs;
    Dense<T> fc;
    int image_size = 0, in_channels = 1;

    void configure(const NetConfig& c, int in_ch = 1) {
        image_size = c.image_size;
        in_channels = in_ch;
        const int n = c.n_up(), d0 = std::max(c.base_channels / 8, 4);
        convs.clear();
        int cin = in_ch, ch = d0;
        for (int j = 0; j < n; ++j) {
            Conv2d<T> L;
            L.configure(cin, ch, 4, 2, 1);
            convs.push_back(L);
            cin = ch;
            ch *= 2;
        }
        fc.configure(16 * cin, 1);
    }
};

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

template <class T>
struct GeneratorParams {
    NetConfig cfg;
    EncoderNet<T> encoder;
    DecHead<T> dec_head;
    SharedUp<T> shared; // single storage, referenced by decoder and translator
    UpTail<T> dec_tail;
    TranslatorDown<T> transl_down;
    UpTail<T> transl_tail;

    void configure(const NetConfig& c) {
        c.validate();
        cfg = c;
        encoder.configure(c);
        dec_head.configure(c);
        shared.configure(c);
        dec_tail.configure(c);
        transl_down.configure(c);
        transl_tail.configure(c);
    }

    std::string descriptor() const { return "seqgan-v1;" + cfg.descriptor_core(); }
};

template <class T>
struct CriticPair {
    NetConfig cfg;
    CriticNet<T> d1, d2;
    void configure(const NetConfig& c) {
        cfg = c;
        d1.configure(c);
        d2.configure(c);
    }
};

// Parallel-GAN baseline generator: identical up stack, no sharing.
template <class T>
struct SoloGenerator {
    NetConfig cfg;
    DecHead<T> head;
    SharedUp<T> up12; // owned here, not shared with anything
    UpTail<T> tail;
    void configure(const NetConfig& c) {
        c.validate();
        cfg = c;
        head.configure(c);
        up12.configure(c);
        tail.configure(c);
    }
    std::string descriptor() const { return "pargan-v1;" + cfg.descriptor_core(); }
};

// ---------------------------------------------------------------------------
// Parameter visitation (fixed order: it defines optimizer-state, checkpoint
// and probe layouts).
// ---------------------------------------------------------------------------

template <class T, class Fn>
void visit_params(EncoderNet<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.c1, p + ".c1", fn);
    visit_params(n.c2, p + ".c2", fn);
    visit_params(n.f1, p + ".f1", fn);
    visit_params(n.f2, p + ".f2", fn);
}
template <class T, class Fn>
void visit_params(DecHead<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.fc, p + ".fc", fn);
}
template <class T, class Fn>
void visit_params(SharedUp<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.t1, p + ".t1", fn);
    visit_params(n.t2, p + ".t2", fn);
}
template <class T, class Fn>
void visit_params(UpTail<T>& n, const std::string& p, Fn&& fn) {
    for (std::size_t i = 0; i < n.ts.size(); ++i)
        visit_params(n.ts[i], p + ".t" + std::to_string(i + 3), fn);
}
template <class T, class Fn>
void visit_params(TranslatorDown<T>& n, const std::string& p, Fn&& fn) {
    for (std::size_t i = 0; i < n.cs.size(); ++i)
        visit_params(n.cs[i], p + ".c" + std::to_string(i + 1), fn);
}
template <class T, class Fn>
void visit_params(CriticNet<T>& n, const std::string& p, Fn&& fn) {
    for (std::size_t i = 0; i < n.convs.size(); ++i)
        visit_params(n.convs[i], p + ".c" + std::to_string(i + 1), fn);
    visit_params(n.fc, p + ".fc", fn);
}
template <class T, class Fn>
void visit_params(GeneratorParams<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.encoder, p + ".enc", fn);
    visit_params(n.dec_head, p + ".dec_head", fn);
    visit_params(n.shared, p + ".shared", fn);
    visit_params(n.dec_tail, p + ".dec_tail", fn);
    visit_params(n.transl_down, p + ".transl_down", fn);
    visit_params(n.transl_tail, p + ".transl_tail", fn);
}
template <class T, class Fn>
void visit_params(CriticPair<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.d1, p + ".d1", fn);
    visit_params(n.d2, p + ".d2", fn);
}
template <class T, class Fn>
void visit_params(SoloGenerator<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.head, p + ".head", fn);
    visit_params(n.up12, p + ".up12", fn);
    visit_params(n.tail, p + ".tail", fn);
}

template <class Net>
void zero_params(Net& n) {
    visit_params(n, "", [](const std::string&, auto& v) { std::fill(v.begin(), v.end(), typename std::decay_t<decltype(v)>::value_type(0)); });
}

template <class Net>
std::size_t param_count(Net& n) {
    std::size_t c = 0;
    visit_params(n, "", [&](const std::string&, auto& v) { c += v.size(); });
    return c;
}

// ---------------------------------------------------------------------------
// Seeded initialization. Each block gets its own derived stream so layouts can
// evolve without reshuffling unrelated blocks.
// ---------------------------------------------------------------------------

template <class T>
void init_generator(GeneratorParams<T>& g, std::uint64_t seed) {
    auto init_block = [&](auto& layer, const char* tag) {
        Rng rng(derive_seed(seed, tag));
        layer.init_he(rng);
    };
    init_block(g.encoder.c1, "init/enc.c1");
    init_block(g.encoder.c2, "init/enc.c2");
    init_block(g.encoder.f1, "init/enc.f1");
    init_block(g.encoder.f2, "init/enc.f2");
    init_block(g.dec_head.fc, "init/dec_head.fc");
    init_block(g.shared.t1, "init/shared.t1");
    init_block(g.shared.t2, "init/shared.t2");
    for (std::size_t j = 0; j < g.dec_tail.ts.size(); ++j)
        init_block(g.dec_tail.ts[j], ("init/dec_tail.t" + std::to_string(j)).c_str());
    for (std::size_t j = 0; j < g.transl_down.cs.size(); ++j)
        init_block(g.transl_down.cs[j], ("init/transl_down.c" + std::to_string(j)).c_str());
    for (std::size_t j = 0; j < g.transl_tail.ts.size(); ++j)
        init_block(g.transl_tail.ts[j], ("init/transl_tail.t" + std::to_string(j)).c_str());
}

template <class T>
void init_critics(CriticPair<T>& c, std::uint64_t seed) {
    auto init_net = [&](CriticNet<T>& net, const std::string& tag) {
        for (std::size_t j = 0; j < net.convs.size(); ++j) {
            Rng rng(derive_seed(seed, (tag + ".c" + std::to_string(j)).c_str()));
            net.convs[j].init_he(rng);
        }
        Rng rng(derive_seed(seed, (tag + ".fc").c_str()));
        net.fc.init_he(rng);
    };
    init_net(c.d1, "init/d1");
    init_net(c.d2, "init/d2");
}

template <class T>
void init_solo(SoloGenerator<T>& g, std::uint64_t seed, const char* which) {
    const std::string base = std::string("init/solo-") + which;
    {
        Rng rng(derive_seed(seed, (base + ".fc").c_str()));
        g.head.fc.init_he(rng);
    }
    {
        Rng rng(derive_seed(seed, (base + ".t1").c_str()));
        g.up12.t1.init_he(rng);
    }
    {
        Rng rng(derive_seed(seed, (base + ".t2").c_str()));
        g.up12.t2.init_he(rng);
    }
    for (std::size_t j = 0; j < g.tail.ts.size(); ++j) {
        Rng rng(derive_seed(seed, (base + ".tail" + std::to_string(j)).c_str()));
        g.tail.ts[j].init_he(rng);
    }
}

// ---------------------------------------------------------------------------
// Parallel-GAN baseline: two generators of identical design without weight
// sharing, consuming a common latent vector, plus two critics.
// ---------------------------------------------------------------------------

template <class T>
struct ParallelBaseline {
    SoloGenerator<T> gen_a, gen_b;
    CriticPair<T> critics;
};

template <class T, class Fn>
void visit_params(ParallelBaseline<T>& n, const std::string& p, Fn&& fn) {
    visit_params(n.gen_a, p + ".gen_a", fn);
    visit_params(n.gen_b, p + ".gen_b", fn);
    visit_params(n.critics, p + ".critics", fn);
}

template <class T>
ParallelBaseline<T> build_parallel_baseline(const NetConfig& cfg, std::uint64_t seed) {
    ParallelBaseline<T> p;
    p.gen_a.configure(cfg);
    p.gen_b.configure(cfg);
    p.critics.configure(cfg);
    init_solo(p.gen_a, derive_seed(seed, "solo-a"), "a");
    init_solo(p.gen_b, derive_seed(seed, "solo-b"), "b");
    init_critics(p.critics, derive_seed(seed, "solo-critics"));
    return p;
}

// ---------------------------------------------------------------------------
// Latent sampling
// ---------------------------------------------------------------------------

template <class T>
MatX<T> sample_latent(int n, std::uint64_t seed, int latent_dim) {
    if (n < 1) throw InputError("sample_latent: n must be >= 1");
    Rng rng(derive_seed(seed, "latent"));
    MatX<T> z(n, latent_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < latent_dim; ++j) z(i, j) = static_cast<T>(rng.normal());
    return z;
}

// ---------------------------------------------------------------------------
// Up-stack forward/backward shared by the decoder, the translator's second
// half, and the parallel baseline generators.
// ---------------------------------------------------------------------------

template <class T>
struct UpRefs {
    ConvT2d<T>* t1;
    ConvT2d<T>* t2;
    std::vector<ConvT2d<T>>* tail;
    int count() const { return 2 + static_cast<int>(tail->size()); }
    ConvT2d<T>& layer(int j) { // j in [0, count)
        if (j == 0) return *t1;
        if (j == 1) return *t2;
        return (*tail)[j - 2];
    }
};

template <class T>
UpRefs<T> up_refs(SharedUp<T>& s, UpTail<T>& tail) {
    return UpRefs<T>{&s.t1, &s.t2, &tail.ts};
}

template <class T>
struct UpWS {
    std::vector<ConvTCache<T>> tc;
    std::vector<InstNormCache<T>> ins; // for all but the last layer
    std::vector<Tensor<T>> masks;      // ReLU masks, all but the last layer
    Tensor<T> tanh_y;                  // saved output
};

// in: activation at the 4x4 bottleneck (post IN+ReLU). Returns the [-1,1] image.
template <class T>
Tensor<T> up_forward(UpRefs<T> refs, const Tensor<T>& in, UpWS<T>* ws) {
    const int n_layers = refs.count();
    Tensor<T> a = in;
    if (ws) {
        ws->tc.resize(n_layers);
        ws->ins.resize(n_layers - 1);
        ws->masks.resize(n_layers - 1);
    }
    for (int j = 0; j < n_layers; ++j) {
        Tensor<T> u;
        convt_forward(refs.layer(j), a, u, ws ? &ws->tc[j] : nullptr);
        if (j + 1 < n_layers) {
            instnorm_forward(u, ws ? &ws->ins[j] : nullptr);
            leaky_relu_forward(u, T(0), ws ? &ws->masks[j] : nullptr); // plain ReLU
        } else {
            tanh_forward(u, ws ? &ws->tanh_y : nullptr);
        }
        a = std::move(u);
    }
    return a;
}

// Grad containers mirror the param structs; pass the matching refs.
// d_out is the gradient at the image output; returns gradient at the 4x4 input.
template <class T>
Tensor<T> up_backward(UpRefs<T> refs, UpRefs<T> grefs, const UpWS<T>& ws, Tensor<T> d_out) {
    const int n_layers = refs.count();
    tanh_backward(ws.tanh_y, d_out);
    Tensor<T> d = std::move(d_out);
    for (int j = n_layers - 1; j >= 0; --j) {
        ConvT2d<T>& L = refs.layer(j);
        ConvT2d<T>& G = grefs.layer(j);
        convt_weight_grad(L, ws.tc[j], d, G.w, G.b);
        Tensor<T> d_prev;
        convt_input_grad(L, d, d_prev, ws.tc[j].x.h, ws.tc[j].x.w);
        if (j > 0) {
            apply_mask(ws.masks[j - 1], d_prev);
            instnorm_backward(ws.ins[j - 1], d_prev);
        }
        d = std::move(d_prev);
    }
    return d; // gradient at the bottleneck activation
}

// ---------------------------------------------------------------------------
// Decoder = dense head + up stack.
// ---------------------------------------------------------------------------

template <class T>
struct DecodeWS {
    DenseCache<T> dfc;
    InstNormCache<T> in0;
    Tensor<T> mask0;
    UpWS<T> up;
};

template <class T>
Tensor<T> decode_forward(DecHead<T>& head, UpRefs<T> refs, const NetConfig& cfg, const MatX<T>& z,
                         DecodeWS<T>* ws) {
    MatX<T> h;
    dense_forward(head.fc, z, h, ws ? &ws->dfc : nullptr);
    Tensor<T> a(static_cast<int>(z.rows()), cfg.base_channels, 4, 4);
    std::copy(h.data(), h.data() + h.size(), a.v.begin());
    instnorm_forward(a, ws ? &ws->in0 : nullptr);
    leaky_relu_forward(a, T(0), ws ? &ws->mask0 : nullptr);
    return up_forward(refs, a, ws ? &ws->up : nullptr);
}

// Returns dz.
template <class T>
MatX<T> decode_backward(DecHead<T>& head, DecHead<T>& ghead, UpRefs<T> refs, UpRefs<T> grefs,
                        const DecodeWS<T>& ws, Tensor<T> d_img) {
    Tensor<T> d0 = up_backward(refs, grefs, ws.up, std::move(d_img));
    apply_mask(ws.mask0, d0);
    instnorm_backward(ws.in0, d0);
    MatX<T> dh(d0.n, static_cast<int>(d0.item_size()));
    std::copy(d0.v.begin(), d0.v.end(), dh.data());
    dense_weight_grad(head.fc, ws.dfc, dh, ghead.fc.w, ghead.fc.b);
    MatX<T> dz;
    dense_input_grad(head.fc, dh, dz);
    return dz;
}

// ---------------------------------------------------------------------------
// Translator = down stack + up stack (first two up layers are the shared block).
// ---------------------------------------------------------------------------

template <class T>
struct TranslateWS {
    std::vector<ConvCache<T>> ccs;
    std::vector<InstNormCache<T>> ins; // layers 2..n (index j-1 valid for j>=1)
    std::vector<Tensor<T>> masks;
    std::vector<std::array<int, 2>> in_shapes;
    UpWS<T> up;
};

template <class T>
Tensor<T> translate_forward(TranslatorDown<T>& down, UpRefs<T> refs, const Tensor<T>& img,
                            TranslateWS<T>* ws) {
    const int n = static_cast<int>(down.cs.size());
    if (ws) {
        ws->ccs.resize(n);
        ws->ins.resize(n);
        ws->masks.resize(n);
        ws->in_shapes.resize(n);
    }
    Tensor<T> a = img;
    for (int j = 0; j < n; ++j) {
        if (ws) ws->in_shapes[j] = {a.h, a.w};
        Tensor<T> u;
        conv_forward(down.cs[j], a, u, ws ? &ws->ccs[j] : nullptr);
        if (j > 0) instnorm_forward(u, ws ? &ws->ins[j] : nullptr);
        leaky_relu_forward(u, T(0.2), ws ? &ws->masks[j] : nullptr);
        a = std::move(u);
    }
    return up_forward(refs, a, ws ? &ws->up : nullptr);
}

// Returns the gradient w.r.t. the input image.
template <class T>
Tensor<T> translate_backward(TranslatorDown<T>& down, TranslatorDown<T>& gdown, UpRefs<T> refs,
                             UpRefs<T> grefs, const TranslateWS<T>& ws, Tensor<T> d_img) {
    Tensor<T> d = up_backward(refs, grefs, ws.up, std::move(d_img));
    for (int j = static_cast<int>(down.cs.size()) - 1; j >= 0; --j) {
        apply_mask(ws.masks[j], d);
        if (j > 0) instnorm_backward(ws.ins[j], d);
        conv_weight_grad(down.cs[j], ws.ccs[j], d, gdown.cs[j].w, gdown.cs[j].b);
        Tensor<T> d_prev;
        conv_input_grad(down.cs[j], d, d_prev, ws.in_shapes[j][0], ws.in_shapes[j][1]);
        d = std::move(d_prev);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

template <class T>
struct EncodeWS {
    ConvCache<T> cc1, cc2;
    Tensor<T> m1, m2;
    std::array<int, 2> s0{}, s1{};
    DenseCache<T> df1, df2;
    MatX<T> m3;
};

template <class T>
MatX<T> encode_forward(EncoderNet<T>& enc, const Tensor<T>& img, EncodeWS<T>* ws) {
    Tensor<T> a1, a2;
    if (ws) ws->s0 = {img.h, img.w};
    conv_forward(enc.c1, img, a1, ws ? &ws->cc1 : nullptr);
    leaky_relu_forward(a1, T(0.2), ws ? &ws->m1 : nullptr);
    if (ws) ws->s1 = {a1.h, a1.w};
    conv_forward(enc.c2, a1, a2, ws ? &ws->cc2 : nullptr);
    leaky_relu_forward(a2, T(0.2), ws ? &ws->m2 : nullptr);
    MatX<T> r(a2.n, static_cast<int>(a2.item_size()));
    std::copy(a2.v.begin(), a2.v.end(), r.data());
    MatX<T> h1, z;
    dense_forward(enc.f1, r, h1, ws ? &ws->df1 : nullptr);
    if (ws) ws->m3.resize(h1.rows(), h1.cols());
    for (Eigen::Index i = 0; i < h1.size(); ++i) {
        const T m = h1.data()[i] > T(0) ? T(1) : T(0.2);
        if (ws) ws->m3.data()[i] = m;
        h1.data()[i] *= m;
    }
    dense_forward(enc.f2, h1, z, ws ? &ws->df2 : nullptr);
    return z;
}

template <class T>
void encode_backward(EncoderNet<T>& enc, EncoderNet<T>& genc, const EncodeWS<T>& ws, const MatX<T>& dz) {
    dense_weight_grad(enc.f2, ws.df2, dz, genc.f2.w, genc.f2.b);
    MatX<T> dh1;
    dense_input_grad(enc.f2, dz, dh1);
    dh1.array() *= ws.m3.array();
    dense_weight_grad(enc.f1, ws.df1, dh1, genc.f1.w, genc.f1.b);
    MatX<T> dr;
    dense_input_grad(enc.f1, dh1, dr);
    Tensor<T> d2(static_cast<int>(dr.rows()), enc.c2.cout, ws.s1[0] / 2, ws.s1[1] / 2);
    std::copy(dr.data(), dr.data() + dr.size(), d2.v.begin());
    apply_mask(ws.m2, d2);
    conv_weight_grad(enc.c2, ws.cc2, d2, genc.c2.w, genc.c2.b);
    Tensor<T> d1;
    conv_input_grad(enc.c2, d2, d1, ws.s1[0], ws.s1[1]);
    apply_mask(ws.m1, d1);
    conv_weight_grad(enc.c1, ws.cc1, d1, genc.c1.w, genc.c1.b);
}

// ---------------------------------------------------------------------------
// Critic forward/backward and the tangent machinery used by the gradient
// penalty. The critic is piecewise linear, so the tangent stream reuses the
// leaky-ReLU masks of the primal pass.
// ---------------------------------------------------------------------------

template <class T>
struct CriticWS {
    std::vector<ConvCache<T>> ccs;
    std::vector<Tensor<T>> masks;
    std::vector<std::array<int, 2>> in_shapes;
    DenseCache<T> dfc;
    int flat_c = 0, flat_h = 0, flat_w = 0;
};

template <class T>
MatX<T> critic_forward(CriticNet<T>& net, const Tensor<T>& x, CriticWS<T>* ws) {
    if (x.h != net.image_size || x.c != net.in_channels)
        throw InputError("critic_forward: input shape mismatch");
    const int n = static_cast<int>(net.convs.size());
    if (ws) {
        ws->ccs.resize(n);
        ws->masks.resize(n);
        ws->in_shapes.resize(n);
    }
    Tensor<T> a = x;
    for (int j = 0; j < n; ++j) {
        if (ws) ws->in_shapes[j] = {a.h, a.w};
        Tensor<T> u;
        conv_forward(net.convs[j], a, u, ws ? &ws->ccs[j] : nullptr);
        leaky_relu_forward(u, T(0.2), ws ? &ws->masks[j] : nullptr);
        a = std::move(u);
    }
    if (ws) {
        ws->flat_c = a.c;
        ws->flat_h = a.h;
        ws->flat_w = a.w;
    }
    MatX<T> r(a.n, static_cast<int>(a.item_size()));
    std::copy(a.v.begin(), a.v.end(), r.data());
    MatX<T> s;
    dense_forward(net.fc, r, s, ws ? &ws->dfc : nullptr);
    return s; // n x 1
}

// dscores: n x 1. Computes parameter grads (into gnet, when non-null) and/or
// the gradient w.r.t. the input (returned when want_input).
template <class T>
Tensor<T> critic_backward(CriticNet<T>& net, CriticNet<T>* gnet, const CriticWS<T>& ws,
                          const MatX<T>& dscores, bool want_input) {
    if (gnet) dense_weight_grad(net.fc, ws.dfc, dscores, gnet->fc.w, gnet->fc.b);
    MatX<T> dr;
    dense_input_grad(net.fc, dscores, dr);
    Tensor<T> d(static_cast<int>(dr.rows()), ws.flat_c, ws.flat_h, ws.flat_w);
    std::copy(dr.data(), dr.data() + dr.size(), d.v.begin());
    for (int j = static_cast<int>(net.convs.size()) - 1; j >= 0; --j) {
        apply_mask(ws.masks[j], d);
        if (gnet) conv_weight_grad(net.convs[j], ws.ccs[j], d, gnet->convs[j].w, gnet->convs[j].b);
        if (j == 0 && !want_input) return Tensor<T>();
        Tensor<T> d_prev;
        conv_input_grad(net.convs[j], d, d_prev, ws.in_shapes[j][0], ws.in_shapes[j][1]);
        d = std::move(d_prev);
    }
    return d;
}

template <class T>
struct CriticTangentWS {
    std::vector<ConvCache<T>> ccs; // im2col of tangent activations
    DenseCache<T> dfc;
};

// Propagates a tangent direction v through the linearized critic. Returns the
// per-item directional derivatives v . grad_x D.
template <class T>
MatX<T> critic_tangent_forward(CriticNet<T>& net, const CriticWS<T>& ws, const Tensor<T>& v,
                               CriticTangentWS<T>* tws) {
    const int n = static_cast<int>(net.convs.size());
    if (tws) tws->ccs.resize(n);
    Tensor<T> t = v;
    for (int j = 0; j < n; ++j) {
        Tensor<T> u;
        conv_forward(net.convs[j], t, u, tws ? &tws->ccs[j] : nullptr, /*use_bias=*/false);
        apply_mask(ws.masks[j], u);
        t = std::move(u);
    }
    MatX<T> r(t.n, static_cast<int>(t.item_size()));
    std::copy(t.v.begin(), t.v.end(), r.data());
    MatX<T> s;
    dense_forward(net.fc, r, s, tws ? &tws->dfc : nullptr, /*use_bias=*/false);
    return s;
}

// Reverse pass over the tangent stream: accumulates d(sum_i seed_i * s_i)/dW
// into gnet. Bias gradients are identically zero here and are left untouched.
template <class T>
void critic_tangent_backward(CriticNet<T>& net, CriticNet<T>& gnet, const CriticWS<T>& ws,
                             const CriticTangentWS<T>& tws, const MatX<T>& dseeds) {
    AVec<T> dummy;
    dense_weight_grad(net.fc, tws.dfc, dseeds, gnet.fc.w, dummy, /*with_bias=*/false);
    MatX<T> dr;
    dense_input_grad(net.fc, dseeds, dr);
    Tensor<T> d(static_cast<int>(dr.rows()), ws.flat_c, ws.flat_h, ws.flat_w);
    std::copy(dr.data(), dr.data() + dr.size(), d.v.begin());
    for (int j = static_cast<int>(net.convs.size()) - 1; j >= 0; --j) {
        apply_mask(ws.masks[j], d);
        conv_weight_grad(net.convs[j], tws.ccs[j], d, gnet.convs[j].w, dummy, /*with_bias=*/false);
        if (j == 0) break;
        Tensor<T> d_prev;
        conv_input_grad(net.convs[j], d, d_prev, ws.in_shapes[j][0], ws.in_shapes[j][1]);
        d = std::move(d_prev);
    }
}

// Per-item input gradients of the critic score, as one tensor.
template <class T>
Tensor<T> critic_input_gradients(CriticNet<T>& net, const Tensor<T>& x, CriticWS<T>* ws_out = nullptr) {
    CriticWS<T> local;
    CriticWS<T>& ws = ws_out ? *ws_out : local;
    critic_forward(net, x, &ws);
    MatX<T> ones = MatX<T>::Ones(x.n, 1);
    return critic_backward(net, static_cast<CriticNet<T>*>(nullptr), ws, ones, /*want_input=*/true);
}

// ---------------------------------------------------------------------------
// Convenience single-image wrappers (spec surface).
// ---------------------------------------------------------------------------

template <class T>
std::vector<T> encode_image(GeneratorParams<T>& g, const Image& img) {
    Tensor<T> x = images_to_tensor<T>(std::vector<const Image*>{&img});
    MatX<T> z = encode_forward(g.encoder, x, static_cast<EncodeWS<T>*>(nullptr));
    return std::vector<T>(z.data(), z.data() + z.cols());
}

template <class T>
Tensor<T> decode_batch(GeneratorParams<T>& g, const MatX<T>& z) {
    auto refs = up_refs(g.shared, g.dec_tail);
    return decode_forward(g.dec_head, refs, g.cfg, z, static_cast<DecodeWS<T>*>(nullptr));
}

template <class T>
Tensor<T> translate_batch(GeneratorParams<T>& g, const Tensor<T>& img1) {
    auto refs = up_refs(g.shared, g.transl_tail);
    return translate_forward(g.transl_down, refs, img1, static_cast<TranslateWS<T>*>(nullptr));
}

template <class T>
T critic_score_one(CriticPair<T>& c, int modality_index, const Image& img) {
    if (modality_index != 0 && modality_index != 1)
        throw InputError("critic_score: modality index must be 0 or 1");
    Tensor<T> x = images_to_tensor<T>(std::vector<const Image*>{&img});
    CriticNet<T>& net = modality_index == 0 ? c.d1 : c.d2;
    MatX<T> s = critic_forward(net, x, static_cast<CriticWS<T>*>(nullptr));
    return s(0, 0);
}

} // namespace bimodal
