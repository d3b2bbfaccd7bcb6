#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bimodal/image.hpp"
#include "bimodal/layers.hpp"
#include "bimodal/metrics.hpp"
#include "bimodal/optimizer.hpp"
#include "bimodal/trainer.hpp"

namespace bimodal {

struct LabeledPair {
    ImagePair pair;
    int label = 0; // {0,1}
};

struct ClassifierConfig {
    double learning_rate = 0.01;
    double lr_decay_factor = 0.99;
    int lr_decay_every = 30; // steps
    int batch_size = 64;
    double weight_decay = 1e-4;
    int iterations = 2000; // reference 10000
    double momentum = 0.9;
    std::uint64_t seed = 0;
    int runs = 5;
    int channels_base = 8;

    void validate() const {
        if (learning_rate <= 0 || lr_decay_factor <= 0 || lr_decay_every < 1 || batch_size < 1 ||
            weight_decay < 0 || iterations < 1 || runs < 1 || channels_base < 2)
            throw ConfigError("classifier: invalid configuration value");
    }

    double lr_at(int step) const {
        return learning_rate * std::pow(lr_decay_factor, step / lr_decay_every);
    }
};

// Small binary CNN: 4 stride-2 convolutions, global average pooling, a single
// logit. in_channels = 2 for concatenated pairs, 1 for single-modality label
// models.
template <class T>
struct ClassifierNet {
    std::vector<Conv2d<T>> convs;
    Dense<T> fc;
    int image_size = 0, in_channels = 2;

    void configure(int image_size_, int in_channels_, int base) {
        image_size = image_size_;
        in_channels = in_channels_;
        convs.clear();
        int cin = in_channels_, ch = base;
        for (int j = 0; j < 4; ++j) {
            Conv2d<T> L;
            L.configure(cin, ch, 4, 2, 1);
            convs.push_back(L);
            cin = ch;
            ch *= 2;
        }
        fc.configure(cin, 1);
    }

    std::string descriptor() const {
        return "clf-v1;s" + std::to_string(image_size) + ";in" + std::to_string(in_channels) +
               ";b" + std::to_string(convs.empty() ? 0 : convs[0].cout);
    }
};

template <class T, class Fn>
void visit_params(ClassifierNet<T>& n, const std::string& p, Fn&& fn) {
    for (std::size_t i = 0; i < n.convs.size(); ++i)
        visit_params(n.convs[i], p + ".c" + std::to_string(i + 1), fn);
    visit_params(n.fc, p + ".fc", fn);
}

template <class T>
void init_classifier(ClassifierNet<T>& net, std::uint64_t seed) {
    for (std::size_t j = 0; j < net.convs.size(); ++j) {
        Rng rng(derive_seed(seed, "clf-init", j));
        net.convs[j].init_he(rng);
    }
    Rng rng(derive_seed(seed, "clf-init-fc"));
    net.fc.init_he(rng);
}

template <class T>
struct ClassifierWS {
    std::vector<ConvCache<T>> ccs;
    std::vector<Tensor<T>> masks;
    std::vector<std::array<int, 2>> in_shapes;
    DenseCache<T> dfc;
    int gap_c = 0, gap_h = 0, gap_w = 0;
};

template <class T>
MatX<T> classifier_logits(ClassifierNet<T>& net, const Tensor<T>& x, ClassifierWS<T>* ws) {
    if (x.c != net.in_channels || x.h != net.image_size)
        throw InputError("classifier: input shape mismatch");
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
        ws->gap_c = a.c;
        ws->gap_h = a.h;
        ws->gap_w = a.w;
    }
    MatX<T> pooled(a.n, a.c);
    for (int i = 0; i < a.n; ++i)
        for (int ci = 0; ci < a.c; ++ci) {
            const T* p = &a.at(i, ci, 0, 0);
            T acc = T(0);
            for (std::size_t t = 0; t < a.plane(); ++t) acc += p[t];
            pooled(i, ci) = acc / static_cast<T>(a.plane());
        }
    MatX<T> s;
    dense_forward(net.fc, pooled, s, ws ? &ws->dfc : nullptr);
    return s;
}

template <class T>
void classifier_backward(ClassifierNet<T>& net, ClassifierNet<T>& gnet, const ClassifierWS<T>& ws,
                         const MatX<T>& dlogits) {
    dense_weight_grad(net.fc, ws.dfc, dlogits, gnet.fc.w, gnet.fc.b);
    MatX<T> dpool;
    dense_input_grad(net.fc, dlogits, dpool);
    Tensor<T> d(static_cast<int>(dpool.rows()), ws.gap_c, ws.gap_h, ws.gap_w);
    const T inv = T(1) / static_cast<T>(ws.gap_h * ws.gap_w);
    for (int i = 0; i < d.n; ++i)
        for (int ci = 0; ci < d.c; ++ci) {
            T* p = &d.at(i, ci, 0, 0);
            const T g = dpool(i, ci) * inv;
            for (std::size_t t = 0; t < d.plane(); ++t) p[t] = g;
        }
    for (int j = static_cast<int>(net.convs.size()) - 1; j >= 0; --j) {
        apply_mask(ws.masks[j], d);
        conv_weight_grad(net.convs[j], ws.ccs[j], d, gnet.convs[j].w, gnet.convs[j].b);
        if (j == 0) break;
        Tensor<T> d_prev;
        conv_input_grad(net.convs[j], d, d_prev, ws.in_shapes[j][0], ws.in_shapes[j][1]);
        d = std::move(d_prev);
    }
}

struct ClassifierStepRecord {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

// Trains on tensors (n, in_channels, s, s) with binary labels. SGD with
// momentum, weight decay, and the stepped learning-rate decay.
template <class T>
ClassifierNet<T> train_classifier_core(const ClassifierConfig& cfg, const Tensor<T>& X,
                                       const std::vector<int>& y, int image_size, int in_channels,
                                       std::vector<ClassifierStepRecord>* log = nullptr) {
    cfg.validate();
    if (X.n != static_cast<int>(y.size())) throw InputError("classifier: X/y size mismatch");
    bool has0 = false, has1 = false;
    for (int v : y) (v ? has1 : has0) = true;
    if (!has0 || !has1) throw InputError("classifier: training set must contain both labels");

    ClassifierNet<T> net, grads;
    net.configure(image_size, in_channels, cfg.channels_base);
    grads.configure(image_size, in_channels, cfg.channels_base);
    init_classifier(net, cfg.seed);
    SgdMomentum<T, ClassifierNet<T>> opt(net, T(cfg.momentum), T(cfg.weight_decay));

    IndexStream stream(static_cast<std::size_t>(X.n), cfg.seed, "clf-batches");
    const int b = std::min(cfg.batch_size, X.n);
    Tensor<T> batch(b, in_channels, image_size, image_size);
    std::vector<int> yb(b);
    for (int step = 0; step < cfg.iterations; ++step) {
        for (int j = 0; j < b; ++j) {
            const std::size_t idx = stream.at(static_cast<std::uint64_t>(step) * b + j);
            std::copy(X.item(static_cast<int>(idx)), X.item(static_cast<int>(idx)) + X.item_size(),
                      batch.item(j));
            yb[j] = y[idx];
        }
        ClassifierWS<T> ws;
        MatX<T> s = classifier_logits(net, batch, &ws);
        double loss = 0.0;
        MatX<T> ds(b, 1);
        for (int i = 0; i < b; ++i) {
            const double si = s(i, 0);
            loss += std::max(si, 0.0) - si * yb[i] + std::log1p(std::exp(-std::abs(si)));
            const double sig = 1.0 / (1.0 + std::exp(-si));
            ds(i, 0) = static_cast<T>((sig - yb[i]) / b);
        }
        loss /= b;
        if (!std::isfinite(loss)) throw NumericError("classifier: non-finite loss");
        zero_params(grads);
        classifier_backward(net, grads, ws, ds);
        const double lr = cfg.lr_at(step);
        opt.step(net, grads, T(lr));
        if (log) log->push_back({step, lr, loss});
    }
    return net;
}

template <class T>
ClassifierNet<T> train_classifier(const ClassifierConfig& cfg, const std::vector<LabeledPair>& train_set,
                                  std::vector<ClassifierStepRecord>* log = nullptr) {
    if (train_set.empty()) throw InputError("classifier: empty training set");
    std::vector<const ImagePair*> pairs;
    std::vector<int> y;
    for (const auto& lp : train_set) {
        pairs.push_back(&lp.pair);
        y.push_back(lp.label);
    }
    Tensor<T> X = pairs_to_tensor<T>(pairs);
    return train_classifier_core(cfg, X, y, X.h, 2, log);
}

template <class T>
std::vector<double> classifier_probs(ClassifierNet<T>& net, const Tensor<T>& X) {
    std::vector<double> out;
    const int chunk = 256;
    for (int done = 0; done < X.n; done += chunk) {
        const int b = std::min(chunk, X.n - done);
        Tensor<T> slice(b, X.c, X.h, X.w);
        std::copy(X.item(done), X.item(done) + static_cast<std::size_t>(b) * X.item_size(),
                  slice.v.begin());
        MatX<T> s = classifier_logits(net, slice, static_cast<ClassifierWS<T>*>(nullptr));
        for (int i = 0; i < b; ++i) out.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(s(i, 0)))));
    }
    return out;
}

// Fraction correct at the 0.5 probability threshold.
template <class T>
double evaluate_accuracy(ClassifierNet<T>& net, const std::vector<LabeledPair>& test_set) {
    if (test_set.empty()) throw InputError("evaluate_accuracy: empty test set");
    std::vector<const ImagePair*> pairs;
    for (const auto& lp : test_set) pairs.push_back(&lp.pair);
    Tensor<T> X = pairs_to_tensor<T>(pairs);
    const auto probs = classifier_probs(net, X);
    int correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = probs[i] > 0.5 ? 1 : 0;
        if (pred == test_set[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

// The paper's protocol: `runs` classifiers trained on synthetic positives plus
// real negatives with derived seeds, all evaluated on the same held-out real
// test set. Returns mean +- population std of the accuracies.
template <class T>
GroupedScore run_protocol(const ClassifierConfig& cfg, const std::vector<ImagePair>& syn_positives,
                          const std::vector<ImagePair>& real_negatives,
                          const std::vector<LabeledPair>& test_set,
                          std::vector<double>* accuracies_out = nullptr) {
    std::vector<LabeledPair> train_set;
    for (const auto& p : syn_positives) train_set.push_back({p, 1});
    for (const auto& p : real_negatives) train_set.push_back({p, 0});
    std::vector<double> accs;
    for (int r = 0; r < cfg.runs; ++r) {
        ClassifierConfig run_cfg = cfg;
        run_cfg.seed = derive_seed(cfg.seed, "protocol-run", static_cast<std::uint64_t>(r));
        ClassifierNet<T> net = train_classifier<T>(run_cfg, train_set);
        accs.push_back(evaluate_accuracy(net, test_set));
    }
    if (accuracies_out) *accuracies_out = accs;
    return grouped_stats(std::move(accs), "classification_accuracy");
}

// Single-modality label model used by the inception score.
template <class T>
ClassifierNet<T> train_label_model(const ClassifierConfig& cfg, const std::vector<const Image*>& imgs,
                                   const std::vector<int>& labels) {
    Tensor<T> X = images_to_tensor<T>(imgs);
    return train_classifier_core(cfg, X, labels, X.h, 1);
}

template <class T>
std::vector<LabelDistribution> label_conditionals(ClassifierNet<T>& net,
                                                  const std::vector<const Image*>& imgs) {
    Tensor<T> X = images_to_tensor<T>(imgs);
    const auto probs = classifier_probs(net, X);
    std::vector<LabelDistribution> out;
    for (double p : probs) out.push_back({{1.0 - p, p}});
    return out;
}

} // namespace bimodal
