#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bimodal/losses.hpp"
#include "bimodal/networks.hpp"

namespace bimodal::testutil {

template <class T>
Tensor<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
    Tensor<T> t(n, c, h, w);
    Rng rng(seed);
    for (auto& v : t.v) v = static_cast<T>(rng.normal() * scale);
    return t;
}

template <class T>
struct ParamRef {
    std::string name;
    AVec<T>* vec;
};

template <class T, class Net>
std::vector<ParamRef<T>> collect_params(Net& net) {
    std::vector<ParamRef<T>> out;
    visit_params(net, "", [&](const std::string& name, AVec<T>& v) {
        out.push_back({name, &v});
    });
    return out;
}

// Central finite difference of a scalar function w.r.t. one stored parameter.
template <class Vec>
double central_diff(Vec& vec, std::size_t idx, double h,
                    const std::function<double()>& f) {
    using T = typename Vec::value_type;
    const T orig = vec[idx];
    vec[idx] = orig + static_cast<T>(h);
    const double fp = f();
    vec[idx] = orig - static_cast<T>(h);
    const double fm = f();
    vec[idx] = orig;
    return (fp - fm) / (2.0 * h);
}

inline bool rel_close(double a, double b, double rel_tol, double abs_tol = 1e-9) {
    const double diff = std::abs(a - b);
    return diff <= abs_tol || diff <= rel_tol * std::max(std::abs(a), std::abs(b));
}

// Closed-form critics for the gradient-penalty oracles.
template <class T>
struct LinearCritic {
    std::vector<T> w; // flattened, same size as one input item
    Tensor<T> input_gradients(const Tensor<T>& x) const {
        Tensor<T> g(x.n, x.c, x.h, x.w);
        for (int i = 0; i < x.n; ++i) {
            T* p = g.item(i);
            for (std::size_t t = 0; t < g.item_size(); ++t) p[t] = w[t];
        }
        return g;
    }
    double score(const Tensor<T>& x, int i) const {
        double s = 0.0;
        const T* p = x.item(i);
        for (std::size_t t = 0; t < x.item_size(); ++t) s += static_cast<double>(w[t]) * p[t];
        return s;
    }
};

template <class T>
struct ConstantCritic {
    Tensor<T> input_gradients(const Tensor<T>& x) const {
        return Tensor<T>(x.n, x.c, x.h, x.w); // all zeros
    }
};

} // namespace bimodal::testutil
