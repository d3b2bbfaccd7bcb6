#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/tensor.hpp"

namespace bimodal {

// Adam bound to one parameter aggregate. States are laid out in visitation
// order, so the same visit must be used for step, checkpoint and restore.
template <class T, class Net>
class Adam {
  public:
    Adam() = default;
    Adam(Net& net, T lr, T beta1, T beta2, T eps = T(1e-8))
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        visit_params(net, "", [&](const std::string&, auto& v) {
            m_.emplace_back(v.size(), T(0));
            v_.emplace_back(v.size(), T(0));
        });
    }

    void step(Net& net, Net& grads) {
        ++t_;
        const T bc1 = T(1) - std::pow(b1_, static_cast<T>(t_));
        const T bc2 = T(1) - std::pow(b2_, static_cast<T>(t_));
        std::size_t k = 0;
        // Walk params and grads in lockstep; the two aggregates have identical
        // layouts by construction.
        std::vector<AVec<T>*> gv;
        visit_params(grads, "", [&](const std::string&, auto& v) { gv.push_back(&v); });
        visit_params(net, "", [&](const std::string&, auto& p) {
            AVec<T>& g = *gv[k];
            AVec<T>& m = m_[k];
            AVec<T>& v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = b1_ * m[i] + (T(1) - b1_) * g[i];
                v[i] = b2_ * v[i] + (T(1) - b2_) * g[i] * g[i];
                const T mhat = m[i] / bc1;
                const T vhat = v[i] / bc2;
                p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
            ++k;
        });
    }

    T learning_rate() const { return lr_; }
    std::int64_t iterations() const { return t_; }

    // Serialization hooks for checkpoints.
    std::int64_t t_ = 0;
    std::vector<AVec<T>> m_, v_;
    T lr_ = T(1e-4), b1_ = T(0.5), b2_ = T(0.9), eps_ = T(1e-8);
};

// SGD with momentum and weight decay (classifier harness).
template <class T, class Net>
class SgdMomentum {
  public:
    SgdMomentum() = default;
    SgdMomentum(Net& net, T momentum, T weight_decay) : mom_(momentum), wd_(weight_decay) {
        visit_params(net, "", [&](const std::string&, auto& v) {
            vel_.emplace_back(v.size(), T(0));
        });
    }

    void step(Net& net, Net& grads, T lr) {
        std::size_t k = 0;
        std::vector<AVec<T>*> gv;
        visit_params(grads, "", [&](const std::string&, auto& v) { gv.push_back(&v); });
        visit_params(net, "", [&](const std::string&, auto& p) {
            AVec<T>& g = *gv[k];
            AVec<T>& vel = vel_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const T eff = g[i] + wd_ * p[i];
                vel[i] = mom_ * vel[i] + eff;
                p[i] -= lr * vel[i];
            }
            ++k;
        });
    }

    std::vector<AVec<T>> vel_;
    T mom_ = T(0.9), wd_ = T(1e-4);
};

} // namespace bimodal
