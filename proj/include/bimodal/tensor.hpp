#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal {

// 64-byte-aligned allocator for every numeric buffer. Vectorized kernels peel
// loops based on address alignment; keeping all buffers identically aligned
// makes summation order, and therefore results, independent of where the
// allocator happens to place them (bitwise reproducibility).
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) {}
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    T* allocate(std::size_t n) {
        const std::size_t bytes = (n * sizeof(T) + Align - 1) / Align * Align;
        void* p = std::aligned_alloc(Align, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }
    bool operator==(const AlignedAllocator&) const { return true; }
};

template <class T>
using AVec = std::vector<T, AlignedAllocator<T>>;

// Dense NCHW tensor. Row-major, value semantics.
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    AVec<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t item_size() const { return static_cast<std::size_t>(c) * h * w; }

    T& at(int i, int ci, int y, int x) {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }
    const T& at(int i, int ci, int y, int x) const {
        return v[((static_cast<std::size_t>(i) * c + ci) * h + y) * w + x];
    }

    T* item(int i) { return v.data() + static_cast<std::size_t>(i) * item_size(); }
    const T* item(int i) const { return v.data() + static_cast<std::size_t>(i) * item_size(); }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    bool all_finite() const {
        for (const T& x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b)) throw InputError(std::string("shape mismatch in ") + what);
}

template <class To, class From>
Tensor<To> tensor_cast(const Tensor<From>& x) {
    Tensor<To> y(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = static_cast<To>(x.v[i]);
    return y;
}

} // namespace bimodal
