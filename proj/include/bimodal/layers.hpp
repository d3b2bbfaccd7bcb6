#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bimodal/errors.hpp"
#include "bimodal/rng.hpp"
#include "bimodal/tensor.hpp"

namespace bimodal {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Patch matrices are column-major so each (ci,ky,kx) patch column is a
// contiguous, branch-free run over grid positions.
template <class T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// im2col / col2im shared by convolution and transposed convolution.
// Row index = ((item * gh + gy) * gw + gx); column = (ci * k + ky) * k + kx;
// the sampled source coordinate is (gy*stride + ky - pad, gx*stride + kx - pad).
// ---------------------------------------------------------------------------

inline void grid_range(int k_off, int stride, int pad, int limit, int grid, int& lo, int& hi) {
    // valid g: 0 <= g*stride + k_off - pad < limit
    lo = 0;
    while (lo < grid && lo * stride + k_off - pad < 0) ++lo;
    hi = grid - 1;
    while (hi >= 0 && hi * stride + k_off - pad >= limit) --hi;
}

template <class T>
void im2col(const Tensor<T>& src, int k, int stride, int pad, int gh, int gw, ColMat<T>& col) {
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(src.n) * gh * gw;
    col.resize(rows, static_cast<std::ptrdiff_t>(src.c) * k * k);
    for (int ci = 0; ci < src.c; ++ci)
        for (int ky = 0; ky < k; ++ky) {
            int gy_lo, gy_hi;
            grid_range(ky, stride, pad, src.h, gh, gy_lo, gy_hi);
            for (int kx = 0; kx < k; ++kx) {
                int gx_lo, gx_hi;
                grid_range(kx, stride, pad, src.w, gw, gx_lo, gx_hi);
                T* cp = col.data() + (static_cast<std::ptrdiff_t>(ci) * k * k + ky * k + kx) * rows;
                for (int i = 0; i < src.n; ++i) {
                    T* base = cp + static_cast<std::ptrdiff_t>(i) * gh * gw;
                    for (int gy = 0; gy < gy_lo; ++gy)
                        std::fill(base + static_cast<std::ptrdiff_t>(gy) * gw,
                                  base + static_cast<std::ptrdiff_t>(gy + 1) * gw, T(0));
                    for (int gy = gy_hi + 1; gy < gh; ++gy)
                        std::fill(base + static_cast<std::ptrdiff_t>(gy) * gw,
                                  base + static_cast<std::ptrdiff_t>(gy + 1) * gw, T(0));
                    for (int gy = gy_lo; gy <= gy_hi; ++gy) {
                        const T* srow = &src.at(i, ci, gy * stride + ky - pad, 0) + kx - pad;
                        T* drow = base + static_cast<std::ptrdiff_t>(gy) * gw;
                        for (int gx = 0; gx < gx_lo; ++gx) drow[gx] = T(0);
                        for (int gx = gx_lo; gx <= gx_hi; ++gx) drow[gx] = srow[gx * stride];
                        for (int gx = gx_hi + 1; gx < gw; ++gx) drow[gx] = T(0);
                    }
                }
            }
        }
}

template <class T>
void col2im_add(const ColMat<T>& col, int k, int stride, int pad, int gh, int gw, Tensor<T>& dst) {
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(dst.n) * gh * gw;
    for (int ci = 0; ci < dst.c; ++ci)
        for (int ky = 0; ky < k; ++ky) {
            int gy_lo, gy_hi;
            grid_range(ky, stride, pad, dst.h, gh, gy_lo, gy_hi);
            for (int kx = 0; kx < k; ++kx) {
                int gx_lo, gx_hi;
                grid_range(kx, stride, pad, dst.w, gw, gx_lo, gx_hi);
                const T* cp =
                    col.data() + (static_cast<std::ptrdiff_t>(ci) * k * k + ky * k + kx) * rows;
                for (int i = 0; i < dst.n; ++i)
                    for (int gy = gy_lo; gy <= gy_hi; ++gy) {
                        T* drow = &dst.at(i, ci, gy * stride + ky - pad, 0) + kx - pad;
                        const T* srow = cp + (static_cast<std::ptrdiff_t>(i) * gh + gy) * gw;
                        for (int gx = gx_lo; gx <= gx_hi; ++gx) drow[gx * stride] += srow[gx];
                    }
            }
        }
}

// ---------------------------------------------------------------------------
// Parameter blocks. Weight layouts are chosen so every GEMM below is a plain
// row-major product.
// ---------------------------------------------------------------------------

template <class T>
struct Conv2d {
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
    AVec<T> w; // (cin*k*k) x cout, row-major
    AVec<T> b; // cout

    void configure(int cin_, int cout_, int k_, int stride_, int pad_) {
        cin = cin_; cout = cout_; k = k_; stride = stride_; pad = pad_;
        w.assign(static_cast<std::size_t>(cin) * k * k * cout, T(0));
        b.assign(cout, T(0));
    }
    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
        for (T& x : w) x = static_cast<T>(rng.normal() * std);
        for (T& x : b) x = T(0);
    }
    int out_h(int h) const { return (h + 2 * pad - k) / stride + 1; }
};

template <class T>
struct ConvT2d {
    int cin = 0, cout = 0, k = 4, stride = 2, pad = 1;
    AVec<T> w; // cin x (cout*k*k), row-major
    AVec<T> b; // cout

    void configure(int cin_, int cout_, int k_, int stride_, int pad_) {
        cin = cin_; cout = cout_; k = k_; stride = stride_; pad = pad_;
        w.assign(static_cast<std::size_t>(cin) * cout * k * k, T(0));
        b.assign(cout, T(0));
    }
    void init_he(Rng& rng) {
        // fan-in of the adjoint convolution per output element: cin*k*k/stride^2
        const double std = std::sqrt(2.0 * stride * stride / (static_cast<double>(cin) * k * k));
        for (T& x : w) x = static_cast<T>(rng.normal() * std);
        for (T& x : b) x = T(0);
    }
    int out_h(int h) const { return (h - 1) * stride - 2 * pad + k; }
};

template <class T>
struct Dense {
    int in = 0, out = 0;
    AVec<T> w; // in x out, row-major
    AVec<T> b; // out

    void configure(int in_, int out_) {
        in = in_; out = out_;
        w.assign(static_cast<std::size_t>(in) * out, T(0));
        b.assign(out, T(0));
    }
    void init_he(Rng& rng) {
        const double std = std::sqrt(2.0 / static_cast<double>(in));
        for (T& x : w) x = static_cast<T>(rng.normal() * std);
        for (T& x : b) x = T(0);
    }
};

// ---------------------------------------------------------------------------
// Forward / backward kernels. The *_cache structs hold what backward needs.
// ---------------------------------------------------------------------------

template <class T>
struct ConvCache {
    ColMat<T> col; // im2col of the forward input
    int in_h = 0, in_w = 0, n = 0;
};

template <class T>
void conv_forward(const Conv2d<T>& L, const Tensor<T>& x, Tensor<T>& y, ConvCache<T>* cache,
                  bool use_bias = true) {
    const int oh = L.out_h(x.h), ow = L.out_h(x.w);
    y = Tensor<T>(x.n, L.cout, oh, ow);
    ColMat<T> local;
    ColMat<T>& col = cache ? cache->col : local;
    im2col(x, L.k, L.stride, L.pad, oh, ow, col);
    if (cache) {
        cache->in_h = x.h; cache->in_w = x.w; cache->n = x.n;
    }
    Eigen::Map<const MatX<T>> W(L.w.data(), L.cin * L.k * L.k, L.cout);
    const int px = oh * ow;
    for (int i = 0; i < x.n; ++i) {
        // item output planes are contiguous: (cout x px) row-major
        Eigen::Map<MatX<T>> Yi(y.item(i), L.cout, px);
        Yi.noalias() = W.transpose() * col.middleRows(static_cast<Eigen::Index>(i) * px, px).transpose();
    }
    if (use_bias) {
        for (int i = 0; i < y.n; ++i)
            for (int co = 0; co < y.c; ++co) {
                T* p = &y.at(i, co, 0, 0);
                const T bias = L.b[co];
                for (std::size_t t = 0; t < y.plane(); ++t) p[t] += bias;
            }
    }
}

template <class T>
void conv_input_grad(const Conv2d<T>& L, const Tensor<T>& dy, Tensor<T>& dx, int in_h, int in_w) {
    Eigen::Map<const MatX<T>> W(L.w.data(), L.cin * L.k * L.k, L.cout);
    const int px = dy.h * dy.w;
    ColMat<T> dcol(static_cast<Eigen::Index>(dy.n) * px, L.cin * L.k * L.k);
    for (int i = 0; i < dy.n; ++i) {
        Eigen::Map<const MatX<T>> Di(dy.item(i), L.cout, px);
        dcol.middleRows(static_cast<Eigen::Index>(i) * px, px).noalias() = Di.transpose() * W.transpose();
    }
    dx = Tensor<T>(dy.n, L.cin, in_h, in_w);
    col2im_add(dcol, L.k, L.stride, L.pad, dy.h, dy.w, dx);
}

// Accumulates into dw/db (caller zeroes when starting a fresh gradient).
template <class T>
void conv_weight_grad(const Conv2d<T>& L, const ConvCache<T>& cache, const Tensor<T>& dy,
                      AVec<T>& dw, AVec<T>& db, bool with_bias = true) {
    Eigen::Map<MatX<T>> DW(dw.data(), L.cin * L.k * L.k, L.cout);
    const int px = dy.h * dy.w;
    for (int i = 0; i < dy.n; ++i) {
        Eigen::Map<const MatX<T>> Di(dy.item(i), L.cout, px);
        DW.noalias() += cache.col.middleRows(static_cast<Eigen::Index>(i) * px, px).transpose() *
                        Di.transpose();
        if (with_bias) {
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> DB(db.data(), L.cout);
            DB.noalias() += Di.rowwise().sum();
        }
    }
}

template <class T>
struct ConvTCache {
    Tensor<T> x; // forward input
};

template <class T>
void convt_forward(const ConvT2d<T>& L, const Tensor<T>& x, Tensor<T>& y, ConvTCache<T>* cache,
                   bool use_bias = true) {
    const int oh = L.out_h(x.h), ow = L.out_h(x.w);
    y = Tensor<T>(x.n, L.cout, oh, ow);
    Eigen::Map<const MatX<T>> W(L.w.data(), L.cin, L.cout * L.k * L.k);
    const int px = x.h * x.w;
    ColMat<T> scat(static_cast<std::ptrdiff_t>(x.n) * px, L.cout * L.k * L.k); // rows over input grid
    for (int i = 0; i < x.n; ++i) {
        // item channel planes are contiguous: (cin x px) row-major
        Eigen::Map<const MatX<T>> Xi(x.item(i), L.cin, px);
        scat.middleRows(static_cast<Eigen::Index>(i) * px, px).noalias() = Xi.transpose() * W;
    }
    col2im_add(scat, L.k, L.stride, L.pad, x.h, x.w, y);
    if (use_bias) {
        for (int i = 0; i < y.n; ++i)
            for (int co = 0; co < y.c; ++co) {
                T* p = &y.at(i, co, 0, 0);
                const T bias = L.b[co];
                for (std::size_t t = 0; t < y.plane(); ++t) p[t] += bias;
            }
    }
    if (cache) cache->x = x;
}

template <class T>
void convt_input_grad(const ConvT2d<T>& L, const Tensor<T>& dy, Tensor<T>& dx, int in_h, int in_w) {
    // Gather dy at each input-grid position, multiply by W^T.
    ColMat<T> gcol;
    im2col(dy, L.k, L.stride, L.pad, in_h, in_w, gcol); // rows n*in_h*in_w, cols cout*k*k
    Eigen::Map<const MatX<T>> W(L.w.data(), L.cin, L.cout * L.k * L.k);
    dx = Tensor<T>(dy.n, L.cin, in_h, in_w);
    const int px = in_h * in_w;
    for (int i = 0; i < dx.n; ++i) {
        Eigen::Map<MatX<T>> Di(dx.item(i), L.cin, px);
        Di.noalias() = W * gcol.middleRows(static_cast<Eigen::Index>(i) * px, px).transpose();
    }
}

template <class T>
void convt_weight_grad(const ConvT2d<T>& L, const ConvTCache<T>& cache, const Tensor<T>& dy,
                       AVec<T>& dw, AVec<T>& db, bool with_bias = true) {
    const Tensor<T>& x = cache.x;
    ColMat<T> gcol;
    im2col(dy, L.k, L.stride, L.pad, x.h, x.w, gcol); // rows n*h*w, cols cout*k*k
    Eigen::Map<MatX<T>> DW(dw.data(), L.cin, L.cout * L.k * L.k);
    const int px = x.h * x.w;
    for (int i = 0; i < x.n; ++i) {
        Eigen::Map<const MatX<T>> Xi(x.item(i), L.cin, px);
        DW.noalias() += Xi * gcol.middleRows(static_cast<Eigen::Index>(i) * px, px);
    }
    if (with_bias) {
        for (int i = 0; i < dy.n; ++i)
            for (int co = 0; co < dy.c; ++co) {
                const T* p = &dy.at(i, co, 0, 0);
                T acc = T(0);
                for (std::size_t t = 0; t < dy.plane(); ++t) acc += p[t];
                db[co] += acc;
            }
    }
}

template <class T>
struct DenseCache {
    MatX<T> x; // n x in
};

template <class T>
void dense_forward(const Dense<T>& L, const MatX<T>& x, MatX<T>& y, DenseCache<T>* cache,
                   bool use_bias = true) {
    Eigen::Map<const MatX<T>> W(L.w.data(), L.in, L.out);
    y.noalias() = x * W;
    if (use_bias) {
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> B(L.b.data(), L.out);
        y.rowwise() += B.transpose();
    }
    if (cache) cache->x = x;
}

template <class T>
void dense_input_grad(const Dense<T>& L, const MatX<T>& dy, MatX<T>& dx) {
    Eigen::Map<const MatX<T>> W(L.w.data(), L.in, L.out);
    dx.noalias() = dy * W.transpose();
}

template <class T>
void dense_weight_grad(const Dense<T>& L, const DenseCache<T>& cache, const MatX<T>& dy,
                       AVec<T>& dw, AVec<T>& db, bool with_bias = true) {
    Eigen::Map<MatX<T>> DW(dw.data(), L.in, L.out);
    DW.noalias() += cache.x.transpose() * dy;
    if (with_bias) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> DB(db.data(), L.out);
        DB.noalias() += dy.colwise().sum().transpose();
    }
}

// ---------------------------------------------------------------------------
// Activations and instance normalization.
// ---------------------------------------------------------------------------

// Leaky ReLU; mask holds the elementwise slope actually applied, which is also
// the multiplier for both backward and forward-tangent passes.
template <class T>
void leaky_relu_forward(Tensor<T>& x, T alpha, Tensor<T>* mask) {
    if (mask) *mask = Tensor<T>(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = x.v[i] > T(0) ? T(1) : alpha;
        if (mask) mask->v[i] = m;
        x.v[i] *= m;
    }
}

template <class T>
void apply_mask(const Tensor<T>& mask, Tensor<T>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) g.v[i] *= mask.v[i];
}

template <class T>
void tanh_forward(Tensor<T>& x, Tensor<T>* saved_y) {
    for (std::size_t i = 0; i < x.size(); ++i) x.v[i] = std::tanh(x.v[i]);
    if (saved_y) *saved_y = x;
}

template <class T>
void tanh_backward(const Tensor<T>& y, Tensor<T>& dy) {
    for (std::size_t i = 0; i < dy.size(); ++i) dy.v[i] *= (T(1) - y.v[i] * y.v[i]);
}

// Affine-less instance normalization over each (item, channel) plane.
template <class T>
struct InstNormCache {
    AVec<T> inv_std; // n*c
    Tensor<T> y;            // normalized output
};

template <class T>
void instnorm_forward(Tensor<T>& x, InstNormCache<T>* cache, T eps = T(1e-5)) {
    const std::size_t m = x.plane();
    if (cache) cache->inv_std.assign(static_cast<std::size_t>(x.n) * x.c, T(0));
    for (int i = 0; i < x.n; ++i)
        for (int ci = 0; ci < x.c; ++ci) {
            T* p = &x.at(i, ci, 0, 0);
            T mean = T(0);
            for (std::size_t t = 0; t < m; ++t) mean += p[t];
            mean /= static_cast<T>(m);
            T var = T(0);
            for (std::size_t t = 0; t < m; ++t) {
                const T d = p[t] - mean;
                var += d * d;
            }
            var /= static_cast<T>(m);
            const T inv = T(1) / std::sqrt(var + eps);
            for (std::size_t t = 0; t < m; ++t) p[t] = (p[t] - mean) * inv;
            if (cache) cache->inv_std[static_cast<std::size_t>(i) * x.c + ci] = inv;
        }
    if (cache) cache->y = x;
}

template <class T>
void instnorm_backward(const InstNormCache<T>& cache, Tensor<T>& dy) {
    const Tensor<T>& y = cache.y;
    const std::size_t m = y.plane();
    for (int i = 0; i < y.n; ++i)
        for (int ci = 0; ci < y.c; ++ci) {
            T* d = &dy.at(i, ci, 0, 0);
            const T* yp = &y.at(i, ci, 0, 0);
            const T inv = cache.inv_std[static_cast<std::size_t>(i) * y.c + ci];
            T mean_d = T(0), mean_dy_y = T(0);
            for (std::size_t t = 0; t < m; ++t) {
                mean_d += d[t];
                mean_dy_y += d[t] * yp[t];
            }
            mean_d /= static_cast<T>(m);
            mean_dy_y /= static_cast<T>(m);
            for (std::size_t t = 0; t < m; ++t)
                d[t] = inv * (d[t] - mean_d - yp[t] * mean_dy_y);
        }
}

// ---------------------------------------------------------------------------
// Named parameter visitation, the single enumeration mechanism behind the
// optimizer, checkpointing, hashing, and the finite-difference probes.
// ---------------------------------------------------------------------------

template <class T, class Fn>
void visit_params(Conv2d<T>& L, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w", L.w);
    fn(prefix + ".b", L.b);
}
template <class T, class Fn>
void visit_params(ConvT2d<T>& L, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w", L.w);
    fn(prefix + ".b", L.b);
}
template <class T, class Fn>
void visit_params(Dense<T>& L, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".w", L.w);
    fn(prefix + ".b", L.b);
}

} // namespace bimodal
