#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/optimizer.hpp"

namespace bimodal {

// Versioned binary checkpoint container. Layout is strictly sequential; the
// reader must reconstruct objects in the same order they were appended, and
// every block carries its name and size for integrity checking. Loading
// refuses to proceed on a descriptor mismatch.

inline constexpr char kCkptMagic[8] = {'B', 'M', 'S', 'Y', 'N', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCkptVersion = 1;

struct BinWriter {
    std::vector<unsigned char> buf;

    void raw(const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void u32(std::uint32_t x) { raw(&x, 4); }
    void u64(std::uint64_t x) { raw(&x, 8); }
    void i64(std::int64_t x) { raw(&x, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    template <class Vec>
    void vec(const Vec& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(typename Vec::value_type));
    }
};

struct BinReader {
    const unsigned char* p;
    const unsigned char* end;

    void raw(void* out, std::size_t n) {
        if (p + n > end) throw InputError("checkpoint: truncated file");
        std::memcpy(out, p, n);
        p += n;
    }
    std::uint32_t u32() { std::uint32_t x; raw(&x, 4); return x; }
    std::uint64_t u64() { std::uint64_t x; raw(&x, 8); return x; }
    std::int64_t i64() { std::int64_t x; raw(&x, 8); return x; }
    std::string str() {
        const auto n = u32();
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    template <class Vec>
    void vec(Vec& v) {
        const auto n = u64();
        v.resize(n);
        raw(v.data(), n * sizeof(typename Vec::value_type));
    }
};

template <class T, class Net>
void ckpt_append_net(BinWriter& w, const std::string& tag, Net& net) {
    w.str(tag);
    std::uint32_t nblocks = 0;
    visit_params(net, tag, [&](const std::string&, auto&) { ++nblocks; });
    w.u32(nblocks);
    visit_params(net, tag, [&](const std::string& name, auto& v) {
        for (const T& x : v)
            if (!std::isfinite(static_cast<double>(x)))
                throw NumericError("checkpoint: non-finite value in " + name);
        w.str(name);
        w.vec(v);
    });
}

template <class T, class Net>
void ckpt_read_net(BinReader& r, const std::string& tag, Net& net) {
    if (r.str() != tag) throw InputError("checkpoint: expected section " + tag);
    std::uint32_t nblocks = r.u32();
    std::uint32_t seen = 0;
    visit_params(net, tag, [&](const std::string& name, auto& v) {
        const std::string got = r.str();
        if (got != name) throw InputError("checkpoint: block order mismatch at " + name);
        AVec<T> data;
        r.vec(data);
        if (data.size() != v.size())
            throw InputError("checkpoint: block size mismatch at " + name);
        v = std::move(data);
        ++seen;
    });
    if (seen != nblocks) throw InputError("checkpoint: block count mismatch in " + tag);
}

template <class T, class Net>
void ckpt_append_adam(BinWriter& w, const std::string& tag, const Adam<T, Net>& opt) {
    w.str(tag);
    w.i64(opt.t_);
    w.u32(static_cast<std::uint32_t>(opt.m_.size()));
    for (std::size_t i = 0; i < opt.m_.size(); ++i) {
        w.vec(opt.m_[i]);
        w.vec(opt.v_[i]);
    }
}

template <class T, class Net>
void ckpt_read_adam(BinReader& r, const std::string& tag, Adam<T, Net>& opt) {
    if (r.str() != tag) throw InputError("checkpoint: expected optimizer " + tag);
    opt.t_ = r.i64();
    const std::uint32_t n = r.u32();
    if (n != opt.m_.size()) throw InputError("checkpoint: optimizer state count mismatch in " + tag);
    for (std::size_t i = 0; i < n; ++i) {
        AVec<T> m, v;
        r.vec(m);
        r.vec(v);
        if (m.size() != opt.m_[i].size() || v.size() != opt.v_[i].size())
            throw InputError("checkpoint: optimizer state size mismatch in " + tag);
        opt.m_[i] = std::move(m);
        opt.v_[i] = std::move(v);
    }
}

inline void ckpt_begin(BinWriter& w, const std::string& descriptor, std::uint64_t seed,
                       std::uint64_t iteration, std::uint32_t scalar_size) {
    w.raw(kCkptMagic, 8);
    w.u32(kCkptVersion);
    w.u32(scalar_size);
    w.str(descriptor);
    w.u64(seed);
    w.u64(iteration);
}

struct CkptHeader {
    std::string descriptor;
    std::uint64_t seed = 0;
    std::uint64_t iteration = 0;
};

inline CkptHeader ckpt_read_header(BinReader& r, const std::string& expected_descriptor,
                                   std::uint32_t scalar_size) {
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0) throw InputError("checkpoint: bad magic");
    if (r.u32() != kCkptVersion) throw InputError("checkpoint: unsupported version");
    if (r.u32() != scalar_size) throw DescriptorMismatch("checkpoint: scalar width mismatch");
    CkptHeader h;
    h.descriptor = r.str();
    if (!expected_descriptor.empty() && h.descriptor != expected_descriptor)
        throw DescriptorMismatch("checkpoint descriptor '" + h.descriptor +
                                 "' does not match expected '" + expected_descriptor + "'");
    h.seed = r.u64();
    h.iteration = r.u64();
    return h;
}

inline void write_file_atomic(const std::string& path, const std::vector<unsigned char>& buf) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write checkpoint: " + tmp);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    fs::rename(tmp, path);
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint: " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

} // namespace bimodal
