#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace bimodal {

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Order-sensitive hash over every parameter byte of a network aggregate.
template <class Net>
std::uint64_t hash_params(Net& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    visit_params(net, "", [&](const std::string& name, auto& v) {
        h = fnv1a_bytes(name.data(), name.size(), h);
        h = fnv1a_bytes(v.data(), v.size() * sizeof(v[0]), h);
    });
    return h;
}

} // namespace bimodal
