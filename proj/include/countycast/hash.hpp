#pragma once

#include <cstdint>
#include <string_view>

namespace countycast {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL) {
    std::uint64_t h = seed;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace countycast
