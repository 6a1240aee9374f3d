#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace ccot {

// 64-bit FNV-1a. Used for content addressing, not security.
class fnv1a {
public:
    fnv1a & update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    // length-prefixed so that ("ab","c") and ("a","bc") differ
    fnv1a & field(std::string_view bytes) {
        update(std::to_string(bytes.size()));
        update(":");
        return update(bytes);
    }

    std::uint64_t digest() const noexcept { return state_; }

    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string hash_hex(std::string_view bytes) {
    return fnv1a().update(bytes).hex();
}

} // namespace ccot
