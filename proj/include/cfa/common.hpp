#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cfa {

inline constexpr const char* kToolVersion = "cfalab 0.1.0";

// Base error for everything raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required input file/directory does not exist. CLI maps this to exit code 2.
struct MissingInputError : Error {
    using Error::Error;
};

// A file exists but its contents are malformed. CLI maps this to exit code 3.
struct DataFormatError : Error {
    using Error::Error;
};

// A domain invariant was violated. CLI maps this to exit code 3.
struct InvariantError : Error {
    using Error::Error;
};

// FNV-1a, used for config hashes embedded in output files.
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

}  // namespace cfa
