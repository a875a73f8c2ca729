#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gtlm {

// All failures surface as GtlmError with a short machine-readable code
// ("DuplicateEdge", "ParseError", ...) plus a human message.
class GtlmError : public std::runtime_error {
public:
    GtlmError(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw GtlmError(code, message);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Derives an independent stream from a base seed; used to keep dataset
// splits and per-example draws decoupled.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace gtlm
