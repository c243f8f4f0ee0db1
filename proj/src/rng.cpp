#include "qident/rng.hpp"

#include <cmath>

namespace qident {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.28318530717958647693;
constexpr double kInv2Pow53 = 1.0 / 9007199254740992.0;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

CounterRng CounterRng::derive(std::uint64_t master_seed, std::uint64_t trial,
                              std::uint64_t stream) noexcept {
    std::uint64_t k = mix64(master_seed + kGolden);
    k = mix64(k ^ (trial * kGolden + 0x632BE59BD9B4E019ULL));
    k = mix64(k ^ (stream * kGolden + 0x8CB92BA72F3D8DD7ULL));
    return CounterRng(k);
}

std::uint64_t CounterRng::bits_at(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * kGolden);
}

double CounterRng::uniform_at(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits_at(counter) >> 11) * kInv2Pow53;
}

double CounterRng::uniform() noexcept { return uniform_at(counter_++); }

double CounterRng::normal() noexcept {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = static_cast<double>((next_bits() >> 11) + 1) * kInv2Pow53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_normal_ = r * std::sin(kTwoPi * u2);
    has_cached_ = true;
    return r * std::cos(kTwoPi * u2);
}

} // namespace qident
