#pragma once

#include <cstdint>

namespace qident {

/// Counter-based random stream. Draw i is a pure function of (key, i), so a
/// stream can be re-derived anywhere from (master seed, trial, stream id) and
/// the output does not depend on platform or standard-library version.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    /// Independent substream for one (trial, purpose) pair.
    static CounterRng derive(std::uint64_t master_seed, std::uint64_t trial,
                             std::uint64_t stream) noexcept;

    std::uint64_t key() const noexcept { return key_; }

    /// Raw 64-bit value at an absolute counter position; does not advance.
    std::uint64_t bits_at(std::uint64_t counter) const noexcept;
    /// Uniform in [0, 1) at an absolute counter position; does not advance.
    double uniform_at(std::uint64_t counter) const noexcept;

    std::uint64_t next_bits() noexcept { return bits_at(counter_++); }
    /// Uniform in [0, 1).
    double uniform() noexcept;
    /// Standard normal via Box-Muller; the paired variate is cached.
    double normal() noexcept;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

} // namespace qident
