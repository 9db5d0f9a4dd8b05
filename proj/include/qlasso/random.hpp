#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace qlasso {

namespace detail {

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Purpose tags separating the substreams of one Monte Carlo trial.
enum class StreamTag : std::uint64_t {
    signal = 1,
    matrix = 2,
    dither = 3,
    directions = 4,
    gaussian_width = 5,
    check = 6,
};

/// Counter-based random stream: the i-th output is a fixed bijective mix of
/// (key, i), so a stream is fully described by its 64-bit key and position.
/// Substreams are derived by hashing the parent key with an index, which keeps
/// parallel Monte Carlo trials reproducible regardless of scheduling.
///
/// Satisfies UniformRandomBitGenerator, so it plugs into <random>
/// distributions.
class Stream {
  public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t key = 0) noexcept : key_{key} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        return detail::mix64(key_ + detail::golden_gamma * ++counter_);
    }

    /// Independent child stream keyed by (this key, index).
    [[nodiscard]] Stream substream(std::uint64_t index) const noexcept {
        return Stream{derive(key_, index)};
    }
    [[nodiscard]] Stream substream(StreamTag tag) const noexcept {
        return substream(static_cast<std::uint64_t>(tag));
    }
    [[nodiscard]] Stream
    substream(std::initializer_list<std::uint64_t> path) const noexcept {
        std::uint64_t k = key_;
        for (auto i : path)
            k = derive(k, i);
        return Stream{k};
    }

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

    /// Uniform double on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    double normal() { return normal_(*this); }

    /// +1 or -1 with equal probability.
    double sign() noexcept { return ((*this)() >> 63) ? 1.0 : -1.0; }

  private:
    static constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t index) noexcept {
        return detail::mix64(detail::mix64(key ^ 0x6a09e667f3bcc909ULL) +
                             detail::golden_gamma * (index + 1));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{};
};

/// Root stream of an experiment.
inline Stream master_stream(std::uint64_t seed) noexcept {
    return Stream{detail::mix64(seed)};
}

} // namespace qlasso
