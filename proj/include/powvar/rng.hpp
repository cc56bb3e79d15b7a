#pragma once

// Counter-based random streams: Philox4x32-10 keyed by the master seed, with
// the stream id in the upper counter words.  Stream r for replication r is
// statistically independent of every other stream and can be consumed from
// any thread without shared state.

#include <array>
#include <cstdint>

#include "powvar/special.hpp"

namespace powvar {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

class Philox4x32 {
  public:
    Philox4x32(std::uint64_t master_seed, std::uint64_t stream) : block_(0), pos_(4) {
        const std::uint64_t k = detail::splitmix64(master_seed);
        key0_ = static_cast<std::uint32_t>(k);
        key1_ = static_cast<std::uint32_t>(k >> 32);
        stream_lo_ = static_cast<std::uint32_t>(stream);
        stream_hi_ = static_cast<std::uint32_t>(stream >> 32);
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) {
            refill();
            pos_ = 0;
        }
        return out_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in the open interval (0,1): 53 mantissa bits, half-ulp offset.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWey0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWey1 = 0xBB67AE85u;

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(block_);
        std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
        std::uint32_t c2 = stream_lo_;
        std::uint32_t c3 = stream_hi_;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
            const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            const std::uint32_t n1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            const std::uint32_t n3 = static_cast<std::uint32_t>(p0);
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kWey0;
            k1 += kWey1;
        }
        out_ = {c0, c1, c2, c3};
        ++block_;
    }

    std::uint32_t key0_, key1_, stream_lo_, stream_hi_;
    std::uint64_t block_;
    std::array<std::uint32_t, 4> out_;
    int pos_;
};

// Standard normal draws via the inverse CDF; fully deterministic per
// (seed, stream) across platforms up to libm's erfc rounding.
class NormalStream {
  public:
    NormalStream(std::uint64_t master_seed, std::uint64_t stream)
        : gen_(master_seed, stream) {}

    double next() { return normal_icdf(gen_.next_uniform()); }

    void fill(double* dst, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = next();
    }

  private:
    Philox4x32 gen_;
};

}  // namespace powvar
