#pragma once

#include <array>
#include <cstdint>

namespace multilevel {

// Counter-based random number streams (Philox 4x32-10, Salmon et al. 2011).
//
// A stream is addressed by (key, stream_id, draw). The key carries the seed;
// the 128-bit counter encodes (block, stream_id, draw). Streams with distinct
// addresses are disjoint by construction, which gives reproducible,
// coordination-free parallelism: any worker may generate the stream for
// (level j, draw k) and always obtains the same values.
//
// Address conventions used across the project:
//   - estimator runs use stream_id = level (1..R) and draw = sample index;
//     replication r of a study uses key = master_seed + r (wrapping),
//   - pilot estimation uses stream_id >= 0x80000000 (see analysis.hpp), so
//     pilots can never alias an estimator stream even under the same key.

/// One Philox 4x32-10 block: 128-bit counter + 64-bit key -> 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Random stream for a single (key, stream_id, draw) address.
///
/// Not thread-safe; create one per draw (cheap, no allocation).
class RngStream {
  public:
    RngStream(std::uint64_t key, std::uint32_t stream_id, std::uint64_t draw)
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          stream_id_(stream_id),
          draw_(draw) {}

    std::uint64_t next_u64() {
        if (have_ == 0) refill();
        return out_[--have_];
    }

    /// Uniform on the open interval (0,1), 53-bit resolution.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    /// Standard normal via the inverse CDF, so a draw consumes exactly one
    /// uniform and coupled simulations replay identically.
    double next_gaussian();

  private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_id_;
    std::uint64_t draw_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> out_{};
    int have_ = 0;
};

/// Inverse of the standard normal CDF on (0,1). Accurate to ~1e-15
/// (rational initial guess plus two Halley refinements on erfc).
double inverse_normal_cdf(double p);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace multilevel
