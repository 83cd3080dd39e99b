#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace otblab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A stream is identified by a 64-bit key (the seed) and a 64-bit stream id
/// stored in the upper half of the 128-bit counter; the lower half counts
/// blocks. Every output is a pure function of (seed, stream, position), so
/// results are reproducible across platforms and across any partition of
/// work into streams.
class Philox {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox(std::uint64_t seed, std::uint64_t stream);

  /// Raw block function; exposed for known-answer tests.
  static Block block(Block counter, Key key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller (one draw per call, no cached spare).
  double normal();

  /// Index drawn from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> probs);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int used_ = 4;
};

/// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Order-sensitive combination of two seeds.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t child);

}  // namespace otblab
