#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace spectral {

// Philox4x64-10 counter-based generator (Salmon et al., Random123).
//
// The 64-bit seed becomes the first key word; the counter starts at zero and
// is incremented before each block, which matches numpy.random.Philox, so
// streams can be cross-checked against an independent implementation.
// Satisfies UniformRandomBitGenerator.
class Philox4x64 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  explicit Philox4x64(std::uint64_t seed = 0) noexcept : key_{seed, 0} {}
  Philox4x64(Key key, Block counter) noexcept : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (used_ == 4) {
      increment();
      buffer_ = generate_block(counter_, key_);
      used_ = 0;
    }
    return buffer_[used_++];
  }

  // The raw bijection: ten Philox rounds applied to `counter` under `key`.
  static Block generate_block(Block counter, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const auto [hi0, lo0] = mulhilo(kMul0, counter[0]);
      const auto [hi1, lo1] = mulhilo(kMul1, counter[2]);
      counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return counter;
  }

 private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  struct HiLo {
    std::uint64_t hi;
    std::uint64_t lo;
  };

  static HiLo mulhilo(std::uint64_t a, std::uint64_t b) noexcept {
    const unsigned __int128 product = static_cast<unsigned __int128>(a) * b;
    return {static_cast<std::uint64_t>(product >> 64), static_cast<std::uint64_t>(product)};
  }

  void increment() noexcept {
    for (auto& word : counter_) {
      if (++word != 0) break;
    }
  }

  Key key_{};
  Block counter_{};
  Block buffer_{};
  int used_ = 4;
};

// Every sampler in the library takes an explicit seed and builds one of these.
// Normal draws go through std::normal_distribution, so streams are
// bit-reproducible for a fixed standard library.
using Rng = Philox4x64;

}  // namespace spectral
