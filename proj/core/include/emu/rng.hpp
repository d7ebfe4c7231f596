#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace emu {

/// Identifier stored in checkpoints so a reader knows which generator
/// produced the recorded seeds.
inline constexpr std::string_view kRngAlgorithm = "xoshiro256**+splitmix64+box-muller/v1";

/// One step of the splitmix64 output function. Used to expand seeds and to
/// derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Deterministic seed for stream `index` of a family rooted at `base`:
/// splitmix64 applied to base + (index + 1) * 0x9E3779B97F4A7C15, then mixed
/// with `tag` so that different uses of the same index never collide.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) noexcept;

/// Tags passed to derive_seed so each consumer of randomness draws from its
/// own stream.
namespace stream {
inline constexpr std::uint64_t kMember = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kShuffle = 3;
inline constexpr std::uint64_t kParams = 4;
inline constexpr std::uint64_t kNoise = 5;
inline constexpr std::uint64_t kSplit = 6;
}  // namespace stream

/// xoshiro256** (Blackman & Vigna). Every draw is defined bit-for-bit here,
/// so sequences are identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform integer on [0, bound) by rejection; bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept;

  /// Standard normal via the Box-Muller transform (one output per call).
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace emu
