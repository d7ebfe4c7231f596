#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace emu {

/// Synthetic stochastic spectrum generator standing in for an expensive
/// Monte Carlo radiative-transfer code.
///
/// With u_j = j / (d_out - 1) and wavelength 3000 + 6000 u_j, the mean
/// spectrum for parameters p in [0, 1]^12 is
///
///   S(u) = A * (kContinuumBase + exp(-(u - u0)^2 / (2 w^2)))
///            * prod_k (1 - d_k * exp(-(u - c_k)^2 / (2 s_k^2)))
///
///   A   = 1 + p[0]                  amplitude
///   u0  = 0.3 + 0.4 * p[1]          peak position
///   w   = 0.2 + 0.2 * p[2]          peak width
///   d_k = kMaxDepth * p[3 + k]      trough depth, k = 0..8
///   c_k, s_k                        fixed centres and widths below
///
/// A noisy draw multiplies each bin by max(1 + (c / sqrt(P)) xi_j, 0.05),
/// xi_j ~ N(0, 1), mimicking photon-packet shot noise.
namespace simulator_constants {
inline constexpr std::size_t kParamCount = 12;
inline constexpr std::size_t kTroughCount = 9;
inline constexpr double kWavelengthMin = 3000.0;
inline constexpr double kWavelengthMax = 9000.0;
inline constexpr double kContinuumBase = 0.4;
inline constexpr double kMaxDepth = 0.6;
inline constexpr double kNoiseFloor = 0.05;
inline constexpr std::array<double, kTroughCount> kTroughCentre = {0.10, 0.20, 0.30, 0.40, 0.50,
                                                                   0.60, 0.70, 0.80, 0.90};
inline constexpr std::array<double, kTroughCount> kTroughWidth = {0.025, 0.035, 0.030, 0.040, 0.025,
                                                                  0.035, 0.030, 0.040, 0.030};
}  // namespace simulator_constants

struct SimulatorConfig {
  std::size_t d_in = simulator_constants::kParamCount;
  std::size_t d_out = 64;
  /// Monte Carlo fidelity; noise scale is noise_coeff / sqrt(packet_count).
  double packet_count = 1e5;
  double noise_coeff = 1.0;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const SimulatorConfig&, const SimulatorConfig&) = default;
};

std::vector<double> wavelength_grid(const SimulatorConfig& cfg);

/// Noiseless spectrum S(params). Throws InvalidArgument when a parameter lies
/// outside [0, 1] or the vector length is not d_in.
std::vector<double> mean_spectrum(std::span<const double> params, const SimulatorConfig& cfg);

/// One simulator run. With draw_noise the noise comes from a generator seeded
/// by (cfg.seed, draw_index), so draw i is the same whichever order draws are
/// made in.
std::vector<double> simulate_spectrum(std::span<const double> params, const SimulatorConfig& cfg,
                                      bool draw_noise, std::uint64_t draw_index = 0);

}  // namespace emu
