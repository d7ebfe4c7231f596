#include "emu/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emu/errors.hpp"
#include "emu/rng.hpp"

namespace emu {

namespace sc = simulator_constants;

void SimulatorConfig::validate() const {
  if (d_in != sc::kParamCount) {
    throw InvalidArgument("SimulatorConfig: d_in must be " + std::to_string(sc::kParamCount));
  }
  if (d_out < 8) throw InvalidArgument("SimulatorConfig: d_out must be >= 8");
  if (!(packet_count >= 1.0) || !std::isfinite(packet_count)) {
    throw InvalidArgument("SimulatorConfig: packet_count must be >= 1");
  }
  if (!(noise_coeff >= 0.0) || !std::isfinite(noise_coeff)) {
    throw InvalidArgument("SimulatorConfig: noise_coeff must be >= 0");
  }
}

std::vector<double> wavelength_grid(const SimulatorConfig& cfg) {
  cfg.validate();
  std::vector<double> grid(cfg.d_out);
  const double last = static_cast<double>(cfg.d_out - 1);
  for (std::size_t j = 0; j < cfg.d_out; ++j) {
    grid[j] = sc::kWavelengthMin +
              (sc::kWavelengthMax - sc::kWavelengthMin) * (static_cast<double>(j) / last);
  }
  return grid;
}

std::vector<double> mean_spectrum(std::span<const double> params, const SimulatorConfig& cfg) {
  cfg.validate();
  if (params.size() != cfg.d_in) {
    throw InvalidArgument("simulate_spectrum: expected " + std::to_string(cfg.d_in) +
                          " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i] >= 0.0 && params[i] <= 1.0)) {
      throw InvalidArgument("simulate_spectrum: parameter " + std::to_string(i) +
                            " outside [0, 1]");
    }
  }
  const double amplitude = 1.0 + params[0];
  const double peak = 0.3 + 0.4 * params[1];
  const double width = 0.2 + 0.2 * params[2];

  std::vector<double> flux(cfg.d_out);
  const double last = static_cast<double>(cfg.d_out - 1);
  for (std::size_t j = 0; j < cfg.d_out; ++j) {
    const double u = static_cast<double>(j) / last;
    const double du = u - peak;
    double s = amplitude * (sc::kContinuumBase + std::exp(-du * du / (2.0 * width * width)));
    for (std::size_t k = 0; k < sc::kTroughCount; ++k) {
      const double depth = sc::kMaxDepth * params[3 + k];
      const double dc = u - sc::kTroughCentre[k];
      const double sw = sc::kTroughWidth[k];
      s *= 1.0 - depth * std::exp(-dc * dc / (2.0 * sw * sw));
    }
    flux[j] = s;
  }
  return flux;
}

std::vector<double> simulate_spectrum(std::span<const double> params, const SimulatorConfig& cfg,
                                      bool draw_noise, std::uint64_t draw_index) {
  std::vector<double> flux = mean_spectrum(params, cfg);
  if (!draw_noise) return flux;
  Rng rng(derive_seed(cfg.seed, stream::kNoise, draw_index));
  const double scale = cfg.noise_coeff / std::sqrt(cfg.packet_count);
  for (auto& f : flux) f *= std::max(1.0 + scale * rng.normal(), sc::kNoiseFloor);
  return flux;
}

}  // namespace emu
