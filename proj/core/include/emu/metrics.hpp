#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "emu/ensemble.hpp"
#include "emu/matrix.hpp"
#include "emu/simulator.hpp"

namespace emu {

struct FractionalErrors {
  double mean_fe = 0.0;
  double max_fe = 0.0;
};

/// MeanFE = mean_j |e_j - t_j| / t_j and MaxFE = max_j of the same ratio.
/// Throws InvalidArgument on a length mismatch or a non-positive t_j.
FractionalErrors fractional_errors(std::span<const double> y_emu, std::span<const double> y_test);

/// Two-sided standard-normal quantile: P(|Z| <= z) = level.
double two_sided_z(double level);

/// Fraction of entries with |y - mean| <= z(level) * sqrt(var). A zero
/// variance gives a zero-width interval that covers only exact equality.
double interval_coverage(const Matrix& mean, const Matrix& var, const Matrix& y, double level);

/// Coverage of raw test spectra, measured in the standardised model space
/// where the predictive Gaussian is defined.
double interval_coverage(const PredictiveDistribution& pred, const Matrix& y_test_raw,
                         const Preprocessor& pre, double level);

struct BinComparison {
  double wavelength = 0.0;
  // standardised model space
  double mc_mean = 0.0;
  double mc_std = 0.0;
  double ens_mean = 0.0;
  double ens_sigma = 0.0;
  // flux units
  double mc_mean_flux = 0.0;
  double mc_std_flux = 0.0;
  double ens_mean_flux = 0.0;
  double ens_lo_flux = 0.0;
  double ens_hi_flux = 0.0;
};

struct EnvelopmentReport {
  double ratio = 0.0;            // fraction of (draw, bin) inside mean +- z sigma
  double sigma_dominance = 0.0;  // fraction of bins with ens sigma >= MC std
  std::size_t n_reruns = 0;
  double z = 0.0;
  std::vector<BinComparison> bins;
};

/// Envelopment of `draws` (n_reruns x d, same space as mean/sigma) by the band
/// mean +- z * sigma. Only the model-space fields of `bins` are filled.
EnvelopmentReport envelopment_from_band(std::span<const double> mean, std::span<const double> sigma,
                                        const Matrix& draws, double z);

/// Reruns the simulator n_reruns times at `params` (noise seeded from
/// cfg.seed, draw indices 0..n_reruns-1) and compares the ensemble band with
/// the Monte Carlo scatter in model space. Throws InvalidArgument when
/// n_reruns < 2.
EnvelopmentReport envelopment_check(const Ensemble& ens, std::span<const double> params,
                                    const SimulatorConfig& cfg, std::size_t n_reruns, double z);

struct TimingEntry {
  std::size_t batch_size = 0;
  double per_sample_seconds = 0.0;
};

struct TimingReport {
  std::vector<TimingEntry> entries;
  /// per-sample time of the first batch size over that of the last
  double ratio_first_to_last = 0.0;
};

/// Median wall-clock per-sample prediction latency for each batch size,
/// measured after `warmups` untimed runs. Inputs are rows of `inputs`,
/// cycled to fill the batch.
TimingReport timing_benchmark(const Ensemble& ens, const Matrix& inputs,
                              std::span<const std::size_t> batch_sizes, std::size_t repetitions = 20,
                              std::size_t warmups = 5);

}  // namespace emu
