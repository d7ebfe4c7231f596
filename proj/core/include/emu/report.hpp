#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "emu/dataset.hpp"
#include "emu/ensemble.hpp"
#include "emu/metrics.hpp"

namespace emu {

struct EvalOptions {
  std::vector<double> coverage_levels{0.5, 0.9, 0.999};
  SimulatorConfig simulator;
  std::size_t n_reruns = 100;
  double envelopment_z = 3.0;
  std::uint64_t rerun_seed = 0x5EED'0F'C0FFEEULL;
  std::vector<std::size_t> timing_batch_sizes{1, 64, 512};
  std::size_t timing_repetitions = 20;
  std::size_t timing_warmups = 5;
  /// Band level for the per-sample series.
  double series_level = 0.999;
  std::optional<AggregationMode> mode;
};

struct SampleErrors {
  std::size_t row = 0;  // dataset row index
  double mean_fe = 0.0;
  double max_fe = 0.0;
};

/// Per-bin series of one test sample: wavelength, truth, predicted mean,
/// band lower/upper bound, residual (mean - truth), all in flux units.
struct SpectrumSeries {
  std::size_t row = 0;
  std::vector<double> wavelength;
  std::vector<double> truth;
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> residual;
};

struct EvalReport {
  AggregationMode mode = AggregationMode::deep_ensemble;
  std::size_t members = 0;
  std::vector<SampleErrors> per_sample;
  double mean_fe_mean = 0.0;
  double mean_fe_std = 0.0;
  double max_fe_mean = 0.0;
  double max_fe_std = 0.0;
  double nll_mean = 0.0;  // per test sample, model space, constant included
  std::vector<std::pair<double, double>> coverage;  // level -> fraction
  std::size_t envelopment_row = 0;
  EnvelopmentReport envelopment;
  TimingReport timing;
  SpectrumSeries highest_max_fe;
  SpectrumSeries lowest_max_fe;
};

/// Runs the full evaluation protocol on the test split of `ds`. Throws
/// InvalidArgument when the dataset has no test rows.
EvalReport evaluate_ensemble(const Ensemble& ens, const Dataset& ds, const EvalOptions& opts);

/// Stable-key JSON document (keys sorted, two-space indent).
std::string report_to_json(const EvalReport& report);

/// Writes series_highest.csv, series_lowest.csv and envelopment.csv into dir.
void write_report_series(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace emu
