#include "emu/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

#include "emu/errors.hpp"

namespace emu {

FractionalErrors fractional_errors(std::span<const double> y_emu, std::span<const double> y_test) {
  if (y_emu.size() != y_test.size() || y_test.empty()) {
    throw InvalidArgument("fractional_errors: vectors must be nonempty and of equal length");
  }
  FractionalErrors fe;
  double sum = 0.0;
  for (std::size_t i = 0; i < y_test.size(); ++i) {
    if (!(y_test[i] > 0.0)) {
      throw InvalidArgument("fractional_errors: y_test[" + std::to_string(i) + "] must be > 0");
    }
    const double r = std::abs(y_emu[i] - y_test[i]) / y_test[i];
    sum += r;
    fe.max_fe = std::max(fe.max_fe, r);
  }
  fe.mean_fe = sum / static_cast<double>(y_test.size());
  return fe;
}

double two_sided_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("coverage level must lie in (0, 1)");
  return std::numbers::sqrt2 * boost::math::erf_inv(level);
}

double interval_coverage(const Matrix& mean, const Matrix& var, const Matrix& y, double level) {
  if (mean.rows() != y.rows() || mean.cols() != y.cols() || var.rows() != y.rows() ||
      var.cols() != y.cols()) {
    throw InvalidArgument("interval_coverage: shapes differ");
  }
  const double z = two_sided_z(level);
  if (y.empty()) return 0.0;
  std::size_t inside = 0;
  const auto m = mean.data();
  const auto v = var.data();
  const auto t = y.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - m[i]) <= z * std::sqrt(v[i])) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(t.size());
}

double interval_coverage(const PredictiveDistribution& pred, const Matrix& y_test_raw,
                         const Preprocessor& pre, double level) {
  return interval_coverage(pred.mean_std, pred.var_std, pre.transform_y(y_test_raw), level);
}

EnvelopmentReport envelopment_from_band(std::span<const double> mean, std::span<const double> sigma,
                                        const Matrix& draws, double z) {
  const std::size_t d = mean.size();
  if (sigma.size() != d || draws.cols() != d) {
    throw InvalidArgument("envelopment: band and draws must have the same width");
  }
  if (draws.rows() < 2) throw InvalidArgument("envelopment: need at least 2 reruns");
  EnvelopmentReport rep;
  rep.n_reruns = draws.rows();
  rep.z = z;
  rep.bins.resize(d);
  std::size_t inside = 0;
  std::size_t dominated = 0;
  const double n = static_cast<double>(draws.rows());
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < draws.rows(); ++i) {
      s += draws(i, j);
      if (std::abs(draws(i, j) - mean[j]) <= z * sigma[j]) ++inside;
    }
    const double mc_mean = s / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < draws.rows(); ++i) ss += (draws(i, j) - mc_mean) * (draws(i, j) - mc_mean);
    BinComparison& b = rep.bins[j];
    b.mc_mean = mc_mean;
    b.mc_std = std::sqrt(ss / (n - 1.0));
    b.ens_mean = mean[j];
    b.ens_sigma = sigma[j];
    if (sigma[j] >= b.mc_std) ++dominated;
  }
  rep.ratio = static_cast<double>(inside) / static_cast<double>(draws.size());
  rep.sigma_dominance = static_cast<double>(dominated) / static_cast<double>(d);
  return rep;
}

EnvelopmentReport envelopment_check(const Ensemble& ens, std::span<const double> params,
                                    const SimulatorConfig& cfg, std::size_t n_reruns, double z) {
  if (n_reruns < 2) throw InvalidArgument("envelopment_check: n_reruns must be >= 2");
  const std::size_t d = ens.members.front().spec().d_out;
  if (cfg.d_out != d) {
    throw InvalidArgument("envelopment_check: simulator d_out does not match the ensemble");
  }
  Matrix draws(n_reruns, d);
  for (std::size_t i = 0; i < n_reruns; ++i) {
    const auto flux = simulate_spectrum(params, cfg, true, i);
    std::copy(flux.begin(), flux.end(), draws.row(i).begin());
  }
  const Matrix x = Matrix::row_vector(params);
  const PredictiveDistribution pred = predict(ens, x);
  std::vector<double> sigma(d);
  for (std::size_t j = 0; j < d; ++j) sigma[j] = std::sqrt(pred.var_std(0, j));

  const Preprocessor& pre = ens.preprocessor;
  EnvelopmentReport rep = envelopment_from_band(pred.mean_std.row(0), sigma, pre.transform_y(draws), z);

  const auto grid = wavelength_grid(cfg);
  for (std::size_t j = 0; j < d; ++j) {
    BinComparison& b = rep.bins[j];
    b.wavelength = grid[j];
    double s = 0.0;
    for (std::size_t i = 0; i < n_reruns; ++i) s += draws(i, j);
    b.mc_mean_flux = s / static_cast<double>(n_reruns);
    double ss = 0.0;
    for (std::size_t i = 0; i < n_reruns; ++i) {
      ss += (draws(i, j) - b.mc_mean_flux) * (draws(i, j) - b.mc_mean_flux);
    }
    b.mc_std_flux = std::sqrt(ss / static_cast<double>(n_reruns - 1));
    b.ens_mean_flux = pred.mean(0, j);
    const double half = z * std::sqrt(pred.var_out(0, j));
    b.ens_lo_flux = pre.log_outputs ? std::pow(10.0, pred.mean_out(0, j) - half)
                                    : pred.mean_out(0, j) - half;
    b.ens_hi_flux = pre.log_outputs ? std::pow(10.0, pred.mean_out(0, j) + half)
                                    : pred.mean_out(0, j) + half;
  }
  return rep;
}

TimingReport timing_benchmark(const Ensemble& ens, const Matrix& inputs,
                              std::span<const std::size_t> batch_sizes, std::size_t repetitions,
                              std::size_t warmups) {
  TimingReport rep;
  if (batch_sizes.empty()) return rep;
  if (inputs.rows() == 0) throw InvalidArgument("timing_benchmark: no input rows");
  repetitions = std::max<std::size_t>(repetitions, 1);
  for (std::size_t batch : batch_sizes) {
    if (batch == 0) throw InvalidArgument("timing_benchmark: batch sizes must be >= 1");
    Matrix x(batch, inputs.cols());
    for (std::size_t i = 0; i < batch; ++i) {
      const auto src = inputs.row(i % inputs.rows());
      std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    for (std::size_t w = 0; w < warmups; ++w) (void)predict(ens, x);
    std::vector<double> seconds;
    seconds.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto start = std::chrono::steady_clock::now();
      (void)predict(ens, x);
      const auto stop = std::chrono::steady_clock::now();
      seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::nth_element(seconds.begin(), seconds.begin() + static_cast<std::ptrdiff_t>(seconds.size() / 2),
                     seconds.end());
    const double median = seconds[seconds.size() / 2];
    rep.entries.push_back({batch, median / static_cast<double>(batch)});
  }
  rep.ratio_first_to_last = rep.entries.front().per_sample_seconds / rep.entries.back().per_sample_seconds;
  return rep;
}

}  // namespace emu
