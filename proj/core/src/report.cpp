#include "emu/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "emu/errors.hpp"
#include "json.hpp"

namespace emu {

namespace {

using json = nlohmann::json;

void mean_and_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

SpectrumSeries make_series(const PredictiveDistribution& pred, const Matrix& y_test,
                           std::size_t local, std::size_t row, const std::vector<double>& grid,
                           double z, bool log_outputs) {
  SpectrumSeries s;
  s.row = row;
  const std::size_t d = y_test.cols();
  for (std::size_t j = 0; j < d; ++j) {
    s.wavelength.push_back(grid.empty() ? static_cast<double>(j) : grid[j]);
    s.truth.push_back(y_test(local, j));
    s.mean.push_back(pred.mean(local, j));
    const double half = z * std::sqrt(pred.var_out(local, j));
    const double lo = pred.mean_out(local, j) - half;
    const double hi = pred.mean_out(local, j) + half;
    s.lo.push_back(log_outputs ? std::pow(10.0, lo) : lo);
    s.hi.push_back(log_outputs ? std::pow(10.0, hi) : hi);
    s.residual.push_back(pred.mean(local, j) - y_test(local, j));
  }
  return s;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t n = columns.empty() ? 0 : columns.front()->size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      out << (c ? "," : "") << format_double((*columns[c])[i]);
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json series_json(const SpectrumSeries& s, const char* file) {
  return json{{"row", s.row}, {"file", file}};
}

}  // namespace

EvalReport evaluate_ensemble(const Ensemble& ens, const Dataset& ds, const EvalOptions& opts) {
  ens.validate();
  const auto test_rows = ds.indices(Split::test);
  if (test_rows.empty()) throw InvalidArgument("evaluate: dataset has no test split");
  const std::size_t d = ens.members.front().spec().d_out;
  if (ds.y.cols() != d || ds.x.cols() != ens.members.front().spec().d_in) {
    throw InvalidArgument("evaluate: dataset dimensions do not match the checkpoint");
  }

  EvalReport rep;
  rep.mode = opts.mode.value_or(ens.mode);
  rep.members = rep.mode == AggregationMode::vanilla ? 1 : ens.members.size();
  const Matrix x_test = gather_rows(ds.x, test_rows);
  const Matrix y_test = gather_rows(ds.y, test_rows);
  const PredictiveDistribution pred = predict(ens, x_test, rep.mode);

  std::vector<double> mean_fes;
  std::vector<double> max_fes;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const FractionalErrors fe = fractional_errors(pred.mean.row(i), y_test.row(i));
    rep.per_sample.push_back({test_rows[i], fe.mean_fe, fe.max_fe});
    mean_fes.push_back(fe.mean_fe);
    max_fes.push_back(fe.max_fe);
  }
  mean_and_std(mean_fes, rep.mean_fe_mean, rep.mean_fe_std);
  mean_and_std(max_fes, rep.max_fe_mean, rep.max_fe_std);

  const Preprocessor& pre = ens.preprocessor;
  const Matrix y_model = pre.transform_y(y_test);
  LossConfig nll_cfg;
  nll_cfg.beta = 0.0;
  nll_cfg.include_constant = true;
  Matrix var = pred.var_std;
  // Empirical aggregation can report zero spread; the likelihood needs var > 0.
  for (auto& v : var.data()) v = std::max(v, std::numeric_limits<double>::min());
  rep.nll_mean = gaussian_nll(y_model, pred.mean_std, var, nll_cfg, 0.0).loss;

  for (double level : opts.coverage_levels) {
    rep.coverage.emplace_back(level, interval_coverage(pred.mean_std, pred.var_std, y_model, level));
  }

  // Sample with the highest relative predicted uncertainty, max_j sigma / mu.
  std::size_t worst = 0;
  double worst_ratio = -1.0;
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < d; ++j) r = std::max(r, std::sqrt(pred.variance(i, j)) / pred.mean(i, j));
    if (r > worst_ratio) {
      worst_ratio = r;
      worst = i;
    }
  }
  rep.envelopment_row = test_rows[worst];
  if (opts.n_reruns >= 2) {
    SimulatorConfig sim = opts.simulator;
    sim.seed = opts.rerun_seed;
    const Ensemble* target = &ens;
    Ensemble moded;
    if (rep.mode != ens.mode) {
      moded = ens;
      moded.mode = rep.mode;
      target = &moded;
    }
    rep.envelopment = envelopment_check(*target, x_test.row(worst), sim, opts.n_reruns,
                                        opts.envelopment_z);
  }

  if (!opts.timing_batch_sizes.empty()) {
    rep.timing = timing_benchmark(ens, x_test, opts.timing_batch_sizes, opts.timing_repetitions,
                                  opts.timing_warmups);
  }

  const auto hi = std::max_element(max_fes.begin(), max_fes.end()) - max_fes.begin();
  const auto lo = std::min_element(max_fes.begin(), max_fes.end()) - max_fes.begin();
  std::vector<double> grid;
  if (opts.simulator.d_out == d) grid = wavelength_grid(opts.simulator);
  const double z = two_sided_z(opts.series_level);
  rep.highest_max_fe = make_series(pred, y_test, static_cast<std::size_t>(hi),
                                   test_rows[static_cast<std::size_t>(hi)], grid, z, pre.log_outputs);
  rep.lowest_max_fe = make_series(pred, y_test, static_cast<std::size_t>(lo),
                                  test_rows[static_cast<std::size_t>(lo)], grid, z, pre.log_outputs);
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  json per_sample = json::array();
  for (const auto& s : r.per_sample) {
    per_sample.push_back({{"row", s.row}, {"mean_fe", s.mean_fe}, {"max_fe", s.max_fe}});
  }
  json coverage = json::object();
  for (const auto& [level, frac] : r.coverage) coverage[format_double(level)] = frac;

  json bins = json::array();
  for (const auto& b : r.envelopment.bins) {
    bins.push_back({{"wavelength", b.wavelength},
                    {"mc_mean", b.mc_mean},
                    {"mc_std", b.mc_std},
                    {"ens_mean", b.ens_mean},
                    {"ens_sigma", b.ens_sigma},
                    {"mc_mean_flux", b.mc_mean_flux},
                    {"mc_std_flux", b.mc_std_flux},
                    {"ens_mean_flux", b.ens_mean_flux},
                    {"ens_lo_flux", b.ens_lo_flux},
                    {"ens_hi_flux", b.ens_hi_flux}});
  }
  json batches = json::array();
  json per_sample_seconds = json::array();
  for (const auto& e : r.timing.entries) {
    batches.push_back(e.batch_size);
    per_sample_seconds.push_back(e.per_sample_seconds);
  }

  json doc = {
      {"format", "emu-eval-report"},
      {"version", 1},
      {"mode", std::string(to_string(r.mode))},
      {"members", r.members},
      {"n_test", r.per_sample.size()},
      {"fractional_error",
       {{"mean_fe", {{"mean", r.mean_fe_mean}, {"std", r.mean_fe_std}}},
        {"max_fe", {{"mean", r.max_fe_mean}, {"std", r.max_fe_std}}},
        {"per_sample", per_sample}}},
      {"nll", {{"mean", r.nll_mean}, {"space", "standardized_output"}}},
      {"coverage", coverage},
      {"envelopment",
       {{"row", r.envelopment_row},
        {"n_reruns", r.envelopment.n_reruns},
        {"z", r.envelopment.z},
        {"ratio", r.envelopment.ratio},
        {"sigma_dominance", r.envelopment.sigma_dominance},
        {"bins", bins}}},
      {"timing",
       {{"batch_sizes", batches},
        {"per_sample_seconds", per_sample_seconds},
        {"ratio_first_to_last", r.timing.ratio_first_to_last}}},
      {"series",
       {{"highest_max_fe", series_json(r.highest_max_fe, "series_highest.csv")},
        {"lowest_max_fe", series_json(r.lowest_max_fe, "series_lowest.csv")}}},
  };
  return doc.dump(2) + "\n";
}

void write_report_series(const EvalReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const std::vector<std::string> header{"wavelength", "truth", "mu", "lo", "hi", "residual"};
  for (const auto& [s, name] : {std::pair{&r.highest_max_fe, "series_highest.csv"},
                                std::pair{&r.lowest_max_fe, "series_lowest.csv"}}) {
    write_csv(dir / name, header, {&s->wavelength, &s->truth, &s->mean, &s->lo, &s->hi, &s->residual});
  }
  std::vector<double> wl, mc_mean, mc_lo, mc_hi, ens_mean, ens_lo, ens_hi;
  for (const auto& b : r.envelopment.bins) {
    wl.push_back(b.wavelength);
    mc_mean.push_back(b.mc_mean_flux);
    mc_lo.push_back(b.mc_mean_flux - r.envelopment.z * b.mc_std_flux);
    mc_hi.push_back(b.mc_mean_flux + r.envelopment.z * b.mc_std_flux);
    ens_mean.push_back(b.ens_mean_flux);
    ens_lo.push_back(b.ens_lo_flux);
    ens_hi.push_back(b.ens_hi_flux);
  }
  write_csv(dir / "envelopment.csv",
            {"wavelength", "mc_mean", "mc_lo", "mc_hi", "ens_mean", "ens_lo", "ens_hi"},
            {&wl, &mc_mean, &mc_lo, &mc_hi, &ens_mean, &ens_lo, &ens_hi});
}

}  // namespace emu
