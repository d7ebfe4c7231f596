#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "emu/checkpoint.hpp"
#include "emu/dataset.hpp"
#include "emu/errors.hpp"
#include "emu/report.hpp"

namespace emu::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return kNumericFailure;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kIoFailure;
  if (dynamic_cast<const InvalidArgument*>(&e) != nullptr ||
      dynamic_cast<const InvalidState*>(&e) != nullptr ||
      dynamic_cast<const UnsupportedFormat*>(&e) != nullptr ||
      dynamic_cast<const CorruptCheckpoint*>(&e) != nullptr) {
    return kInvalidInput;
  }
  return kInternal;
}

std::size_t default_jobs() {
  const char* env = std::getenv("EMU_JOBS");
  if (env == nullptr) return 1;
  const std::string_view s(env);
  std::size_t jobs = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), jobs);
  if (ec != std::errc() || ptr != s.data() + s.size() || jobs == 0) return 1;
  return jobs;
}

void TrainOverrides::apply(RunConfig& cfg) const {
  if (beta) cfg.train.loss.beta = *beta;
  if (alpha) cfg.train.loss.alpha = *alpha;
  if (epsilon) cfg.train.loss.epsilon = *epsilon;
  if (batch_size) cfg.train.batch_size = *batch_size;
  if (learning_rate) cfg.train.learning_rate = *learning_rate;
  if (members) cfg.train.n_members = *members;
  if (max_epochs) cfg.train.max_epochs = *max_epochs;
  if (seed) cfg.train.base_seed = *seed;
  if (no_adversarial) cfg.train.use_adversarial = false;
  cfg.validate();
}

fs::path default_log_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension();
  p += ".log.csv";
  return p;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_epoch_log(const Ensemble& ens, const fs::path& path) {
  std::string text = "member,epoch,train_loss,val_loss\n";
  for (std::size_t m = 0; m < ens.training_log.size(); ++m) {
    for (const EpochRecord& r : ens.training_log[m]) {
      text += std::to_string(m) + ',' + std::to_string(r.epoch) + ',' + format_double(r.train_loss) +
              ',' + format_double(r.val_loss) + '\n';
    }
  }
  write_text(path, text);
}

Matrix read_inputs(const fs::path& path, std::size_t d_in) {
  Matrix x = is_pdmx_path(path) ? read_pdmx(path) : read_matrix_csv(path, "x", d_in);
  if (x.rows() != 0 && x.cols() != d_in) {
    throw InvalidArgument("'" + path.string() + "' has " + std::to_string(x.cols()) +
                          " columns but the model expects " + std::to_string(d_in));
  }
  return x;
}

}  // namespace

void cmd_simulate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const Dataset ds = generate_dataset(cfg.n_samples, cfg.simulator, cfg.fractions);
  save_dataset(ds, out);
  log << "wrote " << ds.rows() << " rows to " << out.string() << " (train "
      << ds.count(Split::train) << ", validation " << ds.count(Split::validation) << ", test "
      << ds.count(Split::test) << ")\n";
}

void cmd_train(const RunConfig& cfg_in, const fs::path& data, const fs::path& checkpoint,
               const fs::path& epoch_log, std::size_t jobs, bool verbose, std::ostream& log) {
  RunConfig cfg = cfg_in;
  const Dataset ds = load_dataset(data);
  cfg.train.arch.d_in = ds.x.cols();
  cfg.train.arch.d_out = ds.y.cols();
  cfg.validate();

  std::mutex mu;
  EpochCallback on_epoch;
  if (verbose) {
    on_epoch = [&](std::size_t member, const EpochRecord& r) {
      std::lock_guard lock(mu);
      log << "member " << member << " epoch " << r.epoch << " train " << r.train_loss << " val "
          << r.val_loss << '\n';
    };
  }
  const Ensemble ens = train_ensemble(ds, cfg.train, jobs, on_epoch);
  save_checkpoint(ens, checkpoint);
  write_epoch_log(ens, epoch_log);

  for (std::size_t m = 0; m < ens.training_log.size(); ++m) {
    const auto& rows = ens.training_log[m];
    double best = INFINITY;
    std::size_t best_epoch = 0;
    for (const auto& r : rows) {
      if (r.val_loss < best) {
        best = r.val_loss;
        best_epoch = r.epoch;
      }
    }
    log << "member " << m << ": " << rows.size() << " epochs, best validation loss " << best
        << " at epoch " << best_epoch << '\n';
  }
  log << "wrote " << checkpoint.string() << " and " << epoch_log.string() << '\n';
}

void cmd_predict(const fs::path& checkpoint, const fs::path& input, const fs::path& out,
                 std::optional<AggregationMode> mode, std::ostream& log) {
  const Ensemble ens = load_checkpoint(checkpoint);
  const ArchSpec& spec = ens.members.front().spec();
  const AggregationMode m = mode.value_or(ens.mode);
  ens.validate_mode(m);
  const Matrix x = read_inputs(input, spec.d_in);

  Matrix table(x.rows(), 2 * spec.d_out);
  if (x.rows() != 0) {
    const PredictiveDistribution p = predict(ens, x, m);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < spec.d_out; ++j) {
        table(i, j) = p.mean(i, j);
        table(i, spec.d_out + j) = std::sqrt(p.variance(i, j));
      }
    }
  }
  if (is_pdmx_path(out)) {
    write_pdmx(table, out);
  } else {
    std::vector<std::string> header;
    for (std::size_t j = 0; j < spec.d_out; ++j) header.push_back("mu" + std::to_string(j));
    for (std::size_t j = 0; j < spec.d_out; ++j) header.push_back("sigma" + std::to_string(j));
    write_matrix_csv(table, out, header);
  }
  log << "wrote " << x.rows() << " predictions (" << to_string(m) << ") to " << out.string() << '\n';
}

void cmd_evaluate(const std::optional<RunConfig>& cfg, const fs::path& checkpoint,
                  const fs::path& data, const fs::path& report, const fs::path& series_dir,
                  std::optional<AggregationMode> mode, std::ostream& log) {
  const Ensemble ens = load_checkpoint(checkpoint);
  const ArchSpec& spec = ens.members.front().spec();
  EvalOptions opts;
  if (cfg) {
    opts = cfg->evaluate;
    if (opts.simulator.d_out != spec.d_out) {
      throw InvalidArgument("config simulator.d_out is " + std::to_string(opts.simulator.d_out) +
                            " but the checkpoint predicts " + std::to_string(spec.d_out) + " bins");
    }
  } else {
    opts = default_run_config().evaluate;
    opts.simulator.d_out = spec.d_out;
  }
  if (mode) opts.mode = mode;

  const Dataset ds = load_dataset(data);
  if (ds.count(Split::test) == 0) throw InvalidArgument("'" + data.string() + "' has no test rows");
  const EvalReport r = evaluate_ensemble(ens, ds, opts);
  write_text(report, report_to_json(r));
  if (!series_dir.empty()) {
    fs::create_directories(series_dir);
    write_report_series(r, series_dir);
  }

  log << "mode " << to_string(r.mode) << ", " << r.members << " members, "
      << r.per_sample.size() << " test samples\n";
  log << "MeanFE " << r.mean_fe_mean << " (std " << r.mean_fe_std << "), MaxFE " << r.max_fe_mean
      << " (std " << r.max_fe_std << ")\n";
  log << "NLL " << r.nll_mean << '\n';
  for (const auto& [level, frac] : r.coverage) log << "coverage@" << level << " " << frac << '\n';
  log << "envelopment ratio " << r.envelopment.ratio << ", sigma dominance "
      << r.envelopment.sigma_dominance << " (row " << r.envelopment_row << ")\n";
  log << "wrote " << report.string() << '\n';
}

namespace {

std::optional<AggregationMode> parse_mode_option(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_aggregation_mode(s);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate deep-ensemble emulators of a stochastic spectrum simulator", "emu"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "emu 1.0.0");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run configuration (JSON)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a labelled dataset");
  add_config(sim);
  std::string sim_out;
  sim->add_option("-o,--out", sim_out, "dataset path (.csv, or .pdmx for binary)")->required();

  CLI::App* train = app.add_subcommand("train", "train an ensemble and write a checkpoint");
  add_config(train);
  std::string train_data;
  std::string train_out;
  std::string train_log;
  std::size_t jobs = default_jobs();
  bool verbose = false;
  TrainOverrides ov;
  train->add_option("-d,--data", train_data, "dataset path")->required();
  train->add_option("-o,--out", train_out, "checkpoint path")->required();
  train->add_option("--log", train_log, "per-epoch loss CSV (default <out>.log.csv)");
  train->add_option("-j,--jobs", jobs, "members trained in parallel (default $EMU_JOBS or 1)")
      ->check(CLI::PositiveNumber);
  train->add_option("--beta", ov.beta, "weight-prior coefficient");
  train->add_option("--alpha", ov.alpha, "clean-loss weight in adversarial training");
  train->add_option("--epsilon", ov.epsilon, "FGSM step size");
  train->add_option("--batch-size", ov.batch_size, "mini-batch size");
  train->add_option("--learning-rate", ov.learning_rate, "Adam learning rate");
  train->add_option("--members", ov.members, "ensemble size");
  train->add_option("--epochs", ov.max_epochs, "maximum epochs per member");
  train->add_option("--seed", ov.seed, "base seed for initialisation and batch order");
  train->add_flag("--no-adversarial", ov.no_adversarial, "train on the clean loss only");
  train->add_flag("-v,--verbose", verbose, "print every epoch");

  CLI::App* pred = app.add_subcommand("predict", "predict spectra for parameter rows");
  std::string pred_model;
  std::string pred_in;
  std::string pred_out;
  std::string pred_mode;
  pred->add_option("-m,--model", pred_model, "checkpoint path")->required();
  pred->add_option("-i,--input", pred_in, "parameter rows (CSV with x0.. header, or .pdmx)")->required();
  pred->add_option("-o,--out", pred_out, "prediction path (.csv or .pdmx)")->required();
  pred->add_option("--mode", pred_mode, "deep_ensemble | empirical | vanilla");

  CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  add_config(eval);
  std::string eval_model;
  std::string eval_data;
  std::string eval_out;
  std::string eval_series;
  std::string eval_mode;
  eval->add_option("-m,--model", eval_model, "checkpoint path")->required();
  eval->add_option("-d,--data", eval_data, "dataset path")->required();
  eval->add_option("-o,--out", eval_out, "report JSON path")->required();
  eval->add_option("--series-dir", eval_series, "directory for the per-sample series CSVs");
  eval->add_option("--mode", eval_mode, "deep_ensemble | empirical | vanilla");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    auto config = [&]() -> RunConfig {
      return config_path.empty() ? default_run_config() : load_run_config(config_path);
    };
    if (*sim) {
      cmd_simulate(config(), sim_out, out);
    } else if (*train) {
      RunConfig cfg = config();
      ov.apply(cfg);
      const fs::path log_path = train_log.empty() ? default_log_path(train_out) : fs::path(train_log);
      cmd_train(cfg, train_data, train_out, log_path, jobs, verbose, out);
    } else if (*pred) {
      cmd_predict(pred_model, pred_in, pred_out, parse_mode_option(pred_mode), out);
    } else if (*eval) {
      std::optional<RunConfig> cfg;
      if (!config_path.empty()) cfg = load_run_config(config_path);
      cmd_evaluate(cfg, eval_model, eval_data, eval_out, eval_series, parse_mode_option(eval_mode),
                   out);
    }
  } catch (const std::exception& e) {
    err << "emu: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace emu::cli
