#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "cli/run_config.hpp"

namespace emu::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInvalidInput = 2,
  kNumericFailure = 3,
  kIoFailure = 4,
};

/// Maps a thrown exception onto the exit-code contract.
int exit_code_for(const std::exception& e) noexcept;

/// Default --jobs: $EMU_JOBS when it holds a positive integer, else 1.
std::size_t default_jobs();

struct TrainOverrides {
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::size_t> members;
  std::optional<std::size_t> max_epochs;
  std::optional<std::uint64_t> seed;
  bool no_adversarial = false;

  void apply(RunConfig& cfg) const;
};

/// "<dir>/<stem>.log.csv" next to the checkpoint.
std::filesystem::path default_log_path(const std::filesystem::path& checkpoint);

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

void cmd_train(const RunConfig& cfg, const std::filesystem::path& data,
               const std::filesystem::path& checkpoint, const std::filesystem::path& epoch_log,
               std::size_t jobs, bool verbose, std::ostream& log);

void cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                 const std::filesystem::path& out, std::optional<AggregationMode> mode,
                 std::ostream& log);

/// `cfg` supplies the evaluation options and the simulator used for reruns;
/// when absent the defaults are used with the checkpoint's output width.
void cmd_evaluate(const std::optional<RunConfig>& cfg, const std::filesystem::path& checkpoint,
                  const std::filesystem::path& data, const std::filesystem::path& report,
                  const std::filesystem::path& series_dir, std::optional<AggregationMode> mode,
                  std::ostream& log);

/// Parses argv, dispatches, and returns the process exit code. Messages go
/// to `out` and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emu::cli
