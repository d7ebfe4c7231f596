#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "emu/dataset.hpp"
#include "emu/loss.hpp"
#include "emu/matrix.hpp"
#include "emu/model.hpp"
#include "emu/preprocess.hpp"

namespace emu {

enum class AggregationMode {
  deep_ensemble,  // moments of the uniform Gaussian mixture
  empirical,      // mean of member means, population variance of the means
  vanilla,        // member 0 alone
};

std::string_view to_string(AggregationMode mode) noexcept;
AggregationMode parse_aggregation_mode(std::string_view name);
std::string_view to_string(Objective objective) noexcept;
Objective parse_objective(std::string_view name);
std::string_view to_string(RegKind kind) noexcept;
RegKind parse_reg_kind(std::string_view name);

struct TrainConfig {
  ArchSpec arch;
  LossConfig loss;
  std::size_t n_members = 6;
  std::size_t batch_size = 500;
  double learning_rate = 2e-4;
  std::size_t max_epochs = 300;
  std::size_t early_stop_patience = 20;
  std::uint64_t base_seed = 0;
  bool use_adversarial = true;
  Objective objective = Objective::nll;
  bool log_outputs = true;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Standardised training and validation matrices.
struct TrainingData {
  Matrix x_train;
  Matrix y_train;
  Matrix x_val;
  Matrix y_val;
};

TrainingData prepare_training_data(const Dataset& ds, const Preprocessor& pre);

/// Seed of ensemble member `index`: derive_seed(base_seed, stream::kMember,
/// index). It drives both the weight initialisation and the batch order.
std::uint64_t member_seed(std::uint64_t base_seed, std::size_t index) noexcept;

struct MemberResult {
  ProbNet net;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(std::size_t member, const EpochRecord&)>;

/// Trains one member with Adam on shuffled mini-batches and returns the
/// parameters with the lowest validation loss. Batches whose forward pass
/// overflows are skipped; an epoch in which every batch fails raises
/// TrainingDiverged.
MemberResult train_member(const TrainingData& data, const TrainConfig& cfg, std::size_t member_index,
                          const EpochCallback& on_epoch = {});
/// Convenience overload that fits the preprocessor on `ds` first.
MemberResult train_member(const Dataset& ds, const TrainConfig& cfg, std::size_t member_index);

/// Validation objective (data term only, batch mean) of a trained net.
double validation_loss(const ProbNet& net, const Matrix& x, const Matrix& y, Objective objective);

struct Ensemble {
  std::vector<ProbNet> members;
  Preprocessor preprocessor;
  AggregationMode mode = AggregationMode::deep_ensemble;
  TrainConfig train_config;
  std::vector<std::vector<EpochRecord>> training_log;

  /// Throws InvalidState when members disagree on architecture or the
  /// member count does not suit the aggregation mode.
  void validate() const;
  void validate_mode(AggregationMode m) const;

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

/// Trains cfg.n_members members on up to `jobs` threads. The result does not
/// depend on `jobs` or on scheduling order.
Ensemble train_ensemble(const Dataset& ds, const TrainConfig& cfg, std::size_t jobs = 1,
                        const EpochCallback& on_epoch = {});

struct Moments {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Mean and variance of the uniform mixture of N(mus[m, j], sigma2s[m, j]).
/// Computed as mean(sigma2) + mean((mu - mu*)^2), which equals
/// mean(sigma2 + mu^2) - mu*^2 but cannot go negative. Sums run over the
/// member values in sorted order so the result is permutation invariant.
Moments aggregate_moments(const Matrix& mus, const Matrix& sigma2s);

/// Predictive Gaussian in three spaces: standardised model space, the output
/// space before standardisation (log10 flux when log_outputs), and original
/// flux units (delta method through the log).
struct PredictiveDistribution {
  Matrix mean_std;
  Matrix var_std;
  Matrix mean_out;
  Matrix var_out;
  Matrix mean;
  Matrix variance;
};

PredictiveDistribution predict(const Ensemble& ens, const Matrix& x_raw);
PredictiveDistribution predict(const Ensemble& ens, const Matrix& x_raw, AggregationMode mode);

}  // namespace emu
