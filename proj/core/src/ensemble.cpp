#include "emu/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "emu/adam.hpp"
#include "emu/errors.hpp"
#include "emu/rng.hpp"

namespace emu {

std::string_view to_string(AggregationMode mode) noexcept {
  switch (mode) {
    case AggregationMode::deep_ensemble:
      return "deep_ensemble";
    case AggregationMode::empirical:
      return "empirical";
    case AggregationMode::vanilla:
      return "vanilla";
  }
  return "unknown";
}

AggregationMode parse_aggregation_mode(std::string_view name) {
  if (name == "deep_ensemble") return AggregationMode::deep_ensemble;
  if (name == "empirical") return AggregationMode::empirical;
  if (name == "vanilla") return AggregationMode::vanilla;
  throw InvalidArgument("unknown aggregation mode '" + std::string(name) + "'");
}

std::string_view to_string(Objective objective) noexcept {
  return objective == Objective::nll ? "nll" : "mse";
}

Objective parse_objective(std::string_view name) {
  if (name == "nll") return Objective::nll;
  if (name == "mse") return Objective::mse;
  throw InvalidArgument("unknown objective '" + std::string(name) + "'");
}

std::string_view to_string(RegKind kind) noexcept {
  return kind == RegKind::squared_l2 ? "squared_l2" : "l2_norm";
}

RegKind parse_reg_kind(std::string_view name) {
  if (name == "squared_l2") return RegKind::squared_l2;
  if (name == "l2_norm") return RegKind::l2_norm;
  throw InvalidArgument("unknown regularisation kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  arch.validate();
  loss.validate();
  if (n_members == 0) throw InvalidArgument("TrainConfig: n_members must be >= 1");
  if (batch_size == 0) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("TrainConfig: learning_rate must be > 0");
  }
  if (max_epochs == 0) throw InvalidArgument("TrainConfig: max_epochs must be >= 1");
}

TrainingData prepare_training_data(const Dataset& ds, const Preprocessor& pre) {
  TrainingData d;
  d.x_train = pre.transform_x(ds.x_of(Split::train));
  d.y_train = pre.transform_y(ds.y_of(Split::train));
  d.x_val = pre.transform_x(ds.x_of(Split::validation));
  d.y_val = pre.transform_y(ds.y_of(Split::validation));
  return d;
}

std::uint64_t member_seed(std::uint64_t base_seed, std::size_t index) noexcept {
  return derive_seed(base_seed, stream::kMember, index);
}

double validation_loss(const ProbNet& net, const Matrix& x, const Matrix& y, Objective objective) {
  constexpr std::size_t kChunk = 1024;
  const LossConfig plain{0.0, 1.0, 0.0, RegKind::squared_l2, false};
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += kChunk) {
    const std::size_t stop = std::min(x.rows(), start + kChunk);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix xb = gather_rows(x, idx);
    const Matrix yb = gather_rows(y, idx);
    const ForwardResult f = forward(net, xb);
    const NllResult l = objective == Objective::nll ? gaussian_nll(yb, f.mu, f.sigma2, plain, 0.0)
                                                    : mse_loss(yb, f.mu, plain, 0.0);
    total += l.loss * static_cast<double>(stop - start);
  }
  return total / static_cast<double>(x.rows());
}

namespace {

bool all_finite(const NetParams& p) {
  for (const Matrix* t : p.tensors())
    if (!t->all_finite()) return false;
  return true;
}

}  // namespace

MemberResult train_member(const TrainingData& data, const TrainConfig& cfg, std::size_t member_index,
                          const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.x_train.rows() == 0 || data.x_val.rows() == 0) {
    throw InvalidArgument("train_member: training and validation splits must be nonempty");
  }
  if (data.x_train.cols() != cfg.arch.d_in || data.y_train.cols() != cfg.arch.d_out) {
    throw InvalidArgument("train_member: data dimensions do not match the architecture");
  }

  const std::uint64_t seed = member_seed(cfg.base_seed, member_index);
  ProbNet net(cfg.arch, seed);
  const AdamHyper hyper{cfg.learning_rate, 0.9, 0.999, 1e-8};
  std::vector<AdamState> states;
  for (const Matrix* t : net.params().tensors()) states.emplace_back(t->rows(), t->cols(), hyper);

  Rng shuffle_rng(derive_seed(seed, stream::kShuffle, 0));
  const std::size_t n = data.x_train.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  MemberResult result{net, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);

    double loss_sum = 0.0;
    std::size_t rows_used = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      const Matrix xb = gather_rows(data.x_train, batch);
      const Matrix yb = gather_rows(data.y_train, batch);
      LossAndGrads lg;
      try {
        lg = cfg.use_adversarial ? adversarial_loss(net, xb, yb, cfg.loss, cfg.objective)
                                 : objective_loss(net, xb, yb, cfg.loss, cfg.objective);
      } catch (const NumericError&) {
        continue;
      }
      if (!std::isfinite(lg.loss) || !all_finite(lg.grads)) continue;

      auto params = net.mutable_params().tensors();
      const auto grads = lg.grads.tensors();
      for (std::size_t t = 0; t < params.size(); ++t) adam_step(*params[t], *grads[t], states[t]);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      rows_used += batch.size();
    }
    if (rows_used == 0) {
      throw TrainingDiverged(member_index,
                             "every batch of epoch " + std::to_string(epoch) + " was non-finite");
    }

    double val = std::numeric_limits<double>::infinity();
    try {
      val = validation_loss(net, data.x_val, data.y_val, cfg.objective);
    } catch (const NumericError&) {
    }
    const EpochRecord record{epoch, loss_sum / static_cast<double>(rows_used), val};
    result.log.push_back(record);
    if (on_epoch) on_epoch(member_index, record);

    if (val < best_val) {
      best_val = val;
      result.net = net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience && cfg.early_stop_patience > 0) {
      break;
    }
  }
  if (result.best_epoch == 0) {
    throw TrainingDiverged(member_index, "validation loss was never finite");
  }
  return result;
}

MemberResult train_member(const Dataset& ds, const TrainConfig& cfg, std::size_t member_index) {
  const Preprocessor pre = Preprocessor::fit(ds, cfg.log_outputs);
  return train_member(prepare_training_data(ds, pre), cfg, member_index);
}

namespace {

[[noreturn]] void rethrow_tagged(std::exception_ptr error, std::size_t member) {
  const std::string tag = "member " + std::to_string(member) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const TrainingDiverged&) {
    throw;
  } catch (const NumericError& e) {
    throw TrainingDiverged(member, e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(tag + e.what());
  } catch (const InvalidState& e) {
    throw InvalidState(tag + e.what());
  } catch (const std::exception& e) {
    throw Error(tag + e.what());
  }
}

}  // namespace

Ensemble train_ensemble(const Dataset& ds, const TrainConfig& cfg, std::size_t jobs,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  ds.validate();
  if (ds.count(Split::train) == 0 || ds.count(Split::validation) == 0) {
    throw InvalidArgument("train_ensemble: training and validation splits must be nonempty");
  }
  if (cfg.arch.d_in != ds.x.cols() || cfg.arch.d_out != ds.y.cols()) {
    throw InvalidArgument("train_ensemble: architecture is " + std::to_string(cfg.arch.d_in) + "->" +
                          std::to_string(cfg.arch.d_out) + " but the dataset is " +
                          std::to_string(ds.x.cols()) + "->" + std::to_string(ds.y.cols()));
  }
  Ensemble ens;
  ens.preprocessor = Preprocessor::fit(ds, cfg.log_outputs);
  ens.train_config = cfg;
  ens.mode = cfg.objective == Objective::mse ? AggregationMode::empirical
                                             : AggregationMode::deep_ensemble;
  const TrainingData data = prepare_training_data(ds, ens.preprocessor);

  const std::size_t m = cfg.n_members;
  std::vector<std::optional<MemberResult>> results(m);
  std::vector<std::exception_ptr> errors(m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        results[i] = train_member(data, cfg, i, on_epoch);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, m);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < m; ++i)
    if (errors[i]) rethrow_tagged(errors[i], i);

  for (auto& r : results) {
    ens.members.push_back(std::move(r->net));
    ens.training_log.push_back(std::move(r->log));
  }
  return ens;
}

void Ensemble::validate() const {
  if (members.empty()) throw InvalidState("Ensemble: no members");
  for (const auto& member : members) {
    if (!(member.spec() == members.front().spec())) {
      throw InvalidState("Ensemble: members have different architectures");
    }
  }
  preprocessor.validate();
  const ArchSpec& spec = members.front().spec();
  if (preprocessor.x_mean.size() != spec.d_in || preprocessor.y_mean.size() != spec.d_out) {
    throw InvalidState("Ensemble: preprocessor does not match the architecture");
  }
  validate_mode(mode);
}

void Ensemble::validate_mode(AggregationMode m) const {
  if (members.empty()) throw InvalidState("Ensemble: no members");
  if (m == AggregationMode::empirical && members.size() < 2) {
    throw InvalidState("Ensemble: empirical aggregation needs at least 2 members");
  }
}

namespace {

// Mean of `values` anchored at the smallest element. Identical inputs give
// that value back exactly, and the result does not depend on input order.
double anchored_mean(std::span<double> values) {
  std::sort(values.begin(), values.end());
  const double anchor = values.front();
  double s = 0.0;
  for (double v : values) s += v - anchor;
  return anchor + s / static_cast<double>(values.size());
}

struct PointMoments {
  double mean;
  double variance;
};

PointMoments aggregate_point(std::span<double> mus, std::span<double> sigma2s,
                             AggregationMode mode) {
  const double m = static_cast<double>(mus.size());
  const double mu_star = anchored_mean(mus);  // sorts mus
  double spread = 0.0;
  for (double v : mus) spread += (v - mu_star) * (v - mu_star);
  spread /= m;
  if (mode == AggregationMode::empirical) return {mu_star, spread};
  const double mean_var = anchored_mean(sigma2s);
  double var = mean_var + spread;
  if (var < 0.0 && var >= -1e-12) var = 0.0;
  return {mu_star, var};
}

}  // namespace

Moments aggregate_moments(const Matrix& mus, const Matrix& sigma2s) {
  if (mus.rows() != sigma2s.rows() || mus.cols() != sigma2s.cols()) {
    throw InvalidArgument("aggregate_moments: mus and sigma2s must have the same M x d shape");
  }
  if (mus.rows() == 0) throw InvalidArgument("aggregate_moments: need at least one member");
  const std::size_t members = mus.rows();
  const std::size_t d = mus.cols();
  Moments out{std::vector<double>(d), std::vector<double>(d)};
  std::vector<double> mu_col(members);
  std::vector<double> var_col(members);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t m = 0; m < members; ++m) {
      mu_col[m] = mus(m, j);
      var_col[m] = sigma2s(m, j);
      if (!(var_col[m] > 0.0)) throw InvalidArgument("aggregate_moments: sigma2 must be > 0");
    }
    const PointMoments pm = aggregate_point(mu_col, var_col, AggregationMode::deep_ensemble);
    out.mean[j] = pm.mean;
    out.variance[j] = pm.variance;
  }
  return out;
}

PredictiveDistribution predict(const Ensemble& ens, const Matrix& x_raw) {
  return predict(ens, x_raw, ens.mode);
}

PredictiveDistribution predict(const Ensemble& ens, const Matrix& x_raw, AggregationMode mode) {
  ens.validate_mode(mode);
  if (!x_raw.all_finite()) throw InvalidArgument("predict: inputs must be finite");
  const Matrix z = ens.preprocessor.transform_x(x_raw);
  const std::size_t used = mode == AggregationMode::vanilla ? 1 : ens.members.size();

  std::vector<ForwardResult> outs;
  outs.reserve(used);
  for (std::size_t m = 0; m < used; ++m) {
    ForwardResult f = forward(ens.members[m], z);
    f.cache = {};
    outs.push_back(std::move(f));
  }

  const std::size_t n = x_raw.rows();
  const std::size_t d = ens.members.front().spec().d_out;
  PredictiveDistribution p;
  p.mean_std = Matrix(n, d);
  p.var_std = Matrix(n, d);
  std::vector<double> mu_col(used);
  std::vector<double> var_col(used);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t m = 0; m < used; ++m) {
        mu_col[m] = outs[m].mu(i, j);
        var_col[m] = outs[m].sigma2(i, j);
      }
      const PointMoments pm = aggregate_point(mu_col, var_col, mode);
      p.mean_std(i, j) = pm.mean;
      p.var_std(i, j) = pm.variance;
    }
  }

  const Preprocessor& pre = ens.preprocessor;
  p.mean_out = Matrix(n, d);
  p.var_out = Matrix(n, d);
  p.mean = Matrix(n, d);
  p.variance = Matrix(n, d);
  const double ln10 = std::log(10.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double a = pre.y_std[j];
      p.mean_out(i, j) = a * p.mean_std(i, j) + pre.y_mean[j];
      p.var_out(i, j) = a * a * p.var_std(i, j);
      if (pre.log_outputs) {
        const double flux = std::pow(10.0, p.mean_out(i, j));
        p.mean(i, j) = flux;
        p.variance(i, j) = (ln10 * flux) * (ln10 * flux) * p.var_out(i, j);
      } else {
        p.mean(i, j) = p.mean_out(i, j);
        p.variance(i, j) = p.var_out(i, j);
      }
    }
  }
  return p;
}

}  // namespace emu
