#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "emu/errors.hpp"
#include "emu/ensemble.hpp"
#include "oracles.hpp"

namespace emu {
namespace {

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    SimulatorConfig sim;
    sim.d_out = 8;
    sim.packet_count = 400;
    sim.seed = 17;
    return generate_dataset(200, sim, SplitFractions{0.7, 0.15, 0.15});
  }();
  return ds;
}

TrainConfig small_config() {
  TrainConfig c;
  c.arch = ArchSpec{12, 8, 2, 16, 1e-6};
  c.n_members = 1;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.max_epochs = 6;
  c.early_stop_patience = 20;
  c.base_seed = 5;
  return c;
}

Ensemble ensemble_of(std::vector<ProbNet> members, AggregationMode mode) {
  Ensemble e;
  e.preprocessor = Preprocessor::fit(small_dataset());
  e.train_config = small_config();
  e.mode = mode;
  e.members = std::move(members);
  return e;
}

TEST(MemberSeed, DistinctAcrossMembersAndBases) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t base : {0ULL, 1ULL, 42ULL})
    for (std::size_t m = 0; m < 50; ++m) seeds.push_back(member_seed(base, m));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
  EXPECT_EQ(member_seed(9, 3), member_seed(9, 3));
}

TEST(TrainConfig, Validation) {
  TrainConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.n_members = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_config();
  c.arch.d_out = 9;
  EXPECT_THROW(train_ensemble(small_dataset(), c), InvalidArgument);
}

TEST(TrainMember, DeterministicAndSeedSeparated) {
  const TrainConfig c = small_config();
  const MemberResult a = train_member(small_dataset(), c, 0);
  const MemberResult b = train_member(small_dataset(), c, 0);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.log.size(), c.max_epochs);

  const ProbNet i0(c.arch, member_seed(c.base_seed, 0));
  const ProbNet i1(c.arch, member_seed(c.base_seed, 1));
  std::size_t differ = 0, total = 0;
  for (std::size_t l = 0; l < c.arch.n_hidden; ++l) {
    const auto w0 = i0.params().hidden[l].weight.data();
    const auto w1 = i1.params().hidden[l].weight.data();
    for (std::size_t k = 0; k < w0.size(); ++k) differ += w0[k] != w1[k];
    total += w0.size();
  }
  EXPECT_GE(differ * 100, total * 99);
}

TEST(TrainMember, LossDecreases) {
  TrainConfig c = small_config();
  c.max_epochs = 50;
  c.early_stop_patience = 50;
  const MemberResult r = train_member(small_dataset(), c, 0);
  ASSERT_EQ(r.log.size(), 50u);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
  // The returned parameters are those of the best validation epoch.
  const auto best = std::min_element(r.log.begin(), r.log.end(),
                                     [](auto& x, auto& y) { return x.val_loss < y.val_loss; });
  EXPECT_EQ(r.best_epoch, best->epoch);
}

TEST(TrainMember, EarlyStopping) {
  TrainConfig c = small_config();
  c.max_epochs = 400;
  c.early_stop_patience = 3;
  c.learning_rate = 0.05;
  const MemberResult r = train_member(small_dataset(), c, 0);
  EXPECT_LT(r.log.size(), 400u);
  EXPECT_EQ(r.log.size(), r.best_epoch + 3);
}

TEST(TrainMember, EmptySplitRejected) {
  Dataset ds = small_dataset();
  for (Split& s : ds.split)
    if (s == Split::validation) s = Split::train;
  EXPECT_THROW(train_member(ds, small_config(), 0), InvalidArgument);
}

TEST(TrainEnsemble, SingleMemberMatchesTrainMember) {
  const TrainConfig c = small_config();
  const Ensemble e = train_ensemble(small_dataset(), c);
  ASSERT_EQ(e.members.size(), 1u);
  EXPECT_EQ(e.members[0], train_member(small_dataset(), c, 0).net);
  EXPECT_EQ(e.preprocessor, Preprocessor::fit(small_dataset(), c.log_outputs));
}

TEST(TrainEnsemble, ParallelismDoesNotChangeResult) {
  TrainConfig c = small_config();
  c.n_members = 3;
  c.max_epochs = 3;
  const Ensemble seq = train_ensemble(small_dataset(), c, 1);
  const Ensemble par = train_ensemble(small_dataset(), c, 3);
  EXPECT_EQ(seq, par);
  EXPECT_FALSE(seq.members[0] == seq.members[1]);
  EXPECT_FALSE(seq.members[1] == seq.members[2]);
  EXPECT_EQ(seq.training_log.size(), 3u);
}

TEST(AggregateMoments, HandExamples) {
  Moments m = aggregate_moments(Matrix{{0.3, -1.0}}, Matrix{{0.5, 2.0}});
  EXPECT_EQ(m.mean, (std::vector<double>{0.3, -1.0}));
  EXPECT_EQ(m.variance, (std::vector<double>{0.5, 2.0}));

  m = aggregate_moments(Matrix{{0.0}, {2.0}}, Matrix{{1.0}, {1.0}});
  EXPECT_EQ(m.mean[0], 1.0);
  EXPECT_EQ(m.variance[0], 2.0);

  m = aggregate_moments(Matrix{{0.7}, {0.7}, {0.7}}, Matrix{{0.2}, {0.2}, {0.2}});
  EXPECT_EQ(m.mean[0], 0.7);
  EXPECT_EQ(m.variance[0], 0.2);

  EXPECT_THROW(aggregate_moments(Matrix{{0.0}, {1.0}}, Matrix{{1.0}}), InvalidArgument);
}

TEST(AggregateMoments, MonteCarloMixture) {
  Rng rng(8);
  const std::size_t draws = 1'000'000;
  double s = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double c = rng.uniform_below(2) == 0 ? 0.0 : 2.0;
    const double v = c + rng.normal();
    s += v;
    ss += v * v;
  }
  const double mean = s / draws;
  const double var = ss / draws - mean * mean;
  const Moments m = aggregate_moments(Matrix{{0.0}, {2.0}}, Matrix{{1.0}, {1.0}});
  EXPECT_NEAR(m.mean[0], mean, 0.01 * std::sqrt(var));
  EXPECT_NEAR(m.variance[0], var, 0.01 * var);
}

TEST(AggregateMoments, PermutationInvariantAndBounded) {
  Rng rng(9);
  const Matrix mus = oracle::random_matrix(6, 40, rng);
  const Matrix s2 = oracle::uniform_matrix(6, 40, rng, 0.01, 2.0);
  const Moments a = aggregate_moments(mus, s2);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  const Moments b = aggregate_moments(gather_rows(mus, perm), gather_rows(s2, perm));
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance, b.variance);
  for (std::size_t j = 0; j < 40; ++j) {
    double mean_s2 = 0.0;
    for (std::size_t m = 0; m < 6; ++m) mean_s2 += s2(m, j) / 6.0;
    EXPECT_GE(a.variance[j], mean_s2 * (1 - 1e-15));
  }
}

TEST(Predict, ModesAndSpaces) {
  const ArchSpec spec = small_config().arch;
  const Ensemble one = ensemble_of({ProbNet(spec, 1)}, AggregationMode::deep_ensemble);
  const Matrix x = small_dataset().x_of(Split::test);
  const PredictiveDistribution de = predict(one, x);
  const PredictiveDistribution va = predict(one, x, AggregationMode::vanilla);
  EXPECT_EQ(de.mean, va.mean);
  EXPECT_EQ(de.variance, va.variance);
  EXPECT_THROW(predict(one, x, AggregationMode::empirical), InvalidState);

  const Preprocessor& pre = one.preprocessor;
  const double ln10 = std::log(10.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < spec.d_out; ++j) {
      const double a = pre.y_std[j];
      EXPECT_DOUBLE_EQ(de.mean_out(i, j), a * de.mean_std(i, j) + pre.y_mean[j]);
      EXPECT_DOUBLE_EQ(de.var_out(i, j), a * a * de.var_std(i, j));
      const double flux = std::pow(10.0, de.mean_out(i, j));
      EXPECT_DOUBLE_EQ(de.mean(i, j), flux);
      EXPECT_DOUBLE_EQ(de.variance(i, j), ln10 * ln10 * flux * flux * de.var_out(i, j));
    }
  }
}

TEST(Predict, EmpiricalVersusDeepEnsemble) {
  const ArchSpec spec = small_config().arch;
  const Matrix x = small_dataset().x_of(Split::test);
  const Ensemble same =
      ensemble_of({ProbNet(spec, 3), ProbNet(spec, 3), ProbNet(spec, 3)}, AggregationMode::empirical);
  const PredictiveDistribution emp = predict(same, x);
  for (double v : emp.var_std.data()) EXPECT_EQ(v, 0.0);

  const Ensemble mixed =
      ensemble_of({ProbNet(spec, 3), ProbNet(spec, 4), ProbNet(spec, 5)}, AggregationMode::empirical);
  const PredictiveDistribution e = predict(mixed, x);
  const PredictiveDistribution d = predict(mixed, x, AggregationMode::deep_ensemble);
  EXPECT_EQ(e.mean_std, d.mean_std);
  for (std::size_t i = 0; i < e.var_std.size(); ++i) EXPECT_GT(d.var_std.data()[i], e.var_std.data()[i]);

  // Empirical variance is the population variance of the member means.
  const ForwardResult f0 = forward(mixed.members[0], mixed.preprocessor.transform_x(x));
  const ForwardResult f1 = forward(mixed.members[1], mixed.preprocessor.transform_x(x));
  const ForwardResult f2 = forward(mixed.members[2], mixed.preprocessor.transform_x(x));
  for (std::size_t i = 0; i < f0.mu.size(); ++i) {
    const double m0 = f0.mu.data()[i], m1 = f1.mu.data()[i], m2 = f2.mu.data()[i];
    const double mean = (m0 + m1 + m2) / 3.0;
    const double var = ((m0 - mean) * (m0 - mean) + (m1 - mean) * (m1 - mean) +
                        (m2 - mean) * (m2 - mean)) / 3.0;
    EXPECT_NEAR(e.mean_std.data()[i], mean, 1e-14);
    EXPECT_NEAR(e.var_std.data()[i], var, 1e-14);
  }
}

TEST(Predict, BadInputs) {
  const ArchSpec spec = small_config().arch;
  const Ensemble e = ensemble_of({ProbNet(spec, 1)}, AggregationMode::deep_ensemble);
  Matrix x = small_dataset().x_of(Split::test);
  x(0, 0) = NAN;
  EXPECT_THROW(predict(e, x), InvalidArgument);
  Ensemble bad = e;
  bad.members.push_back(ProbNet(ArchSpec{12, 8, 3, 16, 1e-6}, 2));
  EXPECT_THROW(bad.validate(), InvalidState);
}

TEST(Names, RoundTrip) {
  for (auto m : {AggregationMode::deep_ensemble, AggregationMode::empirical, AggregationMode::vanilla})
    EXPECT_EQ(parse_aggregation_mode(to_string(m)), m);
  for (auto o : {Objective::nll, Objective::mse}) EXPECT_EQ(parse_objective(to_string(o)), o);
  for (auto k : {RegKind::squared_l2, RegKind::l2_norm}) EXPECT_EQ(parse_reg_kind(to_string(k)), k);
  EXPECT_THROW(parse_aggregation_mode("bogus"), InvalidArgument);
}

}  // namespace
}  // namespace emu
