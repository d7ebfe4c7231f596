#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "emu/errors.hpp"
#include "emu/loss.hpp"
#include "oracles.hpp"

namespace emu {
namespace {

LossConfig plain(double beta = 0.0) {
  LossConfig c;
  c.beta = beta;
  c.include_constant = false;
  return c;
}

TEST(GaussianNll, HandValues) {
  EXPECT_EQ(gaussian_nll(Matrix{{1.5}}, Matrix{{1.5}}, Matrix{{1.0}}, plain(), 0.0).loss, 0.0);
  EXPECT_EQ(gaussian_nll(Matrix{{0.0}}, Matrix{{1.0}}, Matrix{{1.0}}, plain(), 0.0).loss, 0.5);
  EXPECT_NEAR(gaussian_nll(Matrix{{1.0}}, Matrix{{1.0}}, Matrix{{4.0}}, plain(), 0.0).loss,
              0.6931471805599453, 1e-15);
}

TEST(GaussianNll, ConstantAndRegTerm) {
  const Matrix y{{0.0, 1.0}}, mu{{1.0, 1.0}}, s2{{1.0, 1.0}};
  LossConfig c = plain(0.25);
  EXPECT_DOUBLE_EQ(gaussian_nll(y, mu, s2, c, 2.0).loss, 0.5 + 0.5);
  c.include_constant = true;
  EXPECT_DOUBLE_EQ(gaussian_nll(y, mu, s2, c, 2.0).loss,
                   1.0 + std::log(2.0 * std::numbers::pi));
}

TEST(GaussianNll, MatchesReferenceAndIsBatchMean) {
  Rng rng(1);
  const Matrix y = oracle::random_matrix(7, 5, rng);
  const Matrix mu = oracle::random_matrix(7, 5, rng);
  const Matrix s2 = oracle::uniform_matrix(7, 5, rng, 0.1, 3.0);
  const double l = gaussian_nll(y, mu, s2, plain(), 0.0).loss;
  EXPECT_NEAR(l, oracle::reference_nll(y, mu, s2), 1e-13);
  // Doubling the batch with a copy leaves the mean unchanged.
  std::vector<std::size_t> twice;
  for (std::size_t r = 0; r < 14; ++r) twice.push_back(r % 7);
  EXPECT_NEAR(gaussian_nll(gather_rows(y, twice), gather_rows(mu, twice), gather_rows(s2, twice),
                           plain(), 0.0)
                  .loss,
              l, 1e-13);
}

TEST(GaussianNll, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix y = oracle::random_matrix(4, 3, rng);
    Matrix mu = oracle::random_matrix(4, 3, rng);
    Matrix s2 = oracle::uniform_matrix(4, 3, rng, 0.2, 2.0);
    const NllResult r = gaussian_nll(y, mu, s2, plain(), 0.0);
    const auto rep = oracle::check_tensor_gradients(
        {&mu, &s2}, {&r.d_mu, &r.d_sigma2}, [&] { return oracle::reference_nll(y, mu, s2); });
    EXPECT_LE(rep.worst, 1e-6);
  }
}

TEST(GaussianNll, MinimisedAtSquaredResidual) {
  const Matrix y{{0.3}}, mu{{-0.2}};
  const double r2 = 0.25;
  const auto d = [&](double v) { return gaussian_nll(y, mu, Matrix{{v}}, plain(), 0.0).d_sigma2(0, 0); };
  EXPECT_LT(d(r2 * 0.99), 0.0);
  EXPECT_GT(d(r2 * 1.01), 0.0);
  EXPECT_NEAR(d(r2), 0.0, 1e-15);
}

TEST(GaussianNll, Errors) {
  EXPECT_THROW(gaussian_nll(Matrix{{0.0}}, Matrix{{0.0}}, Matrix{{0.0}}, plain(), 0.0),
               InvalidArgument);
  EXPECT_THROW(gaussian_nll(Matrix{{0.0}}, Matrix{{0.0}}, Matrix{{-1.0}}, plain(), 0.0),
               InvalidArgument);
  EXPECT_THROW(gaussian_nll(Matrix{{0.0}}, Matrix{{0.0, 1.0}}, Matrix{{1.0}}, plain(), 0.0),
               InvalidArgument);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = LossConfig{};
  c.beta = -1e-9;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = LossConfig{};
  c.epsilon = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Regularization, SquaredL2ShiftsGradientByTwoBetaTheta) {
  const ArchSpec spec{3, 2, 2, 4, 1e-6};
  const ProbNet net(spec, 3);
  Rng rng(3);
  const Matrix x = oracle::random_matrix(5, 3, rng);
  const Matrix y = oracle::random_matrix(5, 2, rng);
  const double beta = 5e-4;
  const LossAndGrads g0 = objective_loss(net, x, y, plain(0.0));
  const LossAndGrads g1 = objective_loss(net, x, y, plain(beta));
  EXPECT_NEAR(g1.loss - g0.loss, beta * oracle::reference_sum_squares(net.params()), 1e-14);
  const auto a = g0.grads.tensors();
  const auto b = g1.grads.tensors();
  const auto th = net.params().tensors();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t]->size(); ++i)
      EXPECT_EQ(b[t]->data()[i], a[t]->data()[i] + beta * (2.0 * th[t]->data()[i]));
}

TEST(Regularization, NormKind) {
  NetParams p = NetParams::zeros(ArchSpec{1, 1, 1, 1, 1e-6});
  Regularization r = regularization(p, RegKind::l2_norm);
  EXPECT_EQ(r.value, 0.0);
  for (const Matrix* t : r.grad.tensors())
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
  p.hidden[0].weight(0, 0) = 3.0;
  p.sigma_head.bias(0, 0) = -4.0;
  r = regularization(p, RegKind::l2_norm);
  EXPECT_EQ(r.value, 5.0);
  EXPECT_DOUBLE_EQ(r.grad.hidden[0].weight(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(r.grad.sigma_head.bias(0, 0), -0.8);
  r = regularization(p, RegKind::squared_l2);
  EXPECT_EQ(r.value, 25.0);
  EXPECT_EQ(r.grad.sigma_head.bias(0, 0), -8.0);
}

TEST(Fgsm, HandExamples) {
  const Matrix x{{0.5, -0.2}};
  const Matrix out = fgsm_perturb(x, Matrix{{2.0, -3.0}}, 5e-4);
  EXPECT_NEAR(out(0, 0), 0.5005, 1e-15);
  EXPECT_NEAR(out(0, 1), -0.2005, 1e-15);
  EXPECT_EQ(fgsm_perturb(x, Matrix{{0.0, 0.0}}, 5e-4), x);
  EXPECT_EQ(fgsm_perturb(x, Matrix{{1.0, 1.0}}, 0.0), x);
  EXPECT_THROW(fgsm_perturb(x, Matrix{{1.0}}, 5e-4), InvalidArgument);
  EXPECT_THROW(fgsm_perturb(x, x, -1.0), InvalidArgument);
}

TEST(Fgsm, DisplacementNeverExceedsEpsilon) {
  Rng rng(4);
  Matrix x = oracle::random_matrix(200, 12, rng, 3.0);
  const Matrix g = oracle::random_matrix(200, 12, rng);
  for (double eps : {5e-4, 1e-3, 0.1, 1.0 / 3.0}) {
    const Matrix out = fgsm_perturb(x, g, eps);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const __float128 d = static_cast<__float128>(out.data()[i]) - x.data()[i];
      const __float128 ad = d < 0 ? -d : d;
      ASSERT_LE(ad, static_cast<__float128>(eps));
      ASSERT_EQ(d > 0, g.data()[i] > 0);
      // One ulp further out would break the bound: the step is the largest allowed.
      const double further = std::nextafter(out.data()[i], d > 0 ? INFINITY : -INFINITY);
      const __float128 fd = static_cast<__float128>(further) - x.data()[i];
      ASSERT_GT(fd < 0 ? -fd : fd, static_cast<__float128>(eps));
    }
  }
}

// Blended objective evaluated with x' held fixed, from reference formulas.
double blended_reference(const ProbNet& net, const Matrix& x, const Matrix& x_adv, const Matrix& y,
                         const LossConfig& cfg) {
  const ForwardResult a = forward(net, x);
  const ForwardResult b = forward(net, x_adv);
  const double ss = oracle::reference_sum_squares(net.params());
  const double reg = cfg.reg_kind == RegKind::squared_l2 ? ss : std::sqrt(ss);
  return cfg.alpha * oracle::reference_nll(y, a.mu, a.sigma2) +
         (1.0 - cfg.alpha) * oracle::reference_nll(y, b.mu, b.sigma2) + cfg.beta * reg;
}

TEST(AdversarialLoss, DegenerateCasesMatchPlainObjective) {
  const ProbNet net(ArchSpec{3, 2, 2, 5, 1e-6}, 5);
  Rng rng(5);
  const Matrix x = oracle::random_matrix(6, 3, rng);
  const Matrix y = oracle::random_matrix(6, 2, rng);
  LossConfig c = plain(5e-4);
  c.alpha = 1.0;
  const LossAndGrads ref = objective_loss(net, x, y, c);
  LossAndGrads at = adversarial_loss(net, x, y, c);
  EXPECT_EQ(at.loss, ref.loss);
  EXPECT_EQ(at.grads, ref.grads);
  c.alpha = 0.3;
  c.epsilon = 0.0;
  at = adversarial_loss(net, x, y, c);
  EXPECT_EQ(at.loss, objective_loss(net, x, y, c).loss);
}

TEST(AdversarialLoss, BlendedGradientsMatchFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 8; ++trial) {
    const ArchSpec spec{2 + rng.uniform_below(3), 1 + rng.uniform_below(3), 1 + rng.uniform_below(3),
                        2 + rng.uniform_below(5), 1e-6};
    ProbNet net(spec, 200 + trial);
    const Matrix x = oracle::random_matrix(5, spec.d_in, rng);
    const Matrix y = oracle::random_matrix(5, spec.d_out, rng);
    LossConfig c = plain(trial % 2 ? 5e-4 : 0.0);
    c.alpha = 0.9;
    c.epsilon = 0.05;
    c.reg_kind = trial % 4 < 2 ? RegKind::squared_l2 : RegKind::l2_norm;

    // x' from the clean input gradient at the unperturbed parameters.
    const ForwardResult f = forward(net, x);
    const NllResult l = gaussian_nll(y, f.mu, f.sigma2, c, 0.0);
    const Matrix x_adv = fgsm_perturb(x, backward(net, f.cache, l.d_mu, l.d_sigma2).input_grads,
                                      c.epsilon);

    const LossAndGrads at = adversarial_loss(net, x, y, c);
    EXPECT_NEAR(at.loss, blended_reference(net, x, x_adv, y, c), 1e-12);
    const auto rep = oracle::check_tensor_gradients(
        net.mutable_params().tensors(), at.grads.tensors(),
        [&] { return blended_reference(net, x, x_adv, y, c); });
    EXPECT_LE(rep.worst, 1e-5) << "trial " << trial;
  }
}

TEST(MseLoss, ValueAndGradient) {
  const Matrix y{{1.0, 2.0}, {0.0, 0.0}}, mu{{0.0, 2.0}, {1.0, -1.0}};
  const NllResult r = mse_loss(y, mu, plain(), 0.0);
  EXPECT_DOUBLE_EQ(r.loss, 1.5);
  EXPECT_DOUBLE_EQ(r.d_mu(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(r.d_mu(1, 1), -1.0);
  for (double v : r.d_sigma2.data()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace emu
