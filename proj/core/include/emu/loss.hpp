#pragma once

#include "emu/matrix.hpp"
#include "emu/model.hpp"

namespace emu {

enum class RegKind {
  squared_l2,  // sum of squared parameters (weight decay)
  l2_norm,     // Euclidean norm of the parameter vector
};

enum class Objective { nll, mse };

struct LossConfig {
  double beta = 5e-4;
  double alpha = 0.9;
  double epsilon = 5e-4;
  RegKind reg_kind = RegKind::squared_l2;
  /// Add 0.5 * ln(2 pi) per output dimension to reported values. Gradients
  /// are unaffected.
  bool include_constant = false;

  void validate() const;

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct NllResult {
  double loss = 0.0;
  Matrix d_mu;
  Matrix d_sigma2;
};

/// Gaussian negative log-likelihood, summed over output dimensions and
/// averaged over the batch, plus beta * reg_term. Gradients are those of the
/// batch-mean data term. Throws InvalidArgument on shape mismatch or a
/// non-positive variance.
NllResult gaussian_nll(const Matrix& y, const Matrix& mu, const Matrix& sigma2,
                       const LossConfig& cfg, double reg_term);

/// Squared error summed over outputs, averaged over the batch. Used to train
/// the empirical-variance baseline; d_sigma2 is all zero.
NllResult mse_loss(const Matrix& y, const Matrix& mu, const LossConfig& cfg, double reg_term);

struct Regularization {
  double value = 0.0;
  NetParams grad;
};

/// Value and parameter gradient of the weight prior (biases included).
Regularization regularization(const NetParams& params, RegKind kind);

/// x + epsilon * sign(input_grads), sign(0) = 0. The realised displacement
/// of every coordinate never exceeds epsilon: when x + epsilon is not
/// representable the result is rounded toward x.
Matrix fgsm_perturb(const Matrix& x, const Matrix& input_grads, double epsilon);

struct LossAndGrads {
  double loss = 0.0;
  NetParams grads;
};

/// Full objective at x (data term plus beta-weighted prior) and its
/// parameter gradient.
LossAndGrads objective_loss(const ProbNet& net, const Matrix& x, const Matrix& y,
                            const LossConfig& cfg, Objective objective = Objective::nll);

/// alpha * L(x) + (1 - alpha) * L(x'), x' = fgsm_perturb(x, dL/dx, epsilon),
/// with x' held constant when differentiating.
LossAndGrads adversarial_loss(const ProbNet& net, const Matrix& x, const Matrix& y,
                              const LossConfig& cfg, Objective objective = Objective::nll);

}  // namespace emu
