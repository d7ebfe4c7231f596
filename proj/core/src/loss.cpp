#include "emu/loss.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "emu/errors.hpp"

namespace emu {

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("LossConfig: alpha must lie in [0, 1]");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("LossConfig: beta must be >= 0");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("LossConfig: epsilon must be >= 0");
  }
}

namespace {

void require_same(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": shapes differ");
  }
}

// True when the exact real difference |a - x| exceeds eps. The difference is
// recovered exactly with Knuth's two-sum.
bool displacement_exceeds(double a, double x, double eps) {
  const double s = a - x;
  const double bv = s - a;
  const double e = (a - (s - bv)) + (-x - bv);
  const double mag = std::abs(s);
  if (mag != eps) return mag > eps;
  return e != 0.0 && std::signbit(e) == std::signbit(s);
}

double step_bounded(double x, double direction, double eps) {
  if (direction == 0.0 || eps == 0.0) return x;
  double target = direction > 0.0 ? x + eps : x - eps;
  while (displacement_exceeds(target, x, eps)) target = std::nextafter(target, x);
  return target;
}

LossAndGrads combine(const NetParams& data_grads, const Regularization& reg, double beta) {
  LossAndGrads out;
  out.grads = data_grads;
  if (beta != 0.0) {
    auto dst = out.grads.tensors();
    const auto src = reg.grad.tensors();
    for (std::size_t i = 0; i < dst.size(); ++i) axpy_inplace(*dst[i], beta, *src[i]);
  }
  return out;
}

struct SinglePass {
  double loss;
  BackwardResult grads;
};

SinglePass evaluate(const ProbNet& net, const Matrix& x, const Matrix& y, const LossConfig& cfg,
                    Objective objective, double reg_value) {
  ForwardResult f = forward(net, x);
  NllResult l = objective == Objective::nll ? gaussian_nll(y, f.mu, f.sigma2, cfg, reg_value)
                                            : mse_loss(y, f.mu, cfg, reg_value);
  return {l.loss, backward(net, f.cache, l.d_mu, l.d_sigma2)};
}

}  // namespace

NllResult gaussian_nll(const Matrix& y, const Matrix& mu, const Matrix& sigma2,
                       const LossConfig& cfg, double reg_term) {
  require_same(y, mu, "gaussian_nll");
  require_same(y, sigma2, "gaussian_nll");
  const std::size_t n = y.rows();
  if (n == 0) throw InvalidArgument("gaussian_nll: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);

  NllResult r{0.0, Matrix(n, y.cols()), Matrix(n, y.cols())};
  const auto yd = y.data();
  const auto md = mu.data();
  const auto vd = sigma2.data();
  auto gm = r.d_mu.data();
  auto gv = r.d_sigma2.data();
  double total = 0.0;
  for (std::size_t i = 0; i < yd.size(); ++i) {
    const double var = vd[i];
    if (!(var > 0.0)) {
      throw InvalidArgument("gaussian_nll: sigma2 must be > 0 (element " + std::to_string(i) + ")");
    }
    const double resid = yd[i] - md[i];
    const double inv_var = 1.0 / var;
    total += 0.5 * std::log(var) + 0.5 * resid * resid * inv_var;
    gm[i] = -resid * inv_var * inv_n;
    gv[i] = 0.5 * (inv_var - resid * resid * inv_var * inv_var) * inv_n;
  }
  r.loss = total * inv_n + cfg.beta * reg_term;
  if (cfg.include_constant) {
    r.loss += 0.5 * std::log(2.0 * std::numbers::pi) * static_cast<double>(y.cols());
  }
  return r;
}

NllResult mse_loss(const Matrix& y, const Matrix& mu, const LossConfig& cfg, double reg_term) {
  require_same(y, mu, "mse_loss");
  const std::size_t n = y.rows();
  if (n == 0) throw InvalidArgument("mse_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  NllResult r{0.0, Matrix(n, y.cols()), Matrix(n, y.cols())};
  const auto yd = y.data();
  const auto md = mu.data();
  auto gm = r.d_mu.data();
  double total = 0.0;
  for (std::size_t i = 0; i < yd.size(); ++i) {
    const double resid = yd[i] - md[i];
    total += resid * resid;
    gm[i] = -2.0 * resid * inv_n;
  }
  r.loss = total * inv_n + cfg.beta * reg_term;
  return r;
}

Regularization regularization(const NetParams& params, RegKind kind) {
  const ParamNorms norms = param_vector_norms(params);
  Regularization r;
  r.grad = params;
  if (kind == RegKind::squared_l2) {
    r.value = norms.l2_squared;
    for (Matrix* t : r.grad.tensors())
      for (auto& v : t->data()) v *= 2.0;
  } else {
    r.value = norms.l2;
    // The norm is not differentiable at the origin; use the zero subgradient.
    const double inv = norms.l2 > 0.0 ? 1.0 / norms.l2 : 0.0;
    for (Matrix* t : r.grad.tensors())
      for (auto& v : t->data()) v *= inv;
  }
  return r;
}

Matrix fgsm_perturb(const Matrix& x, const Matrix& input_grads, double epsilon) {
  require_same(x, input_grads, "fgsm_perturb");
  if (!(epsilon >= 0.0)) throw InvalidArgument("fgsm_perturb: epsilon must be >= 0");
  Matrix out(x.rows(), x.cols());
  const auto xd = x.data();
  const auto gd = input_grads.data();
  auto od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double sign = static_cast<double>((gd[i] > 0.0) - (gd[i] < 0.0));
    od[i] = step_bounded(xd[i], sign, epsilon);
  }
  return out;
}

LossAndGrads objective_loss(const ProbNet& net, const Matrix& x, const Matrix& y,
                            const LossConfig& cfg, Objective objective) {
  cfg.validate();
  const Regularization reg = regularization(net.params(), cfg.reg_kind);
  SinglePass pass = evaluate(net, x, y, cfg, objective, reg.value);
  LossAndGrads out = combine(pass.grads.param_grads, reg, cfg.beta);
  out.loss = pass.loss;
  return out;
}

LossAndGrads adversarial_loss(const ProbNet& net, const Matrix& x, const Matrix& y,
                              const LossConfig& cfg, Objective objective) {
  cfg.validate();
  // Degenerate mixing: x' = x or zero weight on L(x'), so the blend is L(x).
  if (cfg.alpha == 1.0 || cfg.epsilon == 0.0) return objective_loss(net, x, y, cfg, objective);

  const Regularization reg = regularization(net.params(), cfg.reg_kind);
  SinglePass clean = evaluate(net, x, y, cfg, objective, reg.value);
  const Matrix x_adv = fgsm_perturb(x, clean.grads.input_grads, cfg.epsilon);
  SinglePass adv = evaluate(net, x_adv, y, cfg, objective, reg.value);

  const double a = cfg.alpha;
  NetParams blended = clean.grads.param_grads;
  auto dst = blended.tensors();
  const auto src = adv.grads.param_grads.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (auto& v : dst[i]->data()) v *= a;
    axpy_inplace(*dst[i], 1.0 - a, *src[i]);
  }
  LossAndGrads out = combine(blended, reg, cfg.beta);
  out.loss = a * clean.loss + (1.0 - a) * adv.loss;
  return out;
}

}  // namespace emu
