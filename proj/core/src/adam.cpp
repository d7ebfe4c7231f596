#include "emu/adam.hpp"

#include <cmath>

#include "emu/errors.hpp"

namespace emu {

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  const auto same = [&](const Matrix& other) {
    return other.rows() == param.rows() && other.cols() == param.cols();
  };
  if (!same(grad) || !same(state.m) || !same(state.v)) {
    throw InvalidArgument("adam_step: parameter, gradient and moment shapes must match");
  }
  const AdamHyper& h = state.hyper;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  auto p = param.data();
  const auto g = grad.data();
  auto m = state.m.data();
  auto v = state.v.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace emu
