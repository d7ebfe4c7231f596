#include "emu/activation.hpp"

#include <Eigen/Core>

#include <cmath>

namespace emu {

namespace {

// Evaluates softplus and its derivative for n values. Work buffers are padded
// to whole packets so every element, including a lone scalar, goes through
// the same vectorized exp/log and the result never depends on position.
void softplus_block(const double* z, std::size_t n, double* value, double* grad) {
  constexpr std::size_t kPacket = 16;
  const std::size_t padded = (n + kPacket - 1) / kPacket * kPacket;
  thread_local Eigen::ArrayXd e;
  thread_local Eigen::ArrayXd l;
  if (static_cast<std::size_t>(e.size()) < padded) {
    e.resize(static_cast<Eigen::Index>(padded));
    l.resize(static_cast<Eigen::Index>(padded));
  }
  auto eh = e.head(static_cast<Eigen::Index>(padded));
  auto lh = l.head(static_cast<Eigen::Index>(padded));
  for (std::size_t i = 0; i < n; ++i) eh[static_cast<Eigen::Index>(i)] = -std::abs(z[i]);
  for (std::size_t i = n; i < padded; ++i) eh[static_cast<Eigen::Index>(i)] = 0.0;
  eh = eh.exp();
  lh = (eh + 1.0).log();
  const double* ep = e.data();
  const double* lg = l.data();
  if (value != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = 1.0 + ep[i];
      const double d = u - 1.0;
      // log(u) * e / (u - 1) recovers log1p(e) to a few ulp.
      const double lp = d == 0.0 ? ep[i] : lg[i] * (ep[i] / d);
      value[i] = (z[i] > 0.0 ? z[i] : 0.0) + lp;
    }
  }
  if (grad != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = 1.0 + ep[i];
      grad[i] = (z[i] >= 0.0 ? 1.0 : ep[i]) / u;
    }
  }
}

}  // namespace

double softplus(double z) noexcept {
  double v = 0.0;
  softplus_block(&z, 1, &v, nullptr);
  return v;
}

double softplus_grad(double z) noexcept {
  double g = 0.0;
  softplus_block(&z, 1, nullptr, &g);
  return g;
}

Matrix softplus(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  softplus_block(z.data().data(), z.size(), out.data().data(), nullptr);
  return out;
}

Matrix softplus_grad(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  softplus_block(z.data().data(), z.size(), nullptr, out.data().data());
  return out;
}

void softplus_with_grad(const Matrix& z, Matrix& value, Matrix& grad) {
  value = Matrix(z.rows(), z.cols());
  grad = Matrix(z.rows(), z.cols());
  softplus_block(z.data().data(), z.size(), value.data().data(), grad.data().data());
}

}  // namespace emu
