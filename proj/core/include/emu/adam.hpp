#pragma once

#include <cstdint>

#include "emu/matrix.hpp"

namespace emu {

struct AdamHyper {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for one parameter tensor.
struct AdamState {
  Matrix m;
  Matrix v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamHyper h = {})
      : m(rows, cols), v(rows, cols), hyper(h) {}
};

/// One bias-corrected Adam update of `param` in place. Throws InvalidArgument
/// when grad or the state's accumulators do not match the parameter shape.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

}  // namespace emu
