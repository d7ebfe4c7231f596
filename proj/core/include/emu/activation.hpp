#pragma once

#include "emu/matrix.hpp"

namespace emu {

/// log(1 + exp(z)) without overflow for large |z|.
double softplus(double z) noexcept;

/// Derivative of softplus, i.e. the logistic sigmoid.
double softplus_grad(double z) noexcept;

Matrix softplus(const Matrix& z);
Matrix softplus_grad(const Matrix& z);

/// Both of the above from a single exponential per element; results match
/// the separate calls bit for bit.
void softplus_with_grad(const Matrix& z, Matrix& value, Matrix& grad);

}  // namespace emu
