#pragma once

#include <vector>

#include "emu/dataset.hpp"
#include "emu/matrix.hpp"

namespace emu {

/// Per-column standardisation of inputs and (optionally log10-transformed)
/// outputs. Statistics come from the training split only and use the
/// population (divide-by-n) standard deviation.
struct Preprocessor {
  bool log_outputs = true;
  std::vector<double> x_mean;
  std::vector<double> x_std;
  std::vector<double> y_mean;  // in log10 space when log_outputs
  std::vector<double> y_std;

  /// Throws InvalidArgument naming the column when a training column has zero
  /// variance, or when log_outputs is set and a training flux is not > 0.
  static Preprocessor fit(const Dataset& ds, bool log_outputs = true);

  Matrix transform_x(const Matrix& x) const;
  Matrix inverse_transform_x(const Matrix& z) const;
  Matrix transform_y(const Matrix& y) const;
  Matrix inverse_transform_y(const Matrix& z) const;

  /// Raw outputs to the space the standardisation acts on (log10 or identity).
  Matrix to_output_space(const Matrix& y) const;
  Matrix from_output_space(const Matrix& v) const;

  void validate() const;

  friend bool operator==(const Preprocessor&, const Preprocessor&) = default;
};

}  // namespace emu
