#include "emu/preprocess.hpp"

#include <cmath>
#include <string>

#include "emu/errors.hpp"

namespace emu {

namespace {

void column_stats(const Matrix& m, const char* prefix, std::vector<double>& mean,
                  std::vector<double>& stddev) {
  const std::size_t n = m.rows();
  if (n == 0) throw InvalidArgument("Preprocessor: training split is empty");
  mean.assign(m.cols(), 0.0);
  stddev.assign(m.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(i, j);
  for (auto& v : mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double d = m(i, j) - mean[j];
      stddev[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < m.cols(); ++j) {
    stddev[j] = std::sqrt(stddev[j] / static_cast<double>(n));
    if (!(stddev[j] > 0.0)) {
      throw InvalidArgument("Preprocessor: column " + std::string(prefix) + std::to_string(j) +
                            " has zero variance in the training split");
    }
  }
}

Matrix standardize(const Matrix& m, const std::vector<double>& mean, const std::vector<double>& sd,
                   const char* what) {
  if (m.cols() != mean.size()) {
    throw InvalidArgument(std::string("Preprocessor: ") + what + " has " +
                          std::to_string(m.cols()) + " columns, expected " +
                          std::to_string(mean.size()));
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - mean[j]) / sd[j];
  return out;
}

Matrix destandardize(const Matrix& z, const std::vector<double>& mean,
                     const std::vector<double>& sd, const char* what) {
  if (z.cols() != mean.size()) {
    throw InvalidArgument(std::string("Preprocessor: ") + what + " has " +
                          std::to_string(z.cols()) + " columns, expected " +
                          std::to_string(mean.size()));
  }
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = z(i, j) * sd[j] + mean[j];
  return out;
}

}  // namespace

Preprocessor Preprocessor::fit(const Dataset& ds, bool log_outputs) {
  Preprocessor p;
  p.log_outputs = log_outputs;
  const Matrix x = ds.x_of(Split::train);
  const Matrix y = ds.y_of(Split::train);
  column_stats(x, "x", p.x_mean, p.x_std);
  column_stats(p.to_output_space(y), "y", p.y_mean, p.y_std);
  return p;
}

Matrix Preprocessor::to_output_space(const Matrix& y) const {
  if (!log_outputs) return y;
  Matrix out(y.rows(), y.cols());
  const auto in = y.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] > 0.0)) {
      throw InvalidArgument("Preprocessor: log transform needs positive flux (column y" +
                            std::to_string(y.cols() ? i % y.cols() : 0) + ")");
    }
    o[i] = std::log10(in[i]);
  }
  return out;
}

Matrix Preprocessor::from_output_space(const Matrix& v) const {
  if (!log_outputs) return v;
  Matrix out(v.rows(), v.cols());
  const auto in = v.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::pow(10.0, in[i]);
  return out;
}

Matrix Preprocessor::transform_x(const Matrix& x) const {
  return standardize(x, x_mean, x_std, "input");
}

Matrix Preprocessor::inverse_transform_x(const Matrix& z) const {
  return destandardize(z, x_mean, x_std, "input");
}

Matrix Preprocessor::transform_y(const Matrix& y) const {
  return standardize(to_output_space(y), y_mean, y_std, "output");
}

Matrix Preprocessor::inverse_transform_y(const Matrix& z) const {
  return from_output_space(destandardize(z, y_mean, y_std, "output"));
}

void Preprocessor::validate() const {
  if (x_mean.size() != x_std.size() || y_mean.size() != y_std.size() || x_mean.empty() ||
      y_mean.empty()) {
    throw InvalidArgument("Preprocessor: inconsistent statistics");
  }
  for (double s : x_std)
    if (!(s > 0.0)) throw InvalidArgument("Preprocessor: input std must be > 0");
  for (double s : y_std)
    if (!(s > 0.0)) throw InvalidArgument("Preprocessor: output std must be > 0");
}

}  // namespace emu
