#include "emu/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "emu/errors.hpp"
#include "emu/rng.hpp"

namespace emu {

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train:
      return "train";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw InvalidArgument("unknown split name '" + std::string(name) + "'");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

Matrix Dataset::x_of(Split s) const { return gather_rows(x, indices(s)); }
Matrix Dataset::y_of(Split s) const { return gather_rows(y, indices(s)); }

void Dataset::validate() const {
  if (x.rows() != y.rows() || x.rows() != split.size()) {
    throw InvalidArgument("Dataset: x, y and split must have the same number of rows");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y.data()[i] > 0.0) || !std::isfinite(y.data()[i])) {
      throw InvalidArgument("Dataset: flux at row " + std::to_string(i / y.cols()) + ", column " +
                            std::to_string(i % y.cols()) + " is not finite and > 0");
    }
  }
  if (!x.all_finite()) throw InvalidArgument("Dataset: non-finite input parameter");
}

void SplitFractions::validate() const {
  if (!(train >= 0.0 && validation >= 0.0 && test >= 0.0)) {
    throw InvalidArgument("split fractions must be >= 0");
  }
  const double total = train + validation + test;
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must sum to 1 (got " + std::to_string(total) + ")");
  }
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions) {
  fractions.validate();
  const double dn = static_cast<double>(n);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * dn));
  const auto n_val = static_cast<std::size_t>(std::llround(fractions.validation * dn));
  if (n_train + n_val > n) throw InvalidArgument("split fractions exceed the row count");
  return {n_train, n_val, n - n_train - n_val};
}

Dataset generate_dataset(std::size_t n, const SimulatorConfig& cfg, const SplitFractions& fractions) {
  cfg.validate();
  const auto sizes = split_sizes(n, fractions);
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    throw InvalidArgument("generate_dataset: n = " + std::to_string(n) +
                          " leaves at least one split empty");
  }

  Dataset ds{Matrix(n, cfg.d_in), Matrix(n, cfg.d_out), std::vector<Split>(n, Split::train)};
  for (std::size_t i = 0; i < n; ++i) {
    Rng param_rng(derive_seed(cfg.seed, stream::kParams, i));
    auto xr = ds.x.row(i);
    for (auto& v : xr) v = param_rng.uniform();
    const std::vector<double> flux = simulate_spectrum(xr, cfg, true, i);
    std::copy(flux.begin(), flux.end(), ds.y.row(i).begin());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, stream::kSplit, 0));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[split_rng.uniform_below(i)]);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row = order[r];
    if (r < sizes[0]) {
      ds.split[row] = Split::train;
    } else if (r < sizes[0] + sizes[1]) {
      ds.split[row] = Split::validation;
    } else {
      ds.split[row] = Split::test;
    }
  }
  return ds;
}

}  // namespace emu
