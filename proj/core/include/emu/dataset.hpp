#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "emu/matrix.hpp"
#include "emu/simulator.hpp"

namespace emu {

enum class Split : std::uint8_t { train, validation, test };

std::string_view to_string(Split s) noexcept;
/// Throws InvalidArgument for anything but "train", "validation", "test".
Split parse_split(std::string_view name);

/// Paired simulator inputs (n x d_in) and spectra (n x d_out, strictly
/// positive) with one split tag per row.
struct Dataset {
  Matrix x;
  Matrix y;
  std::vector<Split> split;

  std::size_t rows() const noexcept { return x.rows(); }
  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;
  Matrix x_of(Split s) const;
  Matrix y_of(Split s) const;

  /// Throws InvalidArgument when shapes disagree or a flux is not > 0.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitFractions {
  double train = 0.715;
  double validation = 0.1425;
  double test = 0.1425;

  /// Throws InvalidArgument unless all are >= 0 and they sum to 1 (1e-9).
  void validate() const;
};

/// Row counts per split: train and validation are round(f * n), test takes
/// the remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& fractions);

/// n parameter vectors drawn uniformly on [0, 1]^12, one noisy simulator run
/// each, tagged by a seeded shuffle. Throws InvalidArgument if any split
/// would be empty.
Dataset generate_dataset(std::size_t n, const SimulatorConfig& cfg, const SplitFractions& fractions);

// CSV layout: header x0..x{d_in-1},y0..y{d_out-1}; values written in the
// shortest form that parses back to the same double. Companion split file:
// header row_index,split.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& data_path,
                       const std::filesystem::path& split_path);
Dataset read_dataset_csv(const std::filesystem::path& data_path,
                         const std::filesystem::path& split_path);

/// Default companion path: "data.csv" -> "data.split.csv".
std::filesystem::path default_split_path(const std::filesystem::path& data_path);

/// True for a ".pdmx" extension.
bool is_pdmx_path(const std::filesystem::path& path);

/// Files making up the dataset stored at `path`. A ".pdmx" path stands for
/// "<stem>.x.pdmx" and "<stem>.y.pdmx"; anything else is the CSV layout. The
/// split file is default_split_path(path) in both cases.
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Plain numeric CSV with a header row whose names all start with `prefix`
/// (e.g. x0,x1,...). An empty file or header-only file yields 0 rows.
Matrix read_matrix_csv(const std::filesystem::path& path, std::string_view prefix,
                       std::size_t expected_cols);
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path,
                      const std::vector<std::string>& header);

/// Binary matrix: "PDMX", then little-endian u64 version (1), rows, cols,
/// followed by rows * cols little-endian IEEE-754 doubles in row-major order.
void write_pdmx(const Matrix& m, const std::filesystem::path& path);
Matrix read_pdmx(const std::filesystem::path& path);

/// Shortest round-trip decimal form of v.
std::string format_double(double v);

}  // namespace emu
