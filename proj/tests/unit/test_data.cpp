#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "emu/errors.hpp"
#include "emu/dataset.hpp"
#include "emu/preprocess.hpp"
#include "emu/simulator.hpp"
#include "oracles.hpp"

namespace emu {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "emu_test_data";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> mid_params() { return std::vector<double>(12, 0.5); }

// Mean spectrum from the documented formula, written independently.
double documented_spectrum(const std::vector<double>& p, double u) {
  const double centres[9] = {0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90};
  const double widths[9] = {0.025, 0.035, 0.030, 0.040, 0.025, 0.035, 0.030, 0.040, 0.030};
  const double amp = 1.0 + p[0];
  const double u0 = 0.3 + 0.4 * p[1];
  const double w = 0.2 + 0.2 * p[2];
  double s = amp * (0.4 + std::exp(-(u - u0) * (u - u0) / (2 * w * w)));
  for (int k = 0; k < 9; ++k) {
    const double d = 0.6 * p[3 + k];
    s *= 1.0 - d * std::exp(-(u - centres[k]) * (u - centres[k]) / (2 * widths[k] * widths[k]));
  }
  return s;
}

TEST(Simulator, MeanSpectrumMatchesDocumentedFormula) {
  SimulatorConfig cfg;
  cfg.d_out = 33;
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(12);
    for (double& v : p) v = rng.uniform();
    const auto s = mean_spectrum(p, cfg);
    ASSERT_EQ(s.size(), 33u);
    for (std::size_t j = 0; j < 33; ++j) {
      EXPECT_NEAR(s[j], documented_spectrum(p, j / 32.0), 1e-12 * s[j]);
      EXPECT_GT(s[j], 0.0);
    }
  }
  const auto grid = wavelength_grid(cfg);
  EXPECT_EQ(grid.front(), 3000.0);
  EXPECT_EQ(grid.back(), 9000.0);
  EXPECT_DOUBLE_EQ(grid[16], 6000.0);
}

TEST(Simulator, Determinism) {
  SimulatorConfig cfg;
  EXPECT_EQ(simulate_spectrum(mid_params(), cfg, false), simulate_spectrum(mid_params(), cfg, false));
  EXPECT_EQ(simulate_spectrum(mid_params(), cfg, true, 4), simulate_spectrum(mid_params(), cfg, true, 4));
  EXPECT_NE(simulate_spectrum(mid_params(), cfg, true, 4), simulate_spectrum(mid_params(), cfg, true, 5));
}

TEST(Simulator, VanishingNoise) {
  SimulatorConfig cfg;
  cfg.packet_count = 1e12;
  const auto clean = mean_spectrum(mid_params(), cfg);
  const auto noisy = simulate_spectrum(mid_params(), cfg, true, 0);
  for (std::size_t j = 0; j < clean.size(); ++j) EXPECT_NEAR(noisy[j], clean[j], 1e-4 * clean[j]);
}

TEST(Simulator, NoiseLaw) {
  SimulatorConfig cfg;
  cfg.d_out = 16;
  cfg.packet_count = 400;
  cfg.noise_coeff = 1.0;
  cfg.seed = 3;
  const auto clean = mean_spectrum(mid_params(), cfg);
  const std::size_t n = 10'000;
  std::vector<double> s(16), ss(16);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = simulate_spectrum(mid_params(), cfg, true, i);
    for (std::size_t j = 0; j < 16; ++j) {
      s[j] += v[j];
      ss[j] += v[j] * v[j];
    }
  }
  for (std::size_t j = 0; j < 16; ++j) {
    const double mean = s[j] / n;
    const double sd = std::sqrt(ss[j] / n - mean * mean);
    EXPECT_NEAR(mean, clean[j], 0.01 * clean[j]);
    EXPECT_NEAR(sd, clean[j] * 0.05, 0.05 * clean[j] * 0.05);
  }
}

TEST(Simulator, Errors) {
  SimulatorConfig cfg;
  auto p = mid_params();
  p[4] = 1.5;
  EXPECT_THROW(mean_spectrum(p, cfg), InvalidArgument);
  p[4] = -0.1;
  EXPECT_THROW(simulate_spectrum(p, cfg, true), InvalidArgument);
  EXPECT_THROW(mean_spectrum(std::vector<double>(11, 0.5), cfg), InvalidArgument);
  cfg.d_out = 7;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SimulatorConfig{};
  cfg.packet_count = 0.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Splits, Sizes) {
  EXPECT_EQ(split_sizes(126000, SplitFractions{}), (std::array<std::size_t, 3>{90090, 17955, 17955}));
  EXPECT_EQ(split_sizes(100, SplitFractions{0.8, 0.1, 0.1}), (std::array<std::size_t, 3>{80, 10, 10}));
  EXPECT_THROW((SplitFractions{0.8, 0.1, 0.0}.validate()), InvalidArgument);
  EXPECT_THROW((SplitFractions{1.1, -0.1, 0.0}.validate()), InvalidArgument);
  EXPECT_EQ(parse_split("validation"), Split::validation);
  EXPECT_EQ(to_string(Split::test), "test");
  EXPECT_THROW(parse_split("val"), InvalidArgument);
}

TEST(GenerateDataset, ShapeSplitAndDeterminism) {
  SimulatorConfig cfg;
  cfg.d_out = 8;
  cfg.seed = 11;
  const Dataset a = generate_dataset(300, cfg, SplitFractions{});
  EXPECT_EQ(a.x.rows(), 300u);
  EXPECT_EQ(a.x.cols(), 12u);
  EXPECT_EQ(a.y.cols(), 8u);
  const auto sizes = split_sizes(300, SplitFractions{});
  EXPECT_EQ(a.count(Split::train), sizes[0]);
  EXPECT_EQ(a.count(Split::validation), sizes[1]);
  EXPECT_EQ(a.count(Split::test), sizes[2]);
  for (double v : a.y.data()) EXPECT_GT(v, 0.0);
  for (double v : a.x.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(a, generate_dataset(300, cfg, SplitFractions{}));
  cfg.seed = 12;
  EXPECT_FALSE(a == generate_dataset(300, cfg, SplitFractions{}));
  EXPECT_THROW(generate_dataset(3, cfg, SplitFractions{}), InvalidArgument);
}

Dataset tiny_dataset() {
  Dataset ds;
  ds.x = Matrix(5, 12);
  ds.y = Matrix(5, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 12; ++j) ds.x(i, j) = static_cast<double>(i + 1) + j;
    ds.y(i, 0) = static_cast<double>(i + 1);
    ds.y(i, 1) = 10.0 * (i + 1);
  }
  ds.split = {Split::train, Split::train, Split::train, Split::validation, Split::test};
  return ds;
}

TEST(Preprocessor, HandColumn) {
  const Preprocessor p = Preprocessor::fit(tiny_dataset(), false);
  EXPECT_EQ(p.x_mean[0], 2.0);
  EXPECT_NEAR(p.x_std[0], std::sqrt(2.0 / 3.0), 1e-15);
  const Matrix z = p.transform_x(tiny_dataset().x_of(Split::train));
  EXPECT_NEAR(z(0, 0), -1.224744871391589, 1e-14);
  EXPECT_EQ(z(1, 0), 0.0);
  EXPECT_NEAR(z(2, 0), 1.224744871391589, 1e-14);
  const Matrix zy = p.transform_y(tiny_dataset().y_of(Split::train));
  EXPECT_NEAR(zy(0, 1), -1.224744871391589, 1e-14);

  const Preprocessor lp = Preprocessor::fit(tiny_dataset(), true);
  EXPECT_NEAR(lp.y_mean[1], 1.0 + std::log10(6.0) / 3.0, 1e-15);
}

TEST(Preprocessor, StandardisesTrainingSplitAndInverts) {
  SimulatorConfig cfg;
  cfg.d_out = 8;
  const Dataset ds = generate_dataset(400, cfg, SplitFractions{});
  const Preprocessor p = Preprocessor::fit(ds);
  const Matrix zx = p.transform_x(ds.x_of(Split::train));
  const Matrix zy = p.transform_y(ds.y_of(Split::train));
  for (const Matrix* z : {&zx, &zy}) {
    for (std::size_t j = 0; j < z->cols(); ++j) {
      double s = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < z->rows(); ++i) s += (*z)(i, j);
      const double mean = s / z->rows();
      for (std::size_t i = 0; i < z->rows(); ++i) ss += ((*z)(i, j) - mean) * ((*z)(i, j) - mean);
      EXPECT_NEAR(mean, 0.0, 1e-10);
      EXPECT_NEAR(std::sqrt(ss / z->rows()), 1.0, 1e-10);
    }
  }
  const Matrix back = p.inverse_transform_y(p.transform_y(ds.y));
  for (std::size_t i = 0; i < back.size(); ++i)
    EXPECT_NEAR(back.data()[i], ds.y.data()[i], 1e-12 * ds.y.data()[i]);
  const Matrix bx = p.inverse_transform_x(p.transform_x(ds.x));
  for (std::size_t i = 0; i < bx.size(); ++i) EXPECT_NEAR(bx.data()[i], ds.x.data()[i], 1e-12);

  // Statistics ignore the held-out rows.
  Dataset perturbed = ds;
  for (std::size_t r : perturbed.indices(Split::test)) {
    perturbed.x(r, 0) = 0.123;
    perturbed.y(r, 3) *= 7.0;
  }
  EXPECT_EQ(Preprocessor::fit(perturbed), p);
}

TEST(Preprocessor, Errors) {
  Dataset ds = tiny_dataset();
  for (std::size_t i = 0; i < 5; ++i) ds.x(i, 7) = 1.0;
  try {
    Preprocessor::fit(ds);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("x7"), std::string::npos);
  }
  ds = tiny_dataset();
  ds.y(0, 0) = -1.0;
  EXPECT_THROW(Preprocessor::fit(ds, true), InvalidArgument);
  EXPECT_NO_THROW(Preprocessor::fit(ds, false));
}

TEST(DatasetIo, CsvAndPdmxRoundTripsAreExact) {
  SimulatorConfig cfg;
  cfg.d_out = 8;
  Dataset ds = generate_dataset(60, cfg, SplitFractions{});
  ds.x(0, 0) = 0.1 + 0.2;  // awkward decimal
  ds.y(1, 1) = 5e-324;
  for (const char* name : {"rt.csv", "rt.pdmx"}) {
    const fs::path path = scratch(name);
    save_dataset(ds, path);
    for (const auto& f : dataset_files(path)) EXPECT_TRUE(fs::exists(f)) << f;
    EXPECT_EQ(load_dataset(path), ds) << name;
  }
  EXPECT_EQ(dataset_files(scratch("a.pdmx")).size(), 3u);
  EXPECT_EQ(default_split_path("dir/data.csv"), fs::path("dir/data.split.csv"));
}

TEST(DatasetIo, MatrixFormats) {
  const Matrix m{{1.0, -2.5, 1e-300}, {0.1, 3.0e200, -0.0}};
  const fs::path bin = scratch("m.pdmx");
  write_pdmx(m, bin);
  EXPECT_EQ(fs::file_size(bin), 4u + 24u + 6u * 8u);
  const Matrix r = read_pdmx(bin);
  EXPECT_EQ(r, m);
  EXPECT_TRUE(std::signbit(r(1, 2)));

  const fs::path csv = scratch("m.csv");
  write_matrix_csv(m, csv, {"x0", "x1", "x2"});
  EXPECT_EQ(read_matrix_csv(csv, "x", 3), m);
  EXPECT_THROW(read_matrix_csv(csv, "x", 4), InvalidArgument);

  std::ofstream(scratch("header.csv")) << "x0,x1\n";
  EXPECT_EQ(read_matrix_csv(scratch("header.csv"), "x", 2).rows(), 0u);
  std::ofstream(scratch("bad.pdmx"), std::ios::binary) << "NOPE0000000000000000000000000000";
  EXPECT_THROW(read_pdmx(scratch("bad.pdmx")), UnsupportedFormat);
  EXPECT_THROW(read_pdmx(scratch("missing.pdmx")), IoError);
}

TEST(DatasetIo, FormatDouble) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(std::stod(format_double(0.1 + 0.2)), 0.1 + 0.2);
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
}

}  // namespace
}  // namespace emu
