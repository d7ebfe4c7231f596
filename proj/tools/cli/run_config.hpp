#pragma once

#include <cstddef>
#include <filesystem>

#include <json.hpp>

#include "emu/dataset.hpp"
#include "emu/ensemble.hpp"
#include "emu/report.hpp"
#include "emu/simulator.hpp"

namespace emu::cli {

// Everything a run needs, read from one JSON document:
//
//   { "simulator": {...}, "dataset": {...}, "model": {...},
//     "loss": {...}, "train": {...}, "evaluate": {...} }
//
// Every section and every key is optional; unknown keys are errors.
// docs/config.schema.json lists the keys.
struct RunConfig {
  SimulatorConfig simulator;
  std::size_t n_samples = 6000;
  SplitFractions fractions;
  TrainConfig train;
  EvalOptions evaluate;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

RunConfig default_run_config();
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace emu::cli
