#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "emu/ensemble.hpp"

namespace emu {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Single-file ensemble checkpoint ("PDLK").
///
///   bytes 0..3   magic "PDLK"
///   u32 LE       format version (1)
///   u64 LE       manifest length in bytes
///   manifest     UTF-8 JSON: architecture, preprocessor statistics, training
///                configuration, member seeds, RNG algorithm, training log
///   blobs        per member, per tensor in NetParams::tensors() order:
///                u64 LE rows, u64 LE cols, rows*cols f64 LE (row-major)
///
/// The encoding is a pure function of the ensemble, so loading and saving
/// again reproduces the file byte for byte.
std::string encode_checkpoint(const Ensemble& ens);

/// Throws UnsupportedFormat on a bad magic or version and CorruptCheckpoint on
/// truncation, trailing bytes, a malformed manifest or a shape mismatch.
Ensemble decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Ensemble& ens, const std::filesystem::path& path);
Ensemble load_checkpoint(const std::filesystem::path& path);

}  // namespace emu
