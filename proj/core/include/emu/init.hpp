#pragma once

#include <cstddef>

#include "emu/matrix.hpp"
#include "emu/rng.hpp"

namespace emu {

/// fan_in x fan_out matrix with i.i.d. N(0, 2 / (fan_in + fan_out)) entries
/// (Glorot/Xavier normal). Throws InvalidArgument on a zero dimension.
Matrix xavier_normal_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace emu
