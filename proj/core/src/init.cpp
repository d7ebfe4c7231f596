#include "emu/init.hpp"

#include <cmath>

#include "emu/errors.hpp"

namespace emu {

Matrix xavier_normal_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw InvalidArgument("xavier_normal_init: fan_in and fan_out must be >= 1");
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (auto& v : w.data()) v = stddev * rng.normal();
  return w;
}

}  // namespace emu
