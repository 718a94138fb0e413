#pragma once

#include <cstdint>
#include <utility>

#include "meltmap/dataset.hpp"
#include "meltmap/polyfit.hpp"

namespace meltmap {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Draws (power, velocity) uniformly over the given ranges and sets the equation's
// target field to eq(P, V) plus Gaussian noise; every other field stays zero.
// The equation may only use power and velocity (optionally log-transformed).
Dataset synth_generate(const SymbolicEquation& eq, std::size_t n, Range power, Range velocity,
                       double noise_sigma, std::uint64_t seed);

}  // namespace meltmap
