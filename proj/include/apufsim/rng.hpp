#pragma once

#include <cstdint>
#include <random>

namespace apufsim {

using Rng = std::mt19937_64;

/// Independent generator for sub-stream `index` of a master seed.
///
/// Parallel code derives one sub-stream per fixed-size work chunk, so results
/// depend on the seed and the chunk layout only, never on the worker count.
Rng substream(std::uint64_t seed, std::uint64_t index);

/// Draws a fresh 64-bit seed from `rng` for use with substream().
inline std::uint64_t draw_seed(Rng &rng) { return rng(); }

}  // namespace apufsim
