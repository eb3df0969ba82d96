#include "apufsim/rng.hpp"

#include <array>

namespace apufsim {

Rng substream(std::uint64_t seed, std::uint64_t index)
{
    std::array<std::uint32_t, 5> words{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
        0x41505546u};  // "APUF"
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace apufsim
