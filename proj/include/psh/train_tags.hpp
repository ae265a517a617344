#pragma once

#include <cstdint>

namespace psh {

// Seed-stream tags shared by local and framework training. Both modes derive
// their initialization and batch-order generators as Rng::derive(seed, tag),
// which is what makes their runs comparable point for point.
constexpr std::uint64_t kTagLogisticInit = 0x106157u;
constexpr std::uint64_t kTagHeadInit = 0x4ead11u;
constexpr std::uint64_t kTagTailInit = 0x7a1111u;
constexpr std::uint64_t kTagBatches = 0xba7c4eu;

}  // namespace psh
