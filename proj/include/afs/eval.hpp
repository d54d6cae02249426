#pragma once

#include <cstdint>
#include <vector>

#include "afs/attacks.hpp"
#include "afs/data.hpp"

namespace afs {

/// Percent of examples in `idx` classified correctly on clean inputs.
double clean_accuracy(const LogitsFn& model, const Dataset& ds,
                      const std::vector<std::int32_t>& idx, int batch_size = 256);

/// Percent classified correctly under a PGD cross-entropy attack on `model`.
/// Batch k of the walk draws from rng.fork(k); results are deterministic for
/// a fixed rng and batch size.
double robust_accuracy(const LogitsFn& model, const Dataset& ds,
                       const std::vector<std::int32_t>& idx, const AttackConfig& cfg,
                       const SeededRng& rng, int batch_size = 256);

}  // namespace afs
