#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afs/rng.hpp"
#include "afs/tensor.hpp"

namespace afs {

/// In-memory classification dataset. Inputs are flattened to [0,1]; the
/// three split index lists partition [0, size).
struct Dataset {
    std::int64_t dim = 0;
    int classes = 0;
    std::vector<double> inputs;  // size * dim, row-major
    std::vector<int> labels;

    std::vector<std::int32_t> train_idx;
    std::vector<std::int32_t> val_idx;
    std::vector<std::int32_t> test_idx;

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
};

enum class SyntheticKind { gaussians, rings };

SyntheticKind synthetic_kind_from(const std::string& name);

/// Deterministic synthetic two-class data in D=8, inputs clamped to [0,1].
///   gaussians: class c at 0.5 +/- margin per coordinate, sigma = 0.1.
///   rings:     two concentric 2-D annuli, fixed random rotation into 8-D,
///              centered at 0.5; margin scales the radii.
/// Labels are balanced to within one sample. All indices land in train_idx;
/// call assign_splits to partition.
Dataset gen_synthetic(SyntheticKind kind, std::int64_t n, std::uint64_t seed, double margin);

/// IDX ingestion (big-endian magic + dims, raw bytes scaled by /255).
/// limit > 0 keeps only the first `limit` examples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::int64_t limit = 0);

/// Seeded shuffle, then partition into train/val/test. The validation block
/// is taken from the tail of the training portion.
void assign_splits(Dataset& ds, double val_fraction, double test_fraction, std::uint64_t seed);

/// Gather rows `idx[first, first+count)` into a (count, dim) batch.
Tensor make_batch(const Dataset& ds, const std::vector<std::int32_t>& idx, std::size_t first,
                  std::size_t count, std::vector<int>& labels_out);

}  // namespace afs
