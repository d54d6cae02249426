#pragma once

#include <string>
#include <utility>
#include <vector>

#include "afs/nn.hpp"
#include "afs/stacking.hpp"

namespace afs {

/// On-disk model container ("AFSC"): magic, u32-LE format version, a
/// length-prefixed UTF-8 key=value manifest, then named parameter blobs
/// (u32-LE name length + name, u32-LE rank + extents, IEEE-754 32-bit LE
/// values). Round trips are bit-exact at 32-bit precision.
struct CheckpointFile {
    static constexpr std::uint32_t kVersion = 1;

    std::vector<std::pair<std::string, std::string>> manifest;
    struct Blob {
        std::string name;
        std::vector<std::int64_t> shape;
        std::vector<float> values;
    };
    std::vector<Blob> blobs;

    std::string manifest_value(const std::string& key) const;
    bool has_key(const std::string& key) const;

    std::string serialize() const;
    static CheckpointFile deserialize(const std::string& bytes, const std::string& origin);
};

void save_checkpoint(const CheckpointFile& file, const std::string& path);
CheckpointFile load_checkpoint(const std::string& path);

// Typed wrappers.
void save_extractor(const ExtractorCheckpoint& ckpt, const std::string& path);
ExtractorCheckpoint load_extractor(const std::string& path);

void save_merger(const Merger& merger, const std::string& mask, const std::string& path);
/// Returns the merger plus the bank mask it was trained over.
std::pair<Merger, std::string> load_merger(const std::string& path);

/// Plain-text bank manifest: one entry line per extractor (path, budget,
/// metrics) plus the inclusion mask. Checkpoint paths are relative to dir.
void save_bank(BankManifest& bank, const std::string& dir,
               const std::string& manifest_name = "bank.manifest");
BankManifest load_bank(const std::string& dir, const std::string& manifest_name = "bank.manifest");

/// Rewrites only the manifest (e.g. after a mask update); checkpoints stay.
void write_bank_manifest(const BankManifest& bank, const std::string& dir,
                         const std::string& manifest_name = "bank.manifest");

}  // namespace afs
