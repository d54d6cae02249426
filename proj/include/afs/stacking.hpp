#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "afs/attacks.hpp"
#include "afs/data.hpp"
#include "afs/nn.hpp"
#include "afs/tensor.hpp"

namespace afs {

/// One bank member: a checkpoint plus its bookkeeping.
struct BankEntry {
    std::shared_ptr<ExtractorCheckpoint> ckpt;
    double budget = 0.0;
    EvalMetrics metrics;
    std::string path;  // checkpoint file, when persisted
};

/// Ordered extractor bank with a binary inclusion mask. Feature blocks are
/// concatenated in entry order restricted to the mask.
struct BankManifest {
    std::vector<BankEntry> entries;
    std::vector<std::uint8_t> mask;  // 1 = stacked

    void validate() const;
    std::vector<std::size_t> selected() const;
    /// Sum of feature dims over selected entries.
    std::int64_t stacked_width() const;
    int classes() const;
    std::string mask_string() const;
    void set_mask_string(const std::string& bits);
};

/// Learnable linear merger over the concatenated features.
struct Merger {
    Tensor weight;  // (n_selected * F, C)
    Tensor bias;    // (C)
    double alpha = -1.0;  // ratio the merger was trained with, -1 if untrained

    std::vector<Tensor> parameters() { return {weight, bias}; }
};

struct MergerTrainConfig {
    double alpha = 0.5;  // clean/adversarial mixing ratio in [0,1]
    double budget = 0.0;
    int attack_steps = 10;
    int epochs = 5;
    int batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::ostream* progress = nullptr;

    void validate() const;
};

struct MergerTrainStats {
    std::size_t attacks_invoked = 0;
    double final_loss = 0.0;
};

/// Concatenated frozen features of the selected extractors: (batch, n*F).
/// Differentiable w.r.t. x; extractor parameters stay out of any optimizer.
Tensor concat_features(const BankManifest& bank, const Tensor& x);

/// logits = features * weight + bias.
Tensor merger_forward(const Merger& merger, const Tensor& features);

/// Zero-initialized merger sized for the bank's current mask.
Merger init_merger(const BankManifest& bank);

/// Trains only the merger on alpha * CE(clean) + (1-alpha) * CE(adversarial),
/// where adversarial examples are PGD against the whole stacked model. The
/// clean and adversarial terms share each minibatch. alpha = 1 never invokes
/// an attack. Extractor parameters are bitwise unchanged.
Merger train_merger(const BankManifest& bank, const MergerTrainConfig& cfg, const Dataset& data,
                    MergerTrainStats* stats = nullptr);

/// Weighted logit averaging over single networks: sum_i lambda_i * z_i(x).
/// Weights must be non-negative and sum to 1 within 1e-12.
Tensor logit_average(const std::vector<const ExtractorCheckpoint*>& models,
                     const std::vector<double>& lambdas, const Tensor& x);

/// Differentiable logit map of the full stack (used as attack target).
/// Pointers must outlive the returned function.
LogitsFn stacked_logits(const BankManifest* bank, const Merger* merger);

}  // namespace afs
