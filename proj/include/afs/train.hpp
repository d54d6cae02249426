#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <vector>

#include "afs/data.hpp"
#include "afs/nn.hpp"
#include "afs/stacking.hpp"

namespace afs {

enum class BudgetMode { fixed, uniform_random };

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double lr = 0.1;
    double momentum = 0.9;
    /// epoch -> multiplicative lr factor, applied from that epoch on.
    /// Unset means the default schedule: one x0.1 decay at 75% of epochs.
    std::optional<std::map<int, double>> lr_decay;

    double budget = 0.0;
    BudgetMode budget_mode = BudgetMode::fixed;
    double budget_lo = 0.0;  // uniform_random range
    double budget_hi = 0.0;
    int attack_steps = 10;  // k_train

    double eval_budget = 0.0;  // early-stopping / reporting attack budget
    int eval_steps = 10;

    std::uint64_t seed = 0;
    std::int64_t hidden = 256;
    std::int64_t feature_dim = 64;

    std::ostream* progress = nullptr;            // "epoch\tclean\trobust" lines
    std::vector<double>* sampled_budget_log = nullptr;  // test hook

    void validate() const;
    std::map<int, double> effective_lr_decay() const;
};

struct BankSpec {
    std::vector<double> budgets;  // strictly increasing
    TrainConfig base;
    std::vector<std::uint64_t> seeds;  // empty = derived from base.seed
    int jobs = 1;

    void validate() const;
    std::uint64_t seed_for(std::size_t i) const;
};

/// Index of the best robust-accuracy epoch; ties go to the earliest.
std::size_t best_epoch(const std::vector<double>& robust_history);

/// PGD adversarial training of one extractor + head, with early stopping on
/// robust validation accuracy (PGD at eval_budget). If the dataset has no
/// validation split, the seeded tail 10% of the training indices is held out.
ExtractorCheckpoint train_extractor(const TrainConfig& cfg, const Dataset& data);

/// Trains one extractor per budget, independently seeded, and records clean /
/// PGD-10 / PGD-20 test accuracy per entry. No partial manifest is produced
/// on failure.
BankManifest train_bank(const BankSpec& spec, const Dataset& data);

}  // namespace afs
