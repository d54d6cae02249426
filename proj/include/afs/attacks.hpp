#pragma once

#include <functional>
#include <vector>

#include "afs/nn.hpp"
#include "afs/rng.hpp"
#include "afs/tensor.hpp"

namespace afs {

struct BankManifest;
struct Merger;

/// Differentiable objective the attacker ascends: (inputs, labels) -> scalar.
using BatchLossFn = std::function<Tensor(const Tensor& x, const std::vector<int>& y)>;

/// Differentiable map from a batch of inputs to logits.
using LogitsFn = std::function<Tensor(const Tensor& x)>;

enum class LossTarget {
    head_loss,        // cross-entropy of a single extractor + head
    merger_loss,      // cross-entropy of the full stacked model
    logit_deviation,  // L-inf norm of (perturbed logits - clean logits)
};

struct AttackConfig {
    double epsilon = 0.0;    // L-inf budget in input units
    int steps = 0;           // PGD iterations
    double step_size = 0.0;  // eta
    bool random_init = false;
    LossTarget target = LossTarget::head_loss;

    void validate() const;

    /// PGD with the repo default step size eta = eps/4.
    static AttackConfig pgd(double epsilon, int steps, bool random_init = true);
    /// Single-step FGSM: eta = eps, no random start.
    static AttackConfig fgsm(double epsilon);
    /// Deterministic logit-deviation ascent: 20 steps, eta = delta/8, no random start.
    static AttackConfig deviation(double delta);
};

/// Pointwise nearest feasible point: clamp of x_hat into [x-eps, x+eps] n [0,1].
Tensor project(const Tensor& x_hat, const Tensor& x, double epsilon);

/// PGD under the L-inf ball: optional uniform random start, then
/// `steps` iterations of x <- project(x + eta * sign(grad loss)).
/// Row i of the batch draws its init noise from rng.fork(i), so per-sample
/// parallel execution would produce identical output. eps = 0 returns the
/// input bitwise.
Tensor pgd_attack(const BatchLossFn& loss, const Tensor& x, const std::vector<int>& y,
                  const AttackConfig& cfg, const SeededRng& rng);

LogitsFn single_logits(const ExtractorNet* net, const LinearHead* head);

BatchLossFn make_ce_loss(LogitsFn logits);

/// Deviation objective mean_i max_j |z_hat_ij - z_ij|; clean logits are
/// evaluated once at construction and treated as constants.
BatchLossFn make_deviation_loss(LogitsFn logits, const Tensor& x_clean);

/// Builds the attack objective for a target. head_loss needs net+head;
/// merger_loss needs bank+merger; logit_deviation additionally needs the
/// clean reference batch and accepts either a single model or a stack.
BatchLossFn attack_loss_for(LossTarget target, const ExtractorNet* net, const LinearHead* head,
                            const BankManifest* bank, const Merger* merger,
                            const Tensor* x_clean = nullptr);

}  // namespace afs
