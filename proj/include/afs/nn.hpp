#pragma once

#include <cstdint>
#include <vector>

#include "afs/rng.hpp"
#include "afs/tensor.hpp"

namespace afs {

/// Linear classification head: logits = features * weight + bias.
struct LinearHead {
    Tensor weight;  // (F, C)
    Tensor bias;    // (C)

    std::int64_t feature_dim() const { return weight.shape()[0]; }
    std::int64_t classes() const { return weight.shape()[1]; }
};

/// Feature extractor: a ReLU MLP ending in a linear projection to the
/// feature vector. The feature is the penultimate activation, i.e. the
/// input to the linear head.
class ExtractorNet {
public:
    ExtractorNet() = default;

    std::int64_t input_dim() const { return input_dim_; }
    std::int64_t feature_dim() const { return feature_dim_; }
    std::int64_t hidden_dim() const { return hidden_; }

    /// (batch, D) -> (batch, F), differentiable w.r.t. inputs and weights.
    Tensor forward_features(const Tensor& x) const;

    /// Every trainable tensor exactly once, in a fixed order.
    std::vector<Tensor> parameters();
    std::vector<Tensor> parameters() const;

    friend ExtractorNet init_extractor(std::uint64_t seed, std::int64_t input_dim,
                                       std::int64_t feature_dim, std::int64_t hidden);
    friend ExtractorNet make_extractor(std::int64_t input_dim, std::int64_t feature_dim,
                                       std::vector<Tensor> weights, std::vector<Tensor> biases);

private:
    std::int64_t input_dim_ = 0;
    std::int64_t feature_dim_ = 0;
    std::int64_t hidden_ = 0;
    std::vector<Tensor> weights_;  // per affine layer
    std::vector<Tensor> biases_;
};

/// Fan-in scaled normal initialization (stddev sqrt(2/fan_in)), zero biases.
/// Identical seeds produce bitwise identical parameters.
ExtractorNet init_extractor(std::uint64_t seed, std::int64_t input_dim, std::int64_t feature_dim,
                            std::int64_t hidden);

/// Rebuilds an extractor from explicit layer tensors (checkpoint loading).
ExtractorNet make_extractor(std::int64_t input_dim, std::int64_t feature_dim,
                            std::vector<Tensor> weights, std::vector<Tensor> biases);

LinearHead init_head(SeededRng& rng, std::int64_t feature_dim, std::int64_t classes);

/// logits = head(features(x)): (batch, D) -> (batch, C).
Tensor forward_logits(const ExtractorNet& net, const LinearHead& head, const Tensor& x);

/// Accuracy triple attached to a trained model (percent, 0..100).
struct EvalMetrics {
    double clean = 0.0;
    double pgd10 = 0.0;
    double pgd20 = 0.0;
};

/// A trained feature extractor with its linear head, the budget it was
/// trained at, its seed, and its recorded metrics.
struct ExtractorCheckpoint {
    ExtractorNet net;
    LinearHead head;
    double budget = 0.0;
    std::uint64_t seed = 0;
    EvalMetrics metrics;

    std::vector<Tensor> parameters();
    /// Marks all parameters frozen (requires_grad = false).
    void freeze();
};

}  // namespace afs
