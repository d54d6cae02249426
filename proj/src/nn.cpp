#include "afs/nn.hpp"

#include <cmath>
#include <string>

#include "afs/error.hpp"

namespace afs {

Tensor ExtractorNet::forward_features(const Tensor& x) const {
    if (x.shape().size() != 2 || x.shape()[1] != input_dim_)
        fail_data("forward_features: input shape " + shape_str(x.shape()) + " does not match (batch," +
                  std::to_string(input_dim_) + ")");
    Tensor h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add(matmul(h, weights_[l]), biases_[l]);
        if (l + 1 < weights_.size()) h = relu(h);
    }
    return h;
}

std::vector<Tensor> ExtractorNet::parameters() {
    std::vector<Tensor> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(weights_[l]);
        ps.push_back(biases_[l]);
    }
    return ps;
}

std::vector<Tensor> ExtractorNet::parameters() const {
    return const_cast<ExtractorNet*>(this)->parameters();
}

ExtractorNet init_extractor(std::uint64_t seed, std::int64_t input_dim, std::int64_t feature_dim,
                            std::int64_t hidden) {
    if (input_dim <= 0 || feature_dim <= 0 || hidden <= 0)
        fail_data("init_extractor: dims must be positive (input=" + std::to_string(input_dim) +
                  ", feature=" + std::to_string(feature_dim) + ", hidden=" + std::to_string(hidden) +
                  ")");
    ExtractorNet net;
    net.input_dim_ = input_dim;
    net.feature_dim_ = feature_dim;
    net.hidden_ = hidden;
    SeededRng rng(seed);
    const std::vector<std::int64_t> dims = {input_dim, hidden, hidden, feature_dim};
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        SeededRng layer_rng = rng.fork("layer" + std::to_string(l));
        const double stddev = std::sqrt(2.0 / static_cast<double>(dims[l]));
        net.weights_.push_back(
            Tensor::randn({dims[l], dims[l + 1]}, layer_rng, stddev, /*requires_grad=*/true));
        net.biases_.push_back(Tensor::zeros({dims[l + 1]}, /*requires_grad=*/true));
    }
    return net;
}

ExtractorNet make_extractor(std::int64_t input_dim, std::int64_t feature_dim,
                            std::vector<Tensor> weights, std::vector<Tensor> biases) {
    if (weights.size() != biases.size() || weights.empty())
        fail_data("make_extractor: inconsistent layer lists");
    ExtractorNet net;
    net.input_dim_ = input_dim;
    net.feature_dim_ = feature_dim;
    net.hidden_ = weights[0].shape()[1];
    net.weights_ = std::move(weights);
    net.biases_ = std::move(biases);
    return net;
}

LinearHead init_head(SeededRng& rng, std::int64_t feature_dim, std::int64_t classes) {
    if (feature_dim <= 0 || classes <= 0)
        fail_data("init_head: dims must be positive");
    const double stddev = std::sqrt(2.0 / static_cast<double>(feature_dim));
    LinearHead head;
    head.weight = Tensor::randn({feature_dim, classes}, rng, stddev, /*requires_grad=*/true);
    head.bias = Tensor::zeros({classes}, /*requires_grad=*/true);
    return head;
}

Tensor forward_logits(const ExtractorNet& net, const LinearHead& head, const Tensor& x) {
    if (net.feature_dim() != head.feature_dim())
        fail_data("forward_logits: feature dim mismatch: net " + std::to_string(net.feature_dim()) +
                  " vs head " + std::to_string(head.feature_dim()));
    return add(matmul(net.forward_features(x), head.weight), head.bias);
}

std::vector<Tensor> ExtractorCheckpoint::parameters() {
    auto ps = net.parameters();
    ps.push_back(head.weight);
    ps.push_back(head.bias);
    return ps;
}

void ExtractorCheckpoint::freeze() {
    for (auto& p : parameters()) p.set_requires_grad(false);
}

}  // namespace afs
