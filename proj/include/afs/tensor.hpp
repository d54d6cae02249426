#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "afs/rng.hpp"

namespace afs {

class Tape;

namespace detail {

struct TensorNode {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first backward touches it
    bool requires_grad = false;

    // Position on the recording tape, -1 when untracked.
    Tape* tape = nullptr;
    std::int64_t tape_id = -1;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }
};

}  // namespace detail

/// Dense row-major tensor of doubles. Copying a Tensor shares storage;
/// clone() makes a deep copy. The grad buffer is allocated lazily by
/// backward() and accumulates across calls until zero_grad().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
    static Tensor from(std::vector<std::int64_t> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor full(std::vector<std::int64_t> shape, double v, bool requires_grad = false);
    /// Normal(0, stddev) entries drawn row-major from `rng`.
    static Tensor randn(std::vector<std::int64_t> shape, SeededRng& rng, double stddev = 1.0,
                        bool requires_grad = false);
    static Tensor uniform(std::vector<std::int64_t> shape, SeededRng& rng, double lo, double hi,
                          bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::int64_t>& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    std::int64_t rows() const { return node_->shape.at(0); }
    std::int64_t cols() const { return node_->shape.at(1); }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    /// Gradient buffer; empty span until populated by backward().
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();

    Tensor clone() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& handle() const { return node_; }

private:
    friend class Tape;
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

std::string shape_str(const std::vector<std::int64_t>& shape);

/// Records primitive ops for reverse-mode differentiation. Constructing a
/// Tape makes it the active tape for the current thread; destruction
/// restores the previous one. Tapes must not be shared across threads.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    /// Reverse pass from a scalar loss: every tracked tensor that requires
    /// grad gets dLoss/dTensor accumulated into its grad slot. Calling twice
    /// without zero_grad doubles the accumulated gradients.
    void backward(const Tensor& loss);

    std::size_t op_count() const { return records_.size(); }

    struct Record {
        // Backprop step: reads adjoint of the output, adds into adjoints of inputs.
        std::function<void(std::vector<std::vector<double>>& adjoints)> backprop;
        std::vector<std::shared_ptr<detail::TensorNode>> keep_alive;
    };

private:
    friend struct TapeAccess;

    std::int64_t track(const std::shared_ptr<detail::TensorNode>& n);
    void record(Record r);

    std::vector<Record> records_;
    std::vector<std::shared_ptr<detail::TensorNode>> nodes_;
    Tape* prev_ = nullptr;
};

// ---------------------------------------------------------------------------
// Primitive operations. All record on the active tape when any differentiable
// operand requires grad; with no active tape they are plain eager evaluation.
// Shape violations raise Error(data) naming the op and both shapes.
// ---------------------------------------------------------------------------

/// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);

/// Same-shape elementwise add, or row-broadcast of a width-n vector
/// (shape {n} or {1,n}) over an (m,n) matrix. No other broadcast exists.
Tensor add(const Tensor& a, const Tensor& b);

/// Same-shape elementwise subtraction.
Tensor sub(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);

/// Mean softmax cross-entropy over the batch; logits (m,C), labels in [0,C).
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Elementwise sign with sign(0) = 0. Derivative is zero everywhere.
Tensor sign(const Tensor& a);

/// Elementwise clamp to scalar bounds [lo, hi].
Tensor clamp(const Tensor& a, double lo, double hi);

/// Elementwise clamp to per-element bounds; bounds are treated as constants.
Tensor clamp_box(const Tensor& a, const Tensor& lo, const Tensor& hi);

/// Concatenate (m,F_i) blocks along the feature axis -> (m, sum F_i).
Tensor concat_cols(std::span<const Tensor> parts);

Tensor scalar_mul(const Tensor& a, double s);

/// Mean over all entries -> scalar shape {1}.
Tensor mean_all(const Tensor& a);

/// Per-row L-inf norm: (m,n) -> (m,1) of max_j |a_ij|. The subgradient at an
/// all-zero row is +1 on its first column, so ascent can leave the origin.
Tensor row_abs_max(const Tensor& a);

// Non-differentiating helpers.
std::vector<int> argmax_rows(const Tensor& logits);

/// SGD with momentum: v <- m*v + g, p <- p - lr*v. Velocity persists per
/// parameter across steps. A parameter with no populated grad is an error.
class SgdMomentum {
public:
    void step(std::span<Tensor> params, double lr, double momentum);

private:
    std::unordered_map<detail::TensorNode*, std::vector<double>> velocity_;
};

void zero_grads(std::span<Tensor> params);

/// Temporarily clears requires_grad on a parameter set (e.g. while crafting
/// attacks, where only input gradients are needed). Restores on destruction.
class ParamFreezeGuard {
public:
    explicit ParamFreezeGuard(std::span<Tensor> params);
    ~ParamFreezeGuard();
    ParamFreezeGuard(const ParamFreezeGuard&) = delete;
    ParamFreezeGuard& operator=(const ParamFreezeGuard&) = delete;

private:
    std::vector<std::pair<detail::TensorNode*, bool>> saved_;
};

}  // namespace afs
