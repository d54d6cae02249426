#include "afs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "afs/error.hpp"

namespace afs {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::shared_ptr<detail::TensorNode> make_node(std::vector<std::int64_t> shape,
                                              std::vector<double> data, bool requires_grad) {
    if (shape.empty()) fail_data("tensor: shape must have at least one extent");
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e <= 0) fail_data("tensor: non-positive extent in shape " + shape_str(shape));
        n *= e;
    }
    if (static_cast<std::int64_t>(data.size()) != n)
        fail_data("tensor: data length " + std::to_string(data.size()) +
                  " does not match shape " + shape_str(shape));
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return node;
}

std::vector<double>& adjoint_of(std::vector<std::vector<double>>& adj, std::int64_t id,
                                std::int64_t numel) {
    auto& v = adj[static_cast<std::size_t>(id)];
    if (v.empty()) v.assign(static_cast<std::size_t>(numel), 0.0);
    return v;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void require_rank2(const Tensor& t, const char* op) {
    if (t.shape().size() != 2)
        fail_data(std::string(op) + ": expected a rank-2 tensor, got shape " + shape_str(t.shape()));
}

}  // namespace

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

// --------------------------------------------------------------------------
// Tensor
// --------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    std::int64_t n = 1;
    for (auto e : shape) n *= std::max<std::int64_t>(e, 0);
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                            requires_grad));
}

Tensor Tensor::from(std::vector<std::int64_t> shape, std::vector<double> values,
                    bool requires_grad) {
    return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(make_node({1}, {v}, requires_grad));
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double v, bool requires_grad) {
    std::int64_t n = 1;
    for (auto e : shape) n *= std::max<std::int64_t>(e, 0);
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v),
                            requires_grad));
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, SeededRng& rng, double stddev,
                     bool requires_grad) {
    std::int64_t n = 1;
    for (auto e : shape) n *= std::max<std::int64_t>(e, 0);
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = rng.next_normal() * stddev;
    return Tensor(make_node(std::move(shape), std::move(vals), requires_grad));
}

Tensor Tensor::uniform(std::vector<std::int64_t> shape, SeededRng& rng, double lo, double hi,
                       bool requires_grad) {
    std::int64_t n = 1;
    for (auto e : shape) n *= std::max<std::int64_t>(e, 0);
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = rng.next_uniform(lo, hi);
    return Tensor(make_node(std::move(shape), std::move(vals), requires_grad));
}

double Tensor::item() const {
    if (numel() != 1) fail_data("item: tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    auto n = make_node(node_->shape, node_->data, node_->requires_grad);
    return Tensor(std::move(n));
}

// --------------------------------------------------------------------------
// Tape
// --------------------------------------------------------------------------

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() {
    for (auto& n : nodes_) {
        if (n->tape == this) {
            n->tape = nullptr;
            n->tape_id = -1;
        }
    }
    g_active_tape = prev_;
}

Tape* Tape::active() { return g_active_tape; }

std::int64_t Tape::track(const std::shared_ptr<detail::TensorNode>& n) {
    if (n->tape == this) return n->tape_id;
    n->tape = this;
    n->tape_id = static_cast<std::int64_t>(nodes_.size());
    nodes_.push_back(n);
    return n->tape_id;
}

void Tape::record(Record r) { records_.push_back(std::move(r)); }

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        fail_data("backward: loss must be scalar-shaped, got " +
                  (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    detail::TensorNode* ln = loss.node();
    if (ln->tape != this) {
        // Leaf loss: d(loss)/d(loss) = 1, nothing else reachable.
        if (ln->requires_grad) {
            if (ln->grad.empty()) ln->grad.assign(1, 0.0);
            ln->grad[0] += 1.0;
        }
        return;
    }
    std::vector<std::vector<double>> adj(nodes_.size());
    adj[static_cast<std::size_t>(ln->tape_id)].assign(1, 1.0);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->backprop(adj);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        auto& n = nodes_[i];
        if (!n->requires_grad || adj[i].empty()) continue;
        if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
        const auto& a = adj[i];
        for (std::size_t j = 0; j < a.size(); ++j) n->grad[j] += a[j];
    }
}

// Internal handle used by op implementations to reach Tape private members.
struct TapeAccess {
    static bool recording(const Tensor& out) {
        return g_active_tape != nullptr && out.requires_grad();
    }
    static std::int64_t track(Tape* t, const Tensor& x) { return t->track(x.handle()); }
    static void record(Tape* t, Tape::Record r) { t->record(std::move(r)); }
};

namespace {

bool should_record(std::initializer_list<const Tensor*> diff_inputs) {
    if (!g_active_tape) return false;
    for (const Tensor* t : diff_inputs)
        if (t->requires_grad()) return true;
    return false;
}

struct Rec {
    Tape* tape = g_active_tape;
    Tape::Record r;
    std::vector<std::int64_t> ids;

    std::int64_t id(const Tensor& t) {
        r.keep_alive.push_back(t.handle());
        return TapeAccess::track(tape, t);
    }
    void commit(std::function<void(std::vector<std::vector<double>>&)> fn) {
        r.backprop = std::move(fn);
        TapeAccess::record(tape, std::move(r));
    }
};

}  // namespace

// --------------------------------------------------------------------------
// Primitives
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::int64_t m = a.shape()[0], k = a.shape()[1];
    const std::int64_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        fail_data("matmul: inner dimensions mismatch: " + shape_str(a.shape()) + " vs " +
                  shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    {
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        double* pc = out.data().data();
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double aik = pa[i * k + kk];
                if (aik == 0.0) continue;
                const double* pbr = pb + kk * n;
                double* pcr = pc + i * n;
                for (std::int64_t j = 0; j < n; ++j) pcr[j] += aik * pbr[j];
            }
        }
    }
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), ib = rec.id(b), io = rec.id(out);
        auto an = a.handle(), bn = b.handle();
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, m * k);
            auto& gb = adjoint_of(adj, ib, k * n);
            const double* pa = an->data.data();
            const double* pb = bn->data.data();
            // dA = dC * B^T
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    double s = 0.0;
                    const double* pgo = go.data() + i * n;
                    const double* pbr = pb + kk * n;
                    for (std::int64_t j = 0; j < n; ++j) s += pgo[j] * pbr[j];
                    ga[i * k + kk] += s;
                }
            // dB = A^T * dC
            for (std::int64_t kk = 0; kk < k; ++kk)
                for (std::int64_t i = 0; i < m; ++i) {
                    const double aik = pa[i * k + kk];
                    if (aik == 0.0) continue;
                    const double* pgo = go.data() + i * n;
                    double* pgb = gb.data() + kk * n;
                    for (std::int64_t j = 0; j < n; ++j) pgb[j] += aik * pgo[j];
                }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool elementwise = same_shape(a, b);
    bool broadcast = false;
    if (!elementwise) {
        broadcast = a.shape().size() == 2 &&
                    ((b.shape().size() == 1 && b.shape()[0] == a.shape()[1]) ||
                     (b.shape().size() == 2 && b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]));
        if (!broadcast)
            fail_data("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                      " do not match (only a row vector may broadcast over matrix rows)");
    }
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    const std::int64_t width = elementwise ? total : a.shape()[1];
    {
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        double* po = out.data().data();
        if (elementwise) {
            for (std::int64_t i = 0; i < total; ++i) po[i] = pa[i] + pb[i];
        } else {
            for (std::int64_t i = 0; i < total; ++i) po[i] = pa[i] + pb[i % width];
        }
    }
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), ib = rec.id(b), io = rec.id(out);
        const std::int64_t bn = b.numel();
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            auto& gb = adjoint_of(adj, ib, bn);
            for (std::int64_t i = 0; i < total; ++i) ga[i] += go[i];
            if (elementwise) {
                for (std::int64_t i = 0; i < total; ++i) gb[i] += go[i];
            } else {
                for (std::int64_t i = 0; i < total; ++i) gb[i % width] += go[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b))
        fail_data("sub: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                  " do not match");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (should_record({&a, &b})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), ib = rec.id(b), io = rec.id(out);
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            auto& gb = adjoint_of(adj, ib, total);
            for (std::int64_t i = 0; i < total; ++i) {
                ga[i] += go[i];
                gb[i] -= go[i];
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i) out.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        auto an = a.handle();
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            for (std::int64_t i = 0; i < total; ++i)
                if (an->data[static_cast<std::size_t>(i)] > 0.0) ga[i] += go[i];
        });
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    require_rank2(logits, "softmax_cross_entropy");
    const std::int64_t m = logits.shape()[0], c = logits.shape()[1];
    if (static_cast<std::int64_t>(labels.size()) != m)
        fail_data("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                  shape_str(logits.shape()));
    std::vector<double> probs(static_cast<std::size_t>(m * c));
    double loss = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= c)
            fail_data("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0," +
                      std::to_string(c) + ")");
        const double* row = logits.data().data() + i * c;
        double mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        const double lse = mx + std::log(denom);
        for (std::int64_t j = 0; j < c; ++j)
            probs[static_cast<std::size_t>(i * c + j)] = std::exp(row[j] - lse);
        loss += lse - row[y];
    }
    loss /= static_cast<double>(m);
    Tensor out = Tensor::scalar(loss);
    if (should_record({&logits})) {
        out.set_requires_grad(true);
        Rec rec;
        auto il = rec.id(logits), io = rec.id(out);
        auto ys = labels;
        rec.commit([=, probs = std::move(probs)](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& gl = adjoint_of(adj, il, m * c);
            const double scale = go[0] / static_cast<double>(m);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < c; ++j) {
                    double g = probs[static_cast<std::size_t>(i * c + j)];
                    if (j == ys[static_cast<std::size_t>(i)]) g -= 1.0;
                    gl[i * c + j] += scale * g;
                }
        });
    }
    return out;
}

Tensor sign(const Tensor& a) {
    // Derivative is zero a.e., so nothing is recorded.
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i) {
        const double v = a.data()[i];
        out.data()[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) fail_data("clamp: lo > hi");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i)
        out.data()[i] = std::min(std::max(a.data()[i], lo), hi);
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        auto an = a.handle();
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            for (std::int64_t i = 0; i < total; ++i) {
                const double v = an->data[static_cast<std::size_t>(i)];
                if (v > lo && v < hi) ga[i] += go[i];
            }
        });
    }
    return out;
}

Tensor clamp_box(const Tensor& a, const Tensor& lo, const Tensor& hi) {
    if (!same_shape(a, lo) || !same_shape(a, hi))
        fail_data("clamp_box: shapes " + shape_str(a.shape()) + ", " + shape_str(lo.shape()) +
                  ", " + shape_str(hi.shape()) + " do not match");
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i)
        out.data()[i] = std::min(std::max(a.data()[i], lo.data()[i]), hi.data()[i]);
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        auto an = a.handle(), ln = lo.handle(), hn = hi.handle();
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            for (std::int64_t i = 0; i < total; ++i) {
                const std::size_t j = static_cast<std::size_t>(i);
                if (an->data[j] > ln->data[j] && an->data[j] < hn->data[j]) ga[i] += go[i];
            }
        });
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) fail_data("concat_cols: no tensors given");
    require_rank2(parts[0], "concat_cols");
    const std::int64_t m = parts[0].shape()[0];
    std::int64_t width = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.shape()[0] != m)
            fail_data("concat_cols: row count mismatch: " + shape_str(parts[0].shape()) + " vs " +
                      shape_str(p.shape()));
        width += p.shape()[1];
    }
    Tensor out = Tensor::zeros({m, width});
    std::int64_t off = 0;
    for (const auto& p : parts) {
        const std::int64_t w = p.shape()[1];
        for (std::int64_t i = 0; i < m; ++i)
            std::copy_n(p.data().data() + i * w, w, out.data().data() + i * width + off);
        off += w;
    }
    bool any_grad = false;
    for (const auto& p : parts) any_grad |= p.requires_grad();
    if (g_active_tape && any_grad) {
        out.set_requires_grad(true);
        Rec rec;
        struct Piece {
            std::int64_t id, w, off;
        };
        std::vector<Piece> pieces;
        std::int64_t o = 0;
        for (const auto& p : parts) {
            pieces.push_back({rec.id(p), p.shape()[1], o});
            o += p.shape()[1];
        }
        auto io = rec.id(out);
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            for (const auto& pc : pieces) {
                auto& gp = adjoint_of(adj, pc.id, m * pc.w);
                for (std::int64_t i = 0; i < m; ++i)
                    for (std::int64_t j = 0; j < pc.w; ++j)
                        gp[i * pc.w + j] += go[i * width + pc.off + j];
            }
        });
    }
    return out;
}

Tensor scalar_mul(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t total = a.numel();
    for (std::int64_t i = 0; i < total; ++i) out.data()[i] = a.data()[i] * s;
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            for (std::int64_t i = 0; i < total; ++i) ga[i] += s * go[i];
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a) {
    const std::int64_t total = a.numel();
    double s = 0.0;
    for (std::int64_t i = 0; i < total; ++i) s += a.data()[i];
    Tensor out = Tensor::scalar(s / static_cast<double>(total));
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        rec.commit([=](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, total);
            const double g = go[0] / static_cast<double>(total);
            for (std::int64_t i = 0; i < total; ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor row_abs_max(const Tensor& a) {
    require_rank2(a, "row_abs_max");
    const std::int64_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::zeros({m, 1});
    std::vector<std::int64_t> arg(static_cast<std::size_t>(m), 0);
    for (std::int64_t i = 0; i < m; ++i) {
        double best = -1.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double v = std::fabs(a.data()[i * n + j]);
            if (v > best) {
                best = v;
                arg[static_cast<std::size_t>(i)] = j;
            }
        }
        out.data()[i] = best;
    }
    if (should_record({&a})) {
        out.set_requires_grad(true);
        Rec rec;
        auto ia = rec.id(a), io = rec.id(out);
        auto an = a.handle();
        rec.commit([=, arg = std::move(arg)](std::vector<std::vector<double>>& adj) {
            const auto& go = adj[static_cast<std::size_t>(io)];
            if (go.empty()) return;
            auto& ga = adjoint_of(adj, ia, m * n);
            for (std::int64_t i = 0; i < m; ++i) {
                const std::int64_t j = arg[static_cast<std::size_t>(i)];
                const double v = an->data[static_cast<std::size_t>(i * n + j)];
                const double s = v < 0.0 ? -1.0 : 1.0;  // subgradient +1 at 0
                ga[i * n + j] += s * go[i];
            }
        });
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    require_rank2(logits, "argmax_rows");
    const std::int64_t m = logits.shape()[0], c = logits.shape()[1];
    std::vector<int> out(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        int best = 0;
        for (std::int64_t j = 1; j < c; ++j)
            if (logits.data()[i * c + j] > logits.data()[i * c + best]) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

// --------------------------------------------------------------------------
// Optimizer and parameter helpers
// --------------------------------------------------------------------------

void SgdMomentum::step(std::span<Tensor> params, double lr, double momentum) {
    for (auto& p : params) {
        auto* node = p.node();
        if (node->grad.empty())
            fail_data("sgd_momentum_step: parameter of shape " + shape_str(node->shape) +
                      " has no gradient");
        auto& v = velocity_[node];
        if (v.size() != node->data.size()) v.assign(node->data.size(), 0.0);
        for (std::size_t i = 0; i < node->data.size(); ++i) {
            v[i] = momentum * v[i] + node->grad[i];
            node->data[i] -= lr * v[i];
        }
    }
}

void zero_grads(std::span<Tensor> params) {
    for (auto& p : params) p.zero_grad();
}

ParamFreezeGuard::ParamFreezeGuard(std::span<Tensor> params) {
    saved_.reserve(params.size());
    for (auto& p : params) {
        saved_.emplace_back(p.node(), p.requires_grad());
        p.set_requires_grad(false);
    }
}

ParamFreezeGuard::~ParamFreezeGuard() {
    for (auto& [node, was] : saved_) node->requires_grad = was;
}

}  // namespace afs
