#include "afs/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "afs/error.hpp"
#include "afs/stacking.hpp"

namespace afs {

void AttackConfig::validate() const {
    if (epsilon < 0.0) fail_data("attack: epsilon must be >= 0, got " + std::to_string(epsilon));
    if (steps < 0) fail_data("attack: steps must be >= 0, got " + std::to_string(steps));
    if (steps > 0 && step_size <= 0.0)
        fail_data("attack: step_size must be > 0 when steps > 0, got " + std::to_string(step_size));
}

AttackConfig AttackConfig::pgd(double epsilon, int steps, bool random_init) {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.steps = steps;
    cfg.step_size = epsilon > 0.0 ? epsilon / 4.0 : 1.0;
    cfg.random_init = random_init;
    return cfg;
}

AttackConfig AttackConfig::fgsm(double epsilon) {
    AttackConfig cfg;
    cfg.epsilon = epsilon;
    cfg.steps = 1;
    cfg.step_size = epsilon > 0.0 ? epsilon : 1.0;
    cfg.random_init = false;
    return cfg;
}

AttackConfig AttackConfig::deviation(double delta) {
    AttackConfig cfg;
    cfg.epsilon = delta;
    cfg.steps = 20;
    cfg.step_size = delta > 0.0 ? delta / 8.0 : 1.0;
    cfg.random_init = false;
    cfg.target = LossTarget::logit_deviation;
    return cfg;
}

namespace {

// Feasible box [max(x-eps,0), min(x+eps,1)], nonempty whenever x is in [0,1].
void feasible_bounds(const Tensor& x, double eps, std::vector<double>& lo,
                     std::vector<double>& hi) {
    const auto xd = x.data();
    lo.resize(xd.size());
    hi.resize(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) {
        lo[i] = std::max(xd[i] - eps, 0.0);
        hi[i] = std::min(xd[i] + eps, 1.0);
    }
}

}  // namespace

Tensor project(const Tensor& x_hat, const Tensor& x, double epsilon) {
    if (x_hat.shape() != x.shape())
        fail_data("project: shapes " + shape_str(x_hat.shape()) + " and " + shape_str(x.shape()) +
                  " do not match");
    if (epsilon < 0.0) fail_data("project: epsilon must be >= 0");
    std::vector<double> lo, hi;
    feasible_bounds(x, epsilon, lo, hi);
    return clamp_box(x_hat, Tensor::from(x.shape(), std::move(lo)),
                     Tensor::from(x.shape(), std::move(hi)));
}

Tensor pgd_attack(const BatchLossFn& loss, const Tensor& x, const std::vector<int>& y,
                  const AttackConfig& cfg, const SeededRng& rng) {
    cfg.validate();
    if (x.shape().size() != 2)
        fail_data("pgd_attack: expected a (batch, dim) input, got " + shape_str(x.shape()));
    if (cfg.epsilon == 0.0) return x.clone();

    const std::int64_t m = x.shape()[0], d = x.shape()[1];
    Tensor lo_t, hi_t;
    {
        std::vector<double> lo, hi;
        feasible_bounds(x, cfg.epsilon, lo, hi);
        lo_t = Tensor::from(x.shape(), std::move(lo));
        hi_t = Tensor::from(x.shape(), std::move(hi));
    }

    Tensor cur = x.clone();
    if (cfg.random_init) {
        for (std::int64_t i = 0; i < m; ++i) {
            SeededRng row_rng = rng.fork(static_cast<std::uint64_t>(i));
            for (std::int64_t j = 0; j < d; ++j)
                cur.data()[i * d + j] += row_rng.next_uniform(-cfg.epsilon, cfg.epsilon);
        }
        cur = clamp_box(cur, lo_t, hi_t);
    }

    for (int t = 0; t < cfg.steps; ++t) {
        Tensor xt = Tensor::from(x.shape(), {cur.data().begin(), cur.data().end()},
                                 /*requires_grad=*/true);
        {
            Tape tape;
            Tensor l = loss(xt, y);
            tape.backward(l);
        }
        Tensor g = xt.grad().empty()
                       ? Tensor::zeros(x.shape())
                       : Tensor::from(x.shape(), {xt.grad().begin(), xt.grad().end()});
        cur = clamp_box(add(xt, scalar_mul(sign(g), cfg.step_size)), lo_t, hi_t);
    }
    return cur;
}

LogitsFn single_logits(const ExtractorNet* net, const LinearHead* head) {
    return [net, head](const Tensor& x) { return forward_logits(*net, *head, x); };
}

BatchLossFn make_ce_loss(LogitsFn logits) {
    return [logits = std::move(logits)](const Tensor& x, const std::vector<int>& y) {
        return softmax_cross_entropy(logits(x), y);
    };
}

BatchLossFn make_deviation_loss(LogitsFn logits, const Tensor& x_clean) {
    Tensor z_clean = logits(x_clean).clone();
    z_clean.set_requires_grad(false);
    return [logits = std::move(logits), z_clean](const Tensor& x, const std::vector<int>&) {
        return mean_all(row_abs_max(sub(logits(x), z_clean)));
    };
}

BatchLossFn attack_loss_for(LossTarget target, const ExtractorNet* net, const LinearHead* head,
                            const BankManifest* bank, const Merger* merger,
                            const Tensor* x_clean) {
    switch (target) {
        case LossTarget::head_loss:
            if (!net || !head) fail_data("attack_loss_for: head-loss target requires a network and head");
            return make_ce_loss(single_logits(net, head));
        case LossTarget::merger_loss:
            if (!merger) fail_data("attack_loss_for: merger-loss target requires a merger");
            if (!bank) fail_data("attack_loss_for: merger-loss target requires a bank");
            return make_ce_loss(stacked_logits(bank, merger));
        case LossTarget::logit_deviation: {
            if (!x_clean) fail_data("attack_loss_for: logit-deviation target requires the clean batch");
            LogitsFn f;
            if (bank && merger) {
                f = stacked_logits(bank, merger);
            } else if (net && head) {
                f = single_logits(net, head);
            } else {
                fail_data("attack_loss_for: logit-deviation target requires a model");
            }
            return make_deviation_loss(std::move(f), *x_clean);
        }
    }
    fail_data("attack_loss_for: unknown target");
}

}  // namespace afs
