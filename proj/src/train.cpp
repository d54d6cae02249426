#include "afs/train.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "afs/attacks.hpp"
#include "afs/error.hpp"
#include "afs/eval.hpp"

namespace afs {

void TrainConfig::validate() const {
    if (epochs <= 0 || batch_size <= 0) fail_data("train: epochs and batch_size must be positive");
    if (budget < 0.0) fail_data("train: budget must be >= 0");
    if (budget_mode == BudgetMode::uniform_random && !(budget_lo < budget_hi))
        fail_data("train: uniform-random budget mode requires budget_lo < budget_hi");
    if (attack_steps < 0 || eval_steps < 0) fail_data("train: attack steps must be >= 0");
    if (eval_budget < 0.0) fail_data("train: eval_budget must be >= 0");
    if (hidden <= 0) fail_data("train: hidden width must be positive");
    if (feature_dim <= 0) fail_data("train: feature_dim must be positive");
}

std::map<int, double> TrainConfig::effective_lr_decay() const {
    if (lr_decay.has_value()) return *lr_decay;
    return {{(epochs * 3) / 4, 0.1}};
}

void BankSpec::validate() const {
    base.validate();
    if (budgets.empty()) fail_data("bank: no budgets given");
    for (std::size_t i = 1; i < budgets.size(); ++i)
        if (!(budgets[i] > budgets[i - 1])) fail_data("bank: budgets must be strictly increasing");
    if (!seeds.empty() && seeds.size() != budgets.size())
        fail_data("bank: seeds list must match budget list");
    if (jobs <= 0) fail_data("bank: jobs must be positive");
}

std::uint64_t BankSpec::seed_for(std::size_t i) const {
    if (!seeds.empty()) return seeds[i];
    return SeededRng(base.seed).fork("extractor-" + std::to_string(i)).seed();
}

std::size_t best_epoch(const std::vector<double>& robust_history) {
    std::size_t best = 0;
    for (std::size_t e = 1; e < robust_history.size(); ++e)
        if (robust_history[e] > robust_history[best]) best = e;  // ties keep the earliest
    return best;
}

namespace {

struct ValSplit {
    std::vector<std::int32_t> train;
    std::vector<std::int32_t> val;
};

ValSplit resolve_validation(const Dataset& data, std::uint64_t seed) {
    if (!data.val_idx.empty()) return {data.train_idx, data.val_idx};
    // Hold out the seeded tail 10%, never used for updates.
    std::vector<std::int32_t> order = data.train_idx;
    SeededRng rng = SeededRng(seed).fork("valsplit");
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t n_val = std::max<std::size_t>(order.size() / 10, 1);
    ValSplit split;
    split.val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
    split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
    return split;
}

void snapshot_params(const std::vector<Tensor>& params, std::vector<std::vector<double>>& out) {
    out.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        out[i].assign(params[i].data().begin(), params[i].data().end());
}

void restore_params(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i)
        std::copy(snap[i].begin(), snap[i].end(), params[i].data().begin());
}

}  // namespace

ExtractorCheckpoint train_extractor(const TrainConfig& cfg, const Dataset& data) {
    cfg.validate();
    if (data.size() == 0 || data.train_idx.empty()) fail_data("train_extractor: empty dataset");

    const ValSplit split = resolve_validation(data, cfg.seed);
    if (split.train.empty()) fail_data("train_extractor: no training examples after validation holdout");

    ExtractorCheckpoint ckpt;
    ckpt.budget = cfg.budget;
    ckpt.seed = cfg.seed;
    ckpt.net = init_extractor(cfg.seed, data.dim, cfg.feature_dim, cfg.hidden);
    {
        SeededRng head_rng = SeededRng(cfg.seed).fork("head");
        ckpt.head = init_head(head_rng, cfg.feature_dim, data.classes);
    }
    auto params = ckpt.parameters();
    SgdMomentum opt;
    SeededRng root(cfg.seed);
    SeededRng budget_rng = root.fork("budget");

    LogitsFn model = single_logits(&ckpt.net, &ckpt.head);
    BatchLossFn attack_loss = make_ce_loss(model);
    const AttackConfig val_attack = AttackConfig::pgd(cfg.eval_budget, cfg.eval_steps, true);
    const SeededRng val_rng = root.fork("val");  // same noise every epoch
    const auto decay = cfg.effective_lr_decay();

    double lr_now = cfg.lr;
    std::vector<double> robust_history;
    std::vector<std::vector<double>> best_snapshot;
    EvalMetrics best_metrics;

    std::vector<std::int32_t> order = split.train;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (auto it = decay.find(epoch); it != decay.end()) lr_now *= it->second;

        SeededRng shuffle_rng = root.fork("shuffle").fork(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }

        std::size_t batch_no = 0;
        for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - first);
            std::vector<int> y;
            Tensor x = make_batch(data, order, first, count, y);

            double eps = cfg.budget;
            if (cfg.budget_mode == BudgetMode::uniform_random)
                eps = budget_rng.next_uniform(cfg.budget_lo, cfg.budget_hi);
            if (cfg.sampled_budget_log) cfg.sampled_budget_log->push_back(eps);

            Tensor x_adv;
            {
                // Only input gradients matter while crafting the batch.
                ParamFreezeGuard freeze(params);
                SeededRng atk_rng = root.fork("attack").fork(
                    static_cast<std::uint64_t>(epoch) * 1000003ull + batch_no);
                x_adv = pgd_attack(attack_loss, x, y, AttackConfig::pgd(eps, cfg.attack_steps, true),
                                   atk_rng);
            }

            Tape tape;
            Tensor loss = softmax_cross_entropy(forward_logits(ckpt.net, ckpt.head, x_adv), y);
            if (!std::isfinite(loss.item()))
                fail_numeric("train_extractor: loss diverged at epoch " + std::to_string(epoch));
            tape.backward(loss);
            opt.step(params, lr_now, cfg.momentum);
            zero_grads(params);
            ++batch_no;
        }

        // Validation attacks must not leak gradients into the training state.
        ParamFreezeGuard eval_freeze(params);
        const double clean_val = clean_accuracy(model, data, split.val);
        const double robust_val =
            cfg.eval_budget > 0.0 ? robust_accuracy(model, data, split.val, val_attack, val_rng)
                                  : clean_val;
        robust_history.push_back(robust_val);
        if (cfg.progress)
            (*cfg.progress) << epoch << '\t' << std::fixed << std::setprecision(6) << clean_val
                            << '\t' << robust_val << '\n';

        if (best_epoch(robust_history) == robust_history.size() - 1) {
            snapshot_params(params, best_snapshot);
            best_metrics.clean = clean_val;
            best_metrics.pgd10 = robust_val;
        }
    }

    restore_params(params, best_snapshot);
    ckpt.metrics = best_metrics;
    return ckpt;
}

BankManifest train_bank(const BankSpec& spec, const Dataset& data) {
    spec.validate();
    const std::size_t n = spec.budgets.size();
    std::vector<ExtractorCheckpoint> trained(n);

    const bool parallel = spec.jobs > 1 && n > 1;
    auto train_one = [&](std::size_t i, std::ostream* prog) {
        TrainConfig cfg = spec.base;
        cfg.budget = spec.budgets[i];
        cfg.seed = spec.seed_for(i);
        cfg.progress = prog;
        cfg.sampled_budget_log = nullptr;
        trained[i] = train_extractor(cfg, data);
    };

    if (!parallel) {
        for (std::size_t i = 0; i < n; ++i) {
            if (spec.base.progress)
                (*spec.base.progress) << "# extractor " << i << " budget " << spec.budgets[i] << '\n';
            train_one(i, spec.base.progress);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(n);
        std::vector<std::ostringstream> buffers(n);
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    train_one(i, spec.base.progress ? &buffers[i] : nullptr);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(spec.jobs), n);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        for (std::size_t i = 0; i < n; ++i)
            if (errors[i]) std::rethrow_exception(errors[i]);
        if (spec.base.progress)
            for (std::size_t i = 0; i < n; ++i)
                (*spec.base.progress) << "# extractor " << i << " budget " << spec.budgets[i] << '\n'
                                      << buffers[i].str();
    }

    // Table-style metrics on the held-out split.
    const auto& eval_idx = data.test_idx.empty() ? data.val_idx : data.test_idx;
    BankManifest bank;
    for (std::size_t i = 0; i < n; ++i) {
        BankEntry e;
        e.ckpt = std::make_shared<ExtractorCheckpoint>(std::move(trained[i]));
        e.budget = spec.budgets[i];
        if (!eval_idx.empty()) {
            auto params = e.ckpt->parameters();
            ParamFreezeGuard eval_freeze(params);
            LogitsFn model = single_logits(&e.ckpt->net, &e.ckpt->head);
            const SeededRng eval_rng = SeededRng(spec.base.seed).fork("bank-eval");
            e.metrics.clean = clean_accuracy(model, data, eval_idx);
            e.metrics.pgd10 = robust_accuracy(model, data, eval_idx,
                                              AttackConfig::pgd(spec.base.eval_budget, 10, true),
                                              eval_rng);
            e.metrics.pgd20 = robust_accuracy(model, data, eval_idx,
                                              AttackConfig::pgd(spec.base.eval_budget, 20, true),
                                              eval_rng);
            e.ckpt->metrics = e.metrics;
        }
        bank.entries.push_back(std::move(e));
    }
    bank.mask.assign(n, 1);
    bank.validate();
    return bank;
}

}  // namespace afs
