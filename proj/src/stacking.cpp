#include "afs/stacking.hpp"

#include <cmath>
#include <iomanip>

#include "afs/error.hpp"

namespace afs {

void BankManifest::validate() const {
    if (entries.empty()) fail_data("bank: no extractors");
    if (mask.size() != entries.size())
        fail_data("bank: mask length " + std::to_string(mask.size()) + " does not match entry count " +
                  std::to_string(entries.size()));
    bool any = false;
    for (auto m : mask) any |= (m != 0);
    if (!any) fail_data("bank: mask selects no extractor");
}

std::vector<std::size_t> BankManifest::selected() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out.push_back(i);
    return out;
}

std::int64_t BankManifest::stacked_width() const {
    std::int64_t w = 0;
    for (auto i : selected()) w += entries[i].ckpt->net.feature_dim();
    return w;
}

int BankManifest::classes() const {
    return static_cast<int>(entries.at(0).ckpt->head.classes());
}

std::string BankManifest::mask_string() const {
    std::string s;
    for (auto m : mask) s.push_back(m ? '1' : '0');
    return s;
}

void BankManifest::set_mask_string(const std::string& bits) {
    if (bits.size() != entries.size())
        fail_data("bank: mask '" + bits + "' has " + std::to_string(bits.size()) +
                  " bits for " + std::to_string(entries.size()) + " extractors");
    mask.clear();
    for (char c : bits) {
        if (c != '0' && c != '1') fail_data("bank: mask must be a binary string, got '" + bits + "'");
        mask.push_back(c == '1' ? 1 : 0);
    }
    validate();
}

void MergerTrainConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0)
        fail_data("merger: alpha must lie in [0,1], got " + std::to_string(alpha));
    if (budget < 0.0) fail_data("merger: budget must be >= 0");
    if (epochs <= 0 || batch_size <= 0) fail_data("merger: epochs and batch_size must be positive");
}

Tensor concat_features(const BankManifest& bank, const Tensor& x) {
    bank.validate();
    std::vector<Tensor> parts;
    for (auto i : bank.selected()) {
        const auto& e = bank.entries[i];
        if (!e.ckpt) fail_data("bank: extractor " + std::to_string(i) + " is not loaded");
        parts.push_back(e.ckpt->net.forward_features(x));
    }
    if (parts.size() == 1) return parts[0];
    return concat_cols(parts);
}

Tensor merger_forward(const Merger& merger, const Tensor& features) {
    if (features.shape().size() != 2 || features.shape()[1] != merger.weight.shape()[0])
        fail_data("merger_forward: feature width " + shape_str(features.shape()) +
                  " does not match merger weight " + shape_str(merger.weight.shape()));
    return add(matmul(features, merger.weight), merger.bias);
}

Merger init_merger(const BankManifest& bank) {
    bank.validate();
    Merger m;
    m.weight = Tensor::zeros({bank.stacked_width(), bank.classes()}, /*requires_grad=*/true);
    m.bias = Tensor::zeros({bank.classes()}, /*requires_grad=*/true);
    return m;
}

LogitsFn stacked_logits(const BankManifest* bank, const Merger* merger) {
    return [bank, merger](const Tensor& x) {
        return merger_forward(*merger, concat_features(*bank, x));
    };
}

Merger train_merger(const BankManifest& bank, const MergerTrainConfig& cfg, const Dataset& data,
                    MergerTrainStats* stats) {
    bank.validate();
    cfg.validate();
    if (data.train_idx.empty()) fail_data("train_merger: empty training split");

    // The bank is frozen for the whole fit; only merger tensors join the tape
    // as differentiable parameters.
    std::vector<Tensor> bank_params;
    for (const auto& e : bank.entries)
        for (auto& p : e.ckpt->parameters()) bank_params.push_back(p);
    ParamFreezeGuard freeze(bank_params);

    Merger merger = init_merger(bank);
    merger.alpha = cfg.alpha;
    auto params = merger.parameters();
    SgdMomentum opt;
    SeededRng root(cfg.seed);

    BatchLossFn attack_loss = attack_loss_for(LossTarget::merger_loss, nullptr, nullptr, &bank, &merger);
    AttackConfig atk = AttackConfig::pgd(cfg.budget, cfg.attack_steps, /*random_init=*/true);

    MergerTrainStats local;
    std::vector<std::int32_t> order = data.train_idx;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        SeededRng shuffle_rng = root.fork("shuffle").fork(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - first);
            std::vector<int> y;
            Tensor x = make_batch(data, order, first, count, y);

            Tensor x_adv;
            if (cfg.alpha < 1.0) {
                SeededRng atk_rng =
                    root.fork("attack").fork(static_cast<std::uint64_t>(epoch) * 1000003ull + batches);
                x_adv = pgd_attack(attack_loss, x, y, atk, atk_rng);
                local.attacks_invoked++;
                zero_grads(params);  // attack backward also touched merger grads
            }

            Tape tape;
            Tensor loss;
            if (cfg.alpha >= 1.0) {
                loss = softmax_cross_entropy(merger_forward(merger, concat_features(bank, x)), y);
            } else if (cfg.alpha <= 0.0) {
                loss = softmax_cross_entropy(merger_forward(merger, concat_features(bank, x_adv)), y);
            } else {
                Tensor clean_ce = softmax_cross_entropy(merger_forward(merger, concat_features(bank, x)), y);
                Tensor adv_ce = softmax_cross_entropy(merger_forward(merger, concat_features(bank, x_adv)), y);
                loss = add(scalar_mul(clean_ce, cfg.alpha), scalar_mul(adv_ce, 1.0 - cfg.alpha));
            }
            if (!std::isfinite(loss.item()))
                fail_numeric("train_merger: loss diverged at epoch " + std::to_string(epoch));
            epoch_loss += loss.item();
            ++batches;
            tape.backward(loss);
            opt.step(params, cfg.lr, cfg.momentum);
            zero_grads(params);
        }
        local.final_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1));
        if (cfg.progress)
            (*cfg.progress) << "merger\t" << epoch << '\t' << std::fixed << std::setprecision(6)
                            << local.final_loss << '\n';
    }
    if (stats) *stats = local;
    return merger;
}

Tensor logit_average(const std::vector<const ExtractorCheckpoint*>& models,
                     const std::vector<double>& lambdas, const Tensor& x) {
    if (models.empty() || models.size() != lambdas.size())
        fail_data("logit_average: need one lambda per model");
    double sum = 0.0;
    for (double l : lambdas) {
        if (l < 0.0) fail_data("logit_average: lambdas must be non-negative");
        sum += l;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        fail_data("logit_average: lambdas must sum to 1 (got " + std::to_string(sum) + ")");
    Tensor acc;
    for (std::size_t i = 0; i < models.size(); ++i) {
        Tensor z = scalar_mul(forward_logits(models[i]->net, models[i]->head, x), lambdas[i]);
        acc = acc.defined() ? add(acc, z) : z;
    }
    return acc;
}

}  // namespace afs
