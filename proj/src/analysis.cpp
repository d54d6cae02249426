#include "afs/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "afs/error.hpp"

namespace afs {

void DeltaZTable::validate() const {
    if (budgets.size() != values.size()) fail_data("delta_z table: budget/value length mismatch");
    for (std::size_t i = 1; i < budgets.size(); ++i)
        if (!(budgets[i] > budgets[i - 1]))
            fail_data("delta_z table: budgets must be strictly increasing");
    for (double v : values)
        if (v < 0.0) fail_data("delta_z table: values must be non-negative");
}

double delta_z(const LogitsFn& model, const Dataset& ds, const std::vector<std::int32_t>& idx,
               double delta, AttackConfig cfg, DeltaZAggregate agg, int batch_size) {
    if (delta < 0.0) fail_data("delta_z: Delta must be >= 0");
    if (idx.empty()) fail_data("delta_z: empty evaluation set");
    if (delta == 0.0) return 0.0;
    if (cfg.steps <= 0) cfg = AttackConfig::deviation(delta);
    cfg.epsilon = delta;
    if (cfg.step_size <= 0.0) cfg.step_size = delta / 8.0;

    double acc = agg == DeltaZAggregate::mean ? 0.0 : -1.0;
    std::size_t seen = 0;
    const SeededRng rng(0);  // deterministic schedule: random_init is off by default
    for (std::size_t first = 0; first < idx.size(); first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min<std::size_t>(batch_size, idx.size() - first);
        std::vector<int> y;
        Tensor x = make_batch(ds, idx, first, count, y);
        BatchLossFn dev = make_deviation_loss(model, x);
        Tensor x_adv = pgd_attack(dev, x, y, cfg, rng);
        // Deviation of the final iterate, per sample.
        Tensor z0 = model(x);
        Tensor dv = row_abs_max(sub(model(x_adv), z0));
        for (std::size_t i = 0; i < count; ++i) {
            const double v = dv.data()[i];
            if (agg == DeltaZAggregate::mean)
                acc += v;
            else
                acc = std::max(acc, v);
        }
        seen += count;
    }
    return agg == DeltaZAggregate::mean ? acc / static_cast<double>(seen) : acc;
}

DeltaZTable delta_z_table(const BankManifest& bank, const Dataset& ds,
                          const std::vector<std::int32_t>& idx, double delta, AttackConfig cfg,
                          DeltaZAggregate agg) {
    if (bank.entries.empty()) fail_data("delta_z_table: empty bank");
    DeltaZTable table;
    table.delta = delta;
    for (const auto& e : bank.entries) {
        LogitsFn model = single_logits(&e.ckpt->net, &e.ckpt->head);
        table.budgets.push_back(e.budget);
        table.values.push_back(delta_z(model, ds, idx, delta, cfg, agg));
    }
    table.validate();
    return table;
}

SelectionResult concavity_select(const DeltaZTable& table, double tol_factor) {
    table.validate();
    const std::size_t n = table.values.size();
    if (n < 3) fail_data("concavity_select: need at least 3 entries, got " + std::to_string(n));

    double max_v = 0.0;
    for (double v : table.values) max_v = std::max(max_v, v);
    const double tol = tol_factor * max_v;

    // Evenly spaced budgets use the plain second difference. Uneven grids
    // fall back to second divided differences scaled by the mean spacing,
    // which reduces to the plain form when the spacing is uniform.
    const double h_bar = (table.budgets.back() - table.budgets.front()) / static_cast<double>(n - 1);
    bool even = true;
    for (std::size_t i = 1; i < n; ++i) {
        const double h = table.budgets[i] - table.budgets[i - 1];
        if (std::fabs(h - h_bar) > 1e-9 * std::max(h_bar, 1.0)) even = false;
    }
    std::vector<bool> concave(n, true);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        double d2;
        if (even) {
            d2 = table.values[i + 1] - 2.0 * table.values[i] + table.values[i - 1];
        } else {
            const double h0 = table.budgets[i] - table.budgets[i - 1];
            const double h1 = table.budgets[i + 1] - table.budgets[i];
            const double divided = ((table.values[i + 1] - table.values[i]) / h1 -
                                    (table.values[i] - table.values[i - 1]) / h0) /
                                   (h0 + h1);
            d2 = divided * 2.0 * h_bar * h_bar;
        }
        concave[i] = d2 <= tol;
    }

    // Smallest start such that every interior point of [start, n-1] is
    // concave. Endpoints need not be: extending the suffix from start to
    // start-1 turns `start` into an interior point, so the walk stops at the
    // last non-concave index.
    std::size_t start = n - 2;  // a 2-entry suffix has no interior point
    while (start > 0 && concave[start]) --start;

    SelectionResult res;
    res.start = start;
    res.ok = n - start >= 3;
    if (res.ok) {
        for (std::size_t i = start; i < n; ++i) res.selected_budgets.push_back(table.budgets[i]);
    } else {
        res.note = "no valid concave suffix >= 3";
    }
    return res;
}

SufficientVerdict sufficient_condition(const std::vector<double>& lambdas,
                                       const std::vector<double>& deltas,
                                       std::size_t reference_index) {
    if (lambdas.size() != deltas.size())
        fail_data("sufficient_condition: lambda/delta length mismatch");
    if (reference_index >= deltas.size())
        fail_data("sufficient_condition: reference index " + std::to_string(reference_index) +
                  " out of range");
    double sum = 0.0;
    for (double l : lambdas) {
        if (l < 0.0) fail_data("sufficient_condition: lambdas must be non-negative");
        sum += l;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        fail_data("sufficient_condition: lambdas must sum to 1");
    double weighted = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) weighted += lambdas[i] * deltas[i];
    SufficientVerdict v;
    v.margin = deltas[reference_index] - weighted;
    v.holds = weighted < deltas[reference_index];
    return v;
}

double error_rate(const LogitsFn& model, const Dataset& ds, const std::vector<std::int32_t>& idx,
                  double delta, const AttackConfig& cfg, const SeededRng& rng) {
    if (idx.empty()) fail_data("error_rate: empty evaluation set");
    AttackConfig eff = cfg;
    eff.epsilon = delta;
    if (delta > 0.0 && eff.steps > 0 && eff.step_size <= 0.0) eff.step_size = delta / 4.0;
    const double acc = delta == 0.0 ? clean_accuracy(model, ds, idx)
                                    : robust_accuracy(model, ds, idx, eff, rng);
    return 1.0 - acc / 100.0;
}

std::vector<double> importance_ratios(const Merger& merger, const BankManifest& bank) {
    bank.validate();
    const auto sel = bank.selected();
    std::int64_t expected = 0;
    for (auto i : sel) expected += bank.entries[i].ckpt->net.feature_dim();
    if (merger.weight.shape()[0] != expected)
        fail_data("importance_ratios: merger width " + std::to_string(merger.weight.shape()[0]) +
                  " does not match bank width " + std::to_string(expected));

    const std::int64_t c = merger.weight.shape()[1];
    std::vector<double> sums;
    std::int64_t row = 0;
    for (auto i : sel) {
        const std::int64_t f = bank.entries[i].ckpt->net.feature_dim();
        double s = 0.0;
        for (std::int64_t r = row; r < row + f; ++r)
            for (std::int64_t j = 0; j < c; ++j) s += std::fabs(merger.weight.data()[r * c + j]);
        sums.push_back(s);
        row += f;
    }
    double total = 0.0;
    for (double s : sums) total += s;
    if (total == 0.0) fail_numeric("importance_ratios: all-zero merger weight, undefined ratios");
    for (double& s : sums) s /= total;
    return sums;
}

std::vector<CurvePoint> robustness_curve(const LogitsFn& model, const Dataset& ds,
                                         const std::vector<std::int32_t>& idx,
                                         const std::vector<double>& budgets, int steps,
                                         const SeededRng& rng, int batch_size) {
    if (idx.empty()) fail_data("robustness_curve: empty evaluation set");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (budgets[i] < 0.0) fail_data("robustness_curve: budgets must be non-negative");
        if (i > 0 && budgets[i] <= budgets[i - 1])
            fail_data("robustness_curve: budgets must be ascending");
    }
    // A sample broken at a smaller budget is broken at every larger one
    // (feasible sets nest), which keeps the curve exactly monotone.
    std::vector<bool> broken(idx.size(), false);
    BatchLossFn loss = make_ce_loss(model);
    std::vector<CurvePoint> curve;
    for (double eps : budgets) {
        std::size_t pos = 0;
        std::size_t batch_no = 0;
        for (std::size_t first = 0; first < idx.size(); first += static_cast<std::size_t>(batch_size)) {
            const std::size_t count = std::min<std::size_t>(batch_size, idx.size() - first);
            std::vector<int> y;
            Tensor x = make_batch(ds, idx, first, count, y);
            Tensor x_eval = eps == 0.0
                                ? x
                                : pgd_attack(loss, x, y, AttackConfig::pgd(eps, steps, true),
                                             rng.fork(batch_no));
            const auto pred = argmax_rows(model(x_eval));
            for (std::size_t i = 0; i < count; ++i)
                if (pred[i] != y[i]) broken[pos + i] = true;
            pos += count;
            ++batch_no;
        }
        std::size_t robust = 0;
        for (bool b : broken)
            if (!b) ++robust;
        curve.push_back({eps, 100.0 * static_cast<double>(robust) / static_cast<double>(idx.size())});
    }
    return curve;
}

double tradeoff(double clean, double robust) {
    if (clean < 0.0 || clean > 100.0 || robust < 0.0 || robust > 100.0)
        fail_data("tradeoff: accuracies must lie in [0,100]");
    return (clean + robust) / 2.0;
}

WeightHistogram weight_histogram(const Tensor& matrix) {
    const auto vals = matrix.data();
    if (vals.empty()) fail_data("weight_histogram: empty matrix");
    double lo = vals[0], hi = vals[0], max_abs = 0.0;
    for (double v : vals) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        max_abs = std::max(max_abs, std::fabs(v));
    }
    constexpr std::size_t kBins = 101;
    WeightHistogram h;
    h.bins.resize(kBins);
    const double width = (hi - lo) / static_cast<double>(kBins);
    for (std::size_t b = 0; b < kBins; ++b) {
        h.bins[b].lo = lo + width * static_cast<double>(b);
        h.bins[b].hi = lo + width * static_cast<double>(b + 1);
    }
    for (double v : vals) {
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
        if (b >= kBins) b = kBins - 1;  // v == hi lands in the last bin
        h.bins[b].count++;
    }

    const double sparse_cut = 1e-3 * max_abs;
    std::size_t sparse = 0;
    double mean = 0.0;
    for (double v : vals) {
        if (std::fabs(v) < sparse_cut) ++sparse;
        mean += v;
    }
    mean /= static_cast<double>(vals.size());
    double m2 = 0.0, m4 = 0.0;
    for (double v : vals) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(vals.size());
    m4 /= static_cast<double>(vals.size());
    h.sparsity = static_cast<double>(sparse) / static_cast<double>(vals.size());
    h.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    return h;
}

}  // namespace afs
