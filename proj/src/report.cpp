#include "afs/report.hpp"

#include "afs/csv.hpp"

namespace afs {

std::string bank_table_csv(const BankManifest& bank) {
    CsvWriter w({"budget", "clean", "pgd10", "pgd20"});
    for (const auto& e : bank.entries)
        w.add_row({fmt6(e.budget), fmt6(e.metrics.clean), fmt6(e.metrics.pgd10),
                   fmt6(e.metrics.pgd20)});
    return w.str();
}

std::string deltaz_csv(const DeltaZTable& table) {
    CsvWriter w({"budget", "delta_z", "Delta"});
    for (std::size_t i = 0; i < table.budgets.size(); ++i)
        w.add_row({fmt6(table.budgets[i]), fmt6(table.values[i]), fmt6(table.delta)});
    return w.str();
}

std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows) {
    CsvWriter w({"alpha", "clean", "pgd10", "pgd20"});
    for (const auto& r : rows)
        w.add_row({fmt6(r.alpha), fmt6(r.clean), fmt6(r.pgd10), fmt6(r.pgd20)});
    return w.str();
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
    CsvWriter w({"budget", "accuracy", "model_id"});
    for (const auto& r : rows) w.add_row({fmt6(r.budget), fmt6(r.accuracy), r.model_id});
    return w.str();
}

std::string ratios_csv(const std::vector<RatioRow>& rows) {
    CsvWriter w({"extractor_index", "ratio", "alpha"});
    for (const auto& r : rows)
        w.add_row({std::to_string(r.extractor_index), fmt6(r.ratio), fmt6(r.alpha)});
    return w.str();
}

std::string histogram_csv(const WeightHistogram& hist) {
    CsvWriter w({"bin_lo", "bin_hi", "count"});
    for (const auto& b : hist.bins)
        w.add_row({fmt6(b.lo), fmt6(b.hi), std::to_string(b.count)});
    return w.str();
}

std::string tradeoff_csv(const std::vector<TradeoffRow>& rows) {
    CsvWriter w({"model_id", "clean", "robust", "score"});
    for (const auto& r : rows)
        w.add_row({r.model_id, fmt6(r.clean), fmt6(r.robust), fmt6(tradeoff(r.clean, r.robust))});
    return w.str();
}

}  // namespace afs
