#pragma once

#include <string>
#include <vector>

#include "afs/analysis.hpp"
#include "afs/stacking.hpp"

namespace afs {

// CSV emitters for the documented artifact schemas. All numeric cells use
// fixed 6-decimal formatting and every document has a header row.

/// bank_table.csv: budget, clean, pgd10, pgd20
std::string bank_table_csv(const BankManifest& bank);

/// deltaz.csv: budget, delta_z, Delta
std::string deltaz_csv(const DeltaZTable& table);

struct AlphaSweepRow {
    double alpha = 0.0;
    double clean = 0.0;
    double pgd10 = 0.0;
    double pgd20 = 0.0;
};
/// alpha_sweep.csv: alpha, clean, pgd10, pgd20
std::string alpha_sweep_csv(const std::vector<AlphaSweepRow>& rows);

struct CurveRow {
    double budget = 0.0;
    double accuracy = 0.0;
    std::string model_id;
};
/// curve.csv: budget, accuracy, model_id
std::string curve_csv(const std::vector<CurveRow>& rows);

struct RatioRow {
    std::size_t extractor_index = 0;
    double ratio = 0.0;
    double alpha = 0.0;
};
/// ratios.csv: extractor_index, ratio, alpha
std::string ratios_csv(const std::vector<RatioRow>& rows);

/// histogram.csv: bin_lo, bin_hi, count
std::string histogram_csv(const WeightHistogram& hist);

struct TradeoffRow {
    std::string model_id;
    double clean = 0.0;
    double robust = 0.0;
};
/// tradeoff.csv: model_id, clean, robust, score (score = (clean+robust)/2)
std::string tradeoff_csv(const std::vector<TradeoffRow>& rows);

}  // namespace afs
