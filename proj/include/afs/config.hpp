#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afs/data.hpp"
#include "afs/stacking.hpp"
#include "afs/train.hpp"

namespace afs {

/// Line-oriented `key = value` configuration with `#` comments. Budgets and
/// other numeric values accept fractions like `8/255`. Later assignments to
/// the same key win.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_num(const std::string& key) const;
    double get_num(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::vector<double> get_num_list(const std::string& key) const;

    /// Rejects keys outside the documented schema (usage error).
    void require_known(const std::vector<std::string>& allowed) const;

    /// "8/255" -> 0.03137..., plain decimals pass through.
    static double parse_fraction(const std::string& text, const std::string& context);

private:
    std::vector<std::pair<std::string, std::string>> kv_;
    std::string origin_;

    const std::string* find(const std::string& key) const;
};

/// Typed view of an experiment configuration file.
struct ExperimentConfig {
    // dataset
    std::string dataset = "gaussians";  // gaussians | rings | idx
    std::int64_t n = 2000;
    double margin = 0.18;
    std::string idx_images, idx_labels;
    std::int64_t idx_limit = 0;
    double val_fraction = 0.1;
    double test_fraction = 0.2;

    // bank / extractor training
    std::vector<double> budgets = {0.0, 0.05, 0.1, 0.2, 0.3};
    TrainConfig train;
    int jobs = 1;

    // merger training
    MergerTrainConfig merger;

    // analysis / evaluation
    int eval_subset = 512;           // delta_z and report evaluation cap
    std::vector<double> curve_budgets;  // defaults derived from eval budget

    std::uint64_t seed = 42;

    static ExperimentConfig from(const Config& cfg);
    static ExperimentConfig from_file(const std::string& path);

    /// Materializes the dataset (synthetic or IDX) and assigns splits,
    /// seeded from the global seed.
    Dataset load_dataset() const;

    /// Subset of test indices used for delta_z and report-time evaluation.
    std::vector<std::int32_t> eval_indices(const Dataset& ds) const;

    std::vector<double> effective_curve_budgets() const;
};

}  // namespace afs
