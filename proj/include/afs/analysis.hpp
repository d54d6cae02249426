#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afs/attacks.hpp"
#include "afs/data.hpp"
#include "afs/eval.hpp"
#include "afs/stacking.hpp"

namespace afs {

/// Mean (or max) logit deviation per training budget, measured at one
/// evaluation strength Delta.
struct DeltaZTable {
    std::vector<double> budgets;  // strictly increasing
    std::vector<double> values;   // non-negative
    double delta = 0.0;           // evaluation attack strength

    void validate() const;
};

enum class DeltaZAggregate { mean, max };

/// Approximates max_{||x_hat - x||_inf <= Delta} ||z_hat - z||_inf by PGD
/// ascent on the logit-deviation objective (absolute value for a single
/// logit), aggregated over the evaluation set. Delta = 0 returns 0 exactly.
/// cfg.steps <= 0 selects the default deterministic schedule
/// (20 steps, eta = Delta/8, no random start).
double delta_z(const LogitsFn& model, const Dataset& ds, const std::vector<std::int32_t>& idx,
               double delta, AttackConfig cfg = {}, DeltaZAggregate agg = DeltaZAggregate::mean,
               int batch_size = 256);

/// delta_z for every bank entry (mask ignored: candidates are measured
/// before selection).
DeltaZTable delta_z_table(const BankManifest& bank, const Dataset& ds,
                          const std::vector<std::int32_t>& idx, double delta,
                          AttackConfig cfg = {}, DeltaZAggregate agg = DeltaZAggregate::mean);

struct SelectionResult {
    bool ok = false;           // a concave suffix of length >= 3 exists
    std::size_t start = 0;     // first selected index
    std::vector<double> selected_budgets;
    std::string note;
};

/// Largest contiguous suffix of the table whose interior points are all
/// concave: second differences d2_i = v_{i+1} - 2 v_i + v_{i-1} <= tol with
/// tol = tol_factor * max(v). Unevenly spaced budgets use second divided
/// differences scaled so the evenly spaced case reduces to d2 exactly.
/// Fewer than 3 surviving entries is reported as not ok.
SelectionResult concavity_select(const DeltaZTable& table, double tol_factor = 1e-3);

struct SufficientVerdict {
    bool holds = false;
    double margin = 0.0;  // delta_ref - sum_i lambda_i * delta_i
};

/// Checks sum_i lambda_i * delta_i < delta[reference] (strict).
SufficientVerdict sufficient_condition(const std::vector<double>& lambdas,
                                       const std::vector<double>& deltas,
                                       std::size_t reference_index);

/// Fraction (0..1) misclassified under a PGD cross-entropy attack at
/// strength delta; equals 1 - robust accuracy. delta = 0 is the clean error.
double error_rate(const LogitsFn& model, const Dataset& ds, const std::vector<std::int32_t>& idx,
                  double delta, const AttackConfig& cfg, const SeededRng& rng);

/// Normalized per-extractor sums of |merger weight| blocks; sums to 1.
/// An all-zero weight matrix has no defined ratios and fails.
std::vector<double> importance_ratios(const Merger& merger, const BankManifest& bank);

struct CurvePoint {
    double budget = 0.0;
    double accuracy = 0.0;  // percent
};

/// Robust accuracy per budget. Budget 0 is clean accuracy exactly. An
/// adversarial example found at a smaller budget stays feasible at larger
/// ones, so the curve is non-increasing by construction.
std::vector<CurvePoint> robustness_curve(const LogitsFn& model, const Dataset& ds,
                                         const std::vector<std::int32_t>& idx,
                                         const std::vector<double>& budgets, int steps,
                                         const SeededRng& rng, int batch_size = 256);

/// Arithmetic mean of clean and robust accuracy (both in [0,100]).
double tradeoff(double clean, double robust);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct WeightHistogram {
    std::vector<HistogramBin> bins;  // 101 fixed bins over [min, max]
    double sparsity = 0.0;           // fraction with |w| < 1e-3 * max|w|
    double excess_kurtosis = 0.0;    // m4/m2^2 - 3, 0 for a constant matrix
};

WeightHistogram weight_histogram(const Tensor& matrix);

}  // namespace afs
