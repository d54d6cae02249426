#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "afs/analysis.hpp"
#include "afs/error.hpp"
#include "afs/train.hpp"
#include "common/test_util.hpp"

using namespace afs;

namespace {

Dataset interior_points(std::int64_t n, std::int64_t dim, std::uint64_t seed, double lo = 0.2,
                        double hi = 0.8) {
    Dataset ds;
    ds.dim = dim;
    ds.classes = 2;
    SeededRng rng(seed);
    ds.inputs.resize(static_cast<std::size_t>(n * dim));
    for (auto& v : ds.inputs) v = rng.next_uniform(lo, hi);
    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % 2);
    ds.train_idx.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) ds.train_idx[i] = static_cast<std::int32_t>(i);
    return ds;
}

// Single-logit linear model z = x . w  (shape (m,1)).
LogitsFn linear_model(const Tensor& w) {
    return [w](const Tensor& x) { return matmul(x, w); };
}

// Binary classifier with logits (0, x.w + b): argmax flips at z = 0.
LogitsFn binary_classifier(const Tensor& w, double b) {
    return [w, b](const Tensor& x) {
        Tensor z = add(matmul(x, w), Tensor::from({1}, {b}));
        Tensor zeros = Tensor::zeros({x.shape()[0], 1});
        std::vector<Tensor> parts = {zeros, z};
        return concat_cols(parts);
    };
}

// Independent suffix checker: smallest start whose interior points all pass.
std::pair<bool, std::size_t> direct_suffix(const std::vector<double>& v, double tol) {
    const std::size_t n = v.size();
    auto concave_at = [&](std::size_t i) { return v[i + 1] - 2.0 * v[i] + v[i - 1] <= tol; };
    for (std::size_t s = 0; s + 3 <= n; ++s) {
        bool ok = true;
        for (std::size_t i = s + 1; i + 1 < n; ++i) ok &= concave_at(i);
        if (ok) return {true, s};
    }
    return {false, n - 2};
}

}  // namespace

TEST_CASE("delta_z is zero at Delta 0 and matches the closed form on linear models") {
    Tensor w = Tensor::from({3, 1}, {1.0, -2.0, 3.0});
    LogitsFn model = linear_model(w);
    Dataset ds = interior_points(12, 3, 61);

    CHECK(delta_z(model, ds, ds.train_idx, 0.0) == 0.0);

    const double got = delta_z(model, ds, ds.train_idx, 0.1);
    CHECK(std::fabs(got - 0.6) < 1e-6);  // Delta * ||w||_1

    // non-decreasing in Delta, exactly Delta * ||w||_1 here
    double prev = 0.0;
    for (double d : {0.05, 0.1, 0.2}) {
        const double v = delta_z(model, ds, ds.train_idx, d);
        CHECK(std::fabs(v - d * 6.0) < 1e-6);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("delta_z equals the corner-enumeration oracle on random linear models") {
    SeededRng rng(62);
    for (int trial = 0; trial < 8; ++trial) {
        const std::int64_t d = 2 + static_cast<std::int64_t>(rng.next_u64() % 4);
        Tensor w = Tensor::randn({d, 1}, rng);
        Dataset ds = interior_points(6, d, 100 + trial, 0.25, 0.75);
        const double delta = 0.12;
        const double got = delta_z(linear_model(w), ds, ds.train_idx, delta);

        testutil::CornerOracle oracle{{w.data().begin(), w.data().end()}, 0.0};
        double mean = 0.0;
        for (std::int64_t i = 0; i < ds.size(); ++i) {
            std::vector<double> x(ds.inputs.begin() + i * d, ds.inputs.begin() + (i + 1) * d);
            mean += oracle.max_abs_deviation(x, delta);
        }
        mean /= static_cast<double>(ds.size());
        CHECK(std::fabs(got - mean) < 1e-6);
    }
}

TEST_CASE("delta_z max aggregate dominates the mean") {
    Tensor w = Tensor::from({2, 1}, {0.5, 1.5});
    Dataset ds = interior_points(10, 2, 63);
    const double mean = delta_z(linear_model(w), ds, ds.train_idx, 0.1, {}, DeltaZAggregate::mean);
    const double mx = delta_z(linear_model(w), ds, ds.train_idx, 0.1, {}, DeltaZAggregate::max);
    CHECK(mx >= mean - 1e-12);
}

TEST_CASE("adversarial training shrinks delta_z against clean training") {
    Dataset ds = gen_synthetic(SyntheticKind::gaussians, 500, 91, 0.25);
    assign_splits(ds, 0.1, 0.2, 91);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.lr = 0.05;
    cfg.hidden = 16;
    cfg.feature_dim = 8;
    cfg.attack_steps = 5;
    cfg.eval_budget = 0.1;
    cfg.eval_steps = 5;
    cfg.seed = 17;

    cfg.budget = 0.0;
    ExtractorCheckpoint clean_net = train_extractor(cfg, ds);
    cfg.budget = 0.2;
    ExtractorCheckpoint robust_net = train_extractor(cfg, ds);

    const double dz_clean =
        delta_z(single_logits(&clean_net.net, &clean_net.head), ds, ds.test_idx, 0.1);
    const double dz_robust =
        delta_z(single_logits(&robust_net.net, &robust_net.head), ds, ds.test_idx, 0.1);
    CHECK(dz_robust < dz_clean);
}

TEST_CASE("concavity selection hand cases") {
    DeltaZTable all;
    all.budgets = {1, 2, 3, 4};
    all.values = {10, 8, 5, 1};
    all.delta = 0.1;
    SelectionResult r = concavity_select(all);
    CHECK(r.ok);
    CHECK(r.start == 0);
    CHECK(r.selected_budgets.size() == 4);

    DeltaZTable none = all;
    none.values = {10, 6, 3, 1};
    r = concavity_select(none);
    CHECK(!r.ok);
    CHECK(r.note == "no valid concave suffix >= 3");
    CHECK(r.selected_budgets.empty());

    DeltaZTable flat = all;
    flat.values = {4, 4, 4, 4};
    r = concavity_select(flat);
    CHECK(r.ok);
    CHECK(r.start == 0);

    DeltaZTable mixed = all;
    mixed.budgets = {1, 2, 3, 4, 5};
    mixed.values = {10, 8, 5, 4.9, 1};  // one convex interior point at i=2
    r = concavity_select(mixed);
    CHECK(r.ok);
    CHECK(r.start == 2);
    CHECK(r.selected_budgets == std::vector<double>{3, 4, 5});

    DeltaZTable tiny;
    tiny.budgets = {1, 2};
    tiny.values = {2, 1};
    CHECK_THROWS_AS(concavity_select(tiny), Error);
}

TEST_CASE("concavity selection handles uneven spacing via divided differences") {
    DeltaZTable t;
    t.budgets = {0.0, 0.05, 0.1, 0.2, 0.3};  // the bank grid: not evenly spaced
    t.values = {10.0, 9.0, 7.8, 5.0, 1.0};   // concave in the continuous sense
    SelectionResult r = concavity_select(t);
    CHECK(r.ok);
    CHECK(r.start == 0);

    t.values = {10.0, 4.0, 2.0, 1.2, 1.0};  // convex drop
    r = concavity_select(t);
    CHECK(!r.ok);
}

TEST_CASE("concavity selection matches a direct checker on random tables") {
    SeededRng rng(64);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + rng.next_u64() % 5;
        DeltaZTable t;
        t.delta = 0.1;
        for (std::size_t i = 0; i < n; ++i) {
            t.budgets.push_back(static_cast<double>(i));
            t.values.push_back(rng.next_uniform(0.0, 10.0));
        }
        double mx = 0.0;
        for (double v : t.values) mx = std::max(mx, v);
        const auto expect = direct_suffix(t.values, 1e-3 * mx);
        const SelectionResult got = concavity_select(t);
        CHECK(got.ok == expect.first);
        if (got.ok) CHECK(got.start == expect.second);
    }
}

TEST_CASE("sufficient condition hand cases") {
    const std::vector<double> deltas = {6, 4, 3};
    // reference: the second network (index 1)
    SufficientVerdict v = sufficient_condition({0.1, 0.4, 0.5}, deltas, 1);
    CHECK(v.holds);
    CHECK(v.margin == doctest::Approx(0.3).epsilon(1e-12));

    v = sufficient_condition({0.2, 0.5, 0.3}, deltas, 1);
    CHECK(!v.holds);
    CHECK(v.margin == doctest::Approx(-0.1).epsilon(1e-12));

    // one-hot on the reference fails strictly with margin 0
    v = sufficient_condition({0.0, 1.0, 0.0}, deltas, 1);
    CHECK(!v.holds);
    CHECK(v.margin == 0.0);

    CHECK_THROWS_AS(sufficient_condition({0.5, 0.5}, deltas, 1), Error);
    CHECK_THROWS_AS(sufficient_condition({0.6, 0.6, -0.2}, deltas, 1), Error);
    CHECK_THROWS_AS(sufficient_condition({0.1, 0.4, 0.5}, deltas, 3), Error);
}

TEST_CASE("sufficient condition matches direct evaluation on random cases") {
    SeededRng rng(65);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 5;
        std::vector<double> lam(n), del(n);
        double sum = 0.0;
        for (auto& l : lam) {
            l = rng.next_uniform(0.0, 1.0);
            sum += l;
        }
        for (auto& l : lam) l /= sum;
        // renormalize the tail so the sum is exactly 1 within 1e-12
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) acc += lam[i];
        lam[n - 1] = 1.0 - acc;
        for (auto& d : del) d = rng.next_uniform(0.0, 8.0);
        const std::size_t ref = rng.next_u64() % n;

        double weighted = 0.0;
        for (std::size_t i = 0; i < n; ++i) weighted += lam[i] * del[i];
        const SufficientVerdict v = sufficient_condition(lam, del, ref);
        CHECK(v.holds == (weighted < del[ref]));
        CHECK(v.margin == doctest::Approx(del[ref] - weighted).epsilon(1e-12));
    }
}

TEST_CASE("error rate basics and the corner oracle") {
    // Strong-margin model: nothing breaks at small Delta.
    Tensor w = Tensor::from({2, 1}, {40.0, 40.0});
    Dataset ds;
    ds.dim = 2;
    ds.classes = 2;
    ds.inputs = {0.8, 0.8, 0.75, 0.85, 0.2, 0.2, 0.15, 0.25};
    ds.labels = {1, 1, 0, 0};
    ds.train_idx = {0, 1, 2, 3};
    LogitsFn strong = binary_classifier(w, -40.0);  // threshold at sum = 1
    const SeededRng rng(1);
    CHECK(error_rate(strong, ds, ds.train_idx, 0.02, AttackConfig::pgd(0.02, 10, true), rng) == 0.0);

    // Delta 0 equals one minus clean accuracy.
    Tensor w2 = Tensor::from({2, 1}, {1.0, 0.0});
    LogitsFn half = binary_classifier(w2, -0.5);  // classifies by first coordinate
    Dataset ds2 = ds;
    ds2.labels = {1, 0, 0, 0};  // sample 1 (x0 = 0.75) now mislabeled on purpose
    CHECK(error_rate(half, ds2, ds2.train_idx, 0.0, {}, rng) == doctest::Approx(0.25));

    // Exact value via corner enumeration on 8 samples in 3 dims.
    SeededRng gen(66);
    Tensor w3 = Tensor::randn({3, 1}, gen);
    const double bias = -0.5 * (w3.data()[0] + w3.data()[1] + w3.data()[2]);
    Dataset ds3 = interior_points(8, 3, 67, 0.25, 0.75);
    {
        // label by the model's own clean sign so the clean error is 0
        std::vector<int> ignore;
        Tensor x = make_batch(ds3, ds3.train_idx, 0, 8, ignore);
        Tensor z = add(matmul(x, w3), Tensor::from({1}, {bias}));
        for (int i = 0; i < 8; ++i) ds3.labels[i] = z.data()[i] > 0.0 ? 1 : 0;
    }
    const double delta = 0.15;
    testutil::CornerOracle oracle{{w3.data().begin(), w3.data().end()}, bias};
    std::size_t broken = 0;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> x(ds3.inputs.begin() + i * 3, ds3.inputs.begin() + (i + 1) * 3);
        const double zmin = oracle.min_logit(x, delta);
        const double zmax = oracle.best_over_corners(
            x, delta, [&](const std::vector<double>& c) { return oracle.logit(c); }, -1e300);
        if (ds3.labels[i] == 1 ? zmin <= 0.0 : zmax > 0.0) ++broken;
    }
    const double expect = static_cast<double>(broken) / 8.0;
    const double got =
        error_rate(binary_classifier(w3, bias), ds3, ds3.train_idx, delta,
                   AttackConfig::pgd(delta, 10, false), rng);
    CHECK(got == doctest::Approx(expect));
}

TEST_CASE("importance ratios") {
    // Bank of three 4-wide extractors; merger blocks with |sums| 2, 3, 5.
    BankManifest bank;
    for (int i = 0; i < 3; ++i) {
        auto c = std::make_shared<ExtractorCheckpoint>();
        c->net = init_extractor(70 + i, 6, 4, 5);
        SeededRng rng(80 + i);
        c->head = init_head(rng, 4, 2);
        bank.entries.push_back({c, 0.1 * (i + 1), {}, ""});
    }
    bank.mask = {1, 1, 1};
    Merger m = init_merger(bank);
    m.weight.data()[0 * 2 + 0] = -2.0;  // block 0
    m.weight.data()[4 * 2 + 1] = 3.0;   // block 1
    m.weight.data()[8 * 2 + 0] = 2.5;   // block 2
    m.weight.data()[9 * 2 + 1] = -2.5;
    auto r = importance_ratios(m, bank);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::fabs(r[0] + r[1] + r[2] - 1.0) <= 1e-12);

    // invariance under positive rescaling
    for (auto& v : m.weight.data()) v *= 7.3;
    auto r2 = importance_ratios(m, bank);
    for (int i = 0; i < 3; ++i) CHECK(r2[i] == doctest::Approx(r[i]).epsilon(1e-12));

    // one-hot block
    Merger hot = init_merger(bank);
    hot.weight.data()[5 * 2] = 4.0;
    auto r3 = importance_ratios(hot, bank);
    CHECK(r3[0] == 0.0);
    CHECK(r3[1] == 1.0);
    CHECK(r3[2] == 0.0);

    Merger zero = init_merger(bank);
    CHECK_THROWS_AS(importance_ratios(zero, bank), Error);
}

TEST_CASE("robustness curve starts at clean accuracy and never increases") {
    Tensor w = Tensor::from({2, 1}, {6.0, 6.0});
    LogitsFn model = binary_classifier(w, -6.0);
    Dataset ds = interior_points(40, 2, 68, 0.1, 0.9);
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        const double s = ds.inputs[i * 2] + ds.inputs[i * 2 + 1];
        ds.labels[i] = s > 1.0 ? 1 : 0;
    }
    const SeededRng rng(2);
    auto curve = robustness_curve(model, ds, ds.train_idx, {0.0, 0.05, 0.1, 0.2}, 10, rng);
    REQUIRE(curve.size() == 4);
    CHECK(curve[0].accuracy == clean_accuracy(model, ds, ds.train_idx));
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].accuracy <= curve[i - 1].accuracy);

    auto just_clean = robustness_curve(model, ds, ds.train_idx, {0.0}, 10, rng);
    CHECK(just_clean[0].accuracy == clean_accuracy(model, ds, ds.train_idx));

    CHECK_THROWS_AS(robustness_curve(model, ds, ds.train_idx, {0.1, 0.05}, 10, rng), Error);
}

TEST_CASE("tradeoff reproduces the reported means") {
    CHECK(std::fabs(tradeoff(90.93, 53.05) - 71.99) < 1e-9);
    const double t = tradeoff(60.43, 29.34);
    CHECK(t == doctest::Approx(44.885).epsilon(1e-12));
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    CHECK(std::string(buf) == "44.88");  // 2-decimal reporting
    CHECK(tradeoff(0.0, 0.0) == 0.0);
    CHECK_THROWS_AS(tradeoff(-1.0, 50.0), Error);
    CHECK_THROWS_AS(tradeoff(50.0, 101.0), Error);
}

TEST_CASE("weight histogram") {
    Tensor zeros = Tensor::zeros({4, 4});
    WeightHistogram hz = weight_histogram(zeros);
    std::size_t occupied = 0, total = 0;
    for (const auto& b : hz.bins) {
        if (b.count) ++occupied;
        total += b.count;
    }
    CHECK(occupied == 1);
    CHECK(total == 16);

    SeededRng rng(69);
    Tensor m = Tensor::randn({8, 8}, rng);
    WeightHistogram h = weight_histogram(m);
    CHECK(h.bins.size() == 101);
    std::size_t sum = 0;
    for (const auto& b : h.bins) sum += b.count;
    CHECK(sum == 64);

    // A sparse spiky matrix is heavier-tailed than a dense uniform one.
    Tensor spiky = Tensor::zeros({10, 10});
    spiky.data()[3] = 5.0;
    spiky.data()[47] = -5.0;
    Tensor flat = Tensor::uniform({10, 10}, rng, -1.0, 1.0);
    CHECK(weight_histogram(spiky).excess_kurtosis > weight_histogram(flat).excess_kurtosis);
    CHECK(weight_histogram(spiky).sparsity > weight_histogram(flat).sparsity);
}
