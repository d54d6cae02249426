#include "afs/config.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "afs/csv.hpp"
#include "afs/error.hpp"

namespace afs {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    return parse_string(read_file(path), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            fail_data(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            fail_data(origin + ":" + std::to_string(line_no) + ": empty key");
        cfg.kv_.emplace_back(key, value);
    }
    return cfg;
}

const std::string* Config::find(const std::string& key) const {
    const std::string* hit = nullptr;
    for (const auto& [k, v] : kv_)
        if (k == key) hit = &v;  // later assignments win
    return hit;
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

std::string Config::get_str(const std::string& key) const {
    const auto* v = find(key);
    if (!v) fail_data(origin_ + ": missing key '" + key + "'");
    return *v;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
}

double Config::parse_fraction(const std::string& text, const std::string& context) {
    const std::string t = trim(text);
    try {
        if (const auto slash = t.find('/'); slash != std::string::npos) {
            std::size_t used = 0;
            const double num = std::stod(t.substr(0, slash), &used);
            const double den = std::stod(t.substr(slash + 1));
            if (den == 0.0) fail_data(context + ": division by zero in '" + t + "'");
            return num / den;
        }
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        fail_data(context + ": '" + t + "' is not a number (fractions like 8/255 are allowed)");
    }
}

double Config::get_num(const std::string& key) const {
    return parse_fraction(get_str(key), origin_ + ": key '" + key + "'");
}

double Config::get_num(const std::string& key, double fallback) const {
    const auto* v = find(key);
    return v ? parse_fraction(*v, origin_ + ": key '" + key + "'") : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const long long n = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument(*v);
        return n;
    } catch (const std::exception&) {
        fail_data(origin_ + ": key '" + key + "': '" + *v + "' is not an integer");
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        fail_data(origin_ + ": key '" + key + "': '" + *v + "' is not an unsigned integer");
    }
}

std::vector<double> Config::get_num_list(const std::string& key) const {
    const std::string text = get_str(key);
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(parse_fraction(t, origin_ + ": key '" + key + "'"));
    }
    if (out.empty()) fail_data(origin_ + ": key '" + key + "' has no values");
    return out;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
    for (const auto& [k, v] : kv_) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            fail_usage(origin_ + ": unknown key '" + k + "'");
    }
}

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kKnownKeys = {
    "dataset", "n", "margin", "idx.images", "idx.labels", "idx.limit",
    "val_fraction", "test_fraction",
    "budgets", "epochs", "batch_size", "lr", "lr_decay", "momentum", "hidden", "feature_dim",
    "budget_mode", "budget_lo", "budget_hi", "attack.steps",
    "eval.budget", "eval.steps", "jobs",
    "alpha", "merger.epochs", "merger.lr", "merger.momentum", "merger.budget", "merger.steps",
    "eval.subset", "curve.budgets", "seed",
};

}  // namespace

ExperimentConfig ExperimentConfig::from(const Config& cfg) {
    cfg.require_known(kKnownKeys);
    ExperimentConfig ec;
    ec.dataset = cfg.get_str("dataset", ec.dataset);
    ec.n = cfg.get_int("n", ec.n);
    ec.margin = cfg.get_num("margin", ec.margin);
    ec.idx_images = cfg.get_str("idx.images", "");
    ec.idx_labels = cfg.get_str("idx.labels", "");
    ec.idx_limit = cfg.get_int("idx.limit", 0);
    ec.val_fraction = cfg.get_num("val_fraction", ec.val_fraction);
    ec.test_fraction = cfg.get_num("test_fraction", ec.test_fraction);

    if (cfg.has("budgets")) ec.budgets = cfg.get_num_list("budgets");
    ec.train.epochs = static_cast<int>(cfg.get_int("epochs", 10));
    ec.train.batch_size = static_cast<int>(cfg.get_int("batch_size", 64));
    ec.train.lr = cfg.get_num("lr", 0.1);
    if (cfg.has("lr_decay")) {
        // "epoch:factor" pairs, e.g. "9:0.1, 12:0.5"; "none" keeps lr constant.
        std::map<int, double> decay;
        const std::string text = cfg.get_str("lr_decay");
        if (text != "none") {
            std::istringstream in(text);
            std::string item;
            while (std::getline(in, item, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    fail_data("lr_decay: expected epoch:factor pairs, got '" + item + "'");
                try {
                    decay[std::stoi(item.substr(0, colon))] =
                        Config::parse_fraction(item.substr(colon + 1), "lr_decay");
                } catch (const Error&) {
                    throw;
                } catch (const std::exception&) {
                    fail_data("lr_decay: malformed pair '" + item + "'");
                }
            }
        }
        ec.train.lr_decay = std::move(decay);
    }
    ec.train.momentum = cfg.get_num("momentum", 0.9);
    ec.train.hidden = cfg.get_int("hidden", 256);
    ec.train.feature_dim = cfg.get_int("feature_dim", 64);
    const std::string mode = cfg.get_str("budget_mode", "fixed");
    if (mode == "fixed") {
        ec.train.budget_mode = BudgetMode::fixed;
    } else if (mode == "uniform-random") {
        ec.train.budget_mode = BudgetMode::uniform_random;
        ec.train.budget_lo = cfg.get_num("budget_lo", 0.0);
        ec.train.budget_hi = cfg.get_num("budget_hi", 0.0);
    } else {
        fail_usage("budget_mode must be 'fixed' or 'uniform-random', got '" + mode + "'");
    }
    ec.train.attack_steps = static_cast<int>(cfg.get_int("attack.steps", 10));
    ec.train.eval_budget = cfg.get_num("eval.budget", 0.0);
    ec.train.eval_steps = static_cast<int>(cfg.get_int("eval.steps", 10));
    ec.jobs = static_cast<int>(cfg.get_int("jobs", 1));

    ec.merger.alpha = cfg.get_num("alpha", 0.5);
    ec.merger.epochs = static_cast<int>(cfg.get_int("merger.epochs", 5));
    ec.merger.lr = cfg.get_num("merger.lr", 0.01);
    ec.merger.momentum = cfg.get_num("merger.momentum", 0.9);
    ec.merger.budget = cfg.get_num("merger.budget", ec.train.eval_budget);
    ec.merger.attack_steps = static_cast<int>(cfg.get_int("merger.steps", 10));
    ec.merger.batch_size = ec.train.batch_size;

    ec.eval_subset = static_cast<int>(cfg.get_int("eval.subset", 512));
    if (cfg.has("curve.budgets")) ec.curve_budgets = cfg.get_num_list("curve.budgets");
    ec.seed = cfg.get_u64("seed", 42);

    // Derived per-component seeds: adding a component never shifts another's
    // stream because each forks from the root by name.
    ec.train.seed = SeededRng(ec.seed).fork("bank").seed();
    ec.merger.seed = SeededRng(ec.seed).fork("merger").seed();
    return ec;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from(Config::parse_file(path));
}

Dataset ExperimentConfig::load_dataset() const {
    Dataset ds;
    const std::uint64_t data_seed = SeededRng(seed).fork("data").seed();
    if (dataset == "idx") {
        if (idx_images.empty() || idx_labels.empty())
            fail_usage("dataset = idx requires idx.images and idx.labels");
        ds = load_idx(idx_images, idx_labels, idx_limit);
    } else {
        ds = gen_synthetic(synthetic_kind_from(dataset), n, data_seed, margin);
    }
    assign_splits(ds, val_fraction, test_fraction, SeededRng(seed).fork("splits").seed());
    return ds;
}

std::vector<std::int32_t> ExperimentConfig::eval_indices(const Dataset& ds) const {
    const auto& base = ds.test_idx.empty() ? ds.val_idx : ds.test_idx;
    if (base.empty()) fail_data("no held-out split available for evaluation");
    std::vector<std::int32_t> idx = base;
    if (eval_subset > 0 && idx.size() > static_cast<std::size_t>(eval_subset))
        idx.resize(static_cast<std::size_t>(eval_subset));
    return idx;
}

std::vector<double> ExperimentConfig::effective_curve_budgets() const {
    if (!curve_budgets.empty()) return curve_budgets;
    const double e = train.eval_budget > 0.0 ? train.eval_budget : 0.2;
    return {0.0, e / 2.0, e, 1.5 * e};
}

}  // namespace afs
