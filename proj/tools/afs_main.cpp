// afs - adversarial feature stacking toolkit.
//
// Two-stage workflow: train-bank fits extractors at spaced budgets, select
// filters them by logit-deviation concavity, train-merger fits the linear
// merger over the frozen bank, evaluate/report measure the results. Training
// extractors and the merger never happens in one invocation.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>

#include "afs/analysis.hpp"
#include "afs/checkpoint.hpp"
#include "afs/config.hpp"
#include "afs/csv.hpp"
#include "afs/error.hpp"
#include "afs/report.hpp"
#include "afs/train.hpp"

namespace fs = std::filesystem;
using namespace afs;

namespace {

struct CommonArgs {
    std::string config;
    std::string dir = "out";
};

double parse_budget_flag(const std::string& text) {
    return Config::parse_fraction(text, "--budget");
}

std::vector<double> parse_budget_list(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(Config::parse_fraction(item, "--budgets"));
    if (out.empty()) fail_usage("--budgets: empty list");
    return out;
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

int run_train_extractor(const CommonArgs& args, const std::string& budget_flag,
                        const std::string& out_file) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    TrainConfig cfg = ec.train;
    cfg.budget = budget_flag.empty() ? (ec.budgets.empty() ? 0.0 : ec.budgets.front())
                                     : parse_budget_flag(budget_flag);
    cfg.seed = SeededRng(ec.seed).fork("extractor").seed();
    cfg.progress = &std::cout;
    ExtractorCheckpoint ckpt = train_extractor(cfg, ds);
    const auto parent = fs::path(out_file).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    save_extractor(ckpt, out_file);
    std::cout << "wrote " << out_file << " (budget " << fmt6(cfg.budget) << ", robust-val "
              << fmt6(ckpt.metrics.pgd10) << ")\n";
    return 0;
}

int run_train_bank(const CommonArgs& args) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    BankSpec spec;
    spec.budgets = ec.budgets;
    spec.base = ec.train;
    spec.jobs = ec.jobs;
    spec.base.progress = &std::cout;
    BankManifest bank = train_bank(spec, ds);
    save_bank(bank, args.dir);
    write_file_atomic(args.dir + "/bank_table.csv", bank_table_csv(bank));
    std::cout << "wrote " << args.dir << "/bank.manifest (" << bank.entries.size()
              << " extractors) and bank_table.csv\n";
    return 0;
}

int run_select(const CommonArgs& args) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    BankManifest bank = load_bank(args.dir);
    const auto idx = ec.eval_indices(ds);
    const double delta = ec.train.eval_budget;

    DeltaZTable table = delta_z_table(bank, ds, idx, delta);
    write_file_atomic(args.dir + "/deltaz.csv", deltaz_csv(table));

    SelectionResult sel = concavity_select(table);
    if (!sel.ok) {
        std::cout << "deltaz.csv written; selection degenerate: " << sel.note << "\n";
        fail_numeric("select: " + sel.note);
    }
    for (std::size_t i = 0; i < bank.entries.size(); ++i)
        bank.mask[i] = i >= sel.start ? 1 : 0;
    write_bank_manifest(bank, args.dir);
    std::cout << "selected budgets";
    for (double b : sel.selected_budgets) std::cout << ' ' << fmt6(b);
    std::cout << " -> mask " << bank.mask_string() << "\n";
    return 0;
}

int run_train_merger(const CommonArgs& args, const std::string& alpha_flag,
                     const std::string& mask_flag, std::string name) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    BankManifest bank = load_bank(args.dir);
    if (!mask_flag.empty()) bank.set_mask_string(mask_flag);

    MergerTrainConfig cfg = ec.merger;
    if (!alpha_flag.empty()) cfg.alpha = Config::parse_fraction(alpha_flag, "--alpha");
    cfg.progress = &std::cout;
    Merger merger = train_merger(bank, cfg, ds);

    if (name.empty()) name = "merger_a" + fmt6(cfg.alpha) + ".afsc";
    save_merger(merger, bank.mask_string(), args.dir + "/" + name);
    std::cout << "wrote " << args.dir << "/" << name << " (alpha " << fmt6(cfg.alpha) << ", mask "
              << bank.mask_string() << ")\n";
    return 0;
}

int run_evaluate(const CommonArgs& args, const std::string& ckpt_file,
                 const std::string& stack_file, int pgd_steps, const std::string& budget_flag,
                 const std::string& budgets_flag, std::string out_csv) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    const auto idx = ec.eval_indices(ds);

    if (ckpt_file.empty() == stack_file.empty())
        fail_usage("evaluate: pass exactly one of --ckpt or --stack");

    // Keep loaded models alive for the duration of the evaluation.
    ExtractorCheckpoint single;
    BankManifest bank;
    Merger merger;
    LogitsFn model;
    std::string model_id;
    if (!ckpt_file.empty()) {
        single = load_extractor(ckpt_file);
        model = single_logits(&single.net, &single.head);
        model_id = file_stem(ckpt_file);
    } else {
        bank = load_bank(args.dir);
        auto [m, mask] = load_merger(stack_file);
        merger = std::move(m);
        bank.set_mask_string(mask);
        model = stacked_logits(&bank, &merger);
        model_id = file_stem(stack_file);
    }

    std::vector<double> budgets;
    if (!budgets_flag.empty()) {
        budgets = parse_budget_list(budgets_flag);
    } else {
        budgets = {budget_flag.empty() ? ec.train.eval_budget : parse_budget_flag(budget_flag)};
    }
    std::sort(budgets.begin(), budgets.end());
    budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
    if (budgets.empty() || budgets.front() != 0.0) budgets.insert(budgets.begin(), 0.0);

    const SeededRng rng = SeededRng(ec.seed).fork("eval");
    const auto curve = robustness_curve(model, ds, idx, budgets, pgd_steps, rng);

    std::vector<CurveRow> rows;
    for (const auto& p : curve) rows.push_back({p.budget, p.accuracy, model_id});
    if (out_csv.empty()) out_csv = args.dir + "/curve.csv";
    write_file_atomic(out_csv, curve_csv(rows));

    const double clean = curve.front().accuracy;
    const double robust = curve.back().accuracy;
    std::cout << "model " << model_id << ": clean " << fmt6(clean) << ", pgd-" << pgd_steps << " @ "
              << fmt6(curve.back().budget) << " -> " << fmt6(robust) << ", tradeoff "
              << fmt6(tradeoff(clean, robust)) << "\n";
    std::cout << "wrote " << out_csv << "\n";
    return 0;
}

int run_report(const CommonArgs& args, const std::string& mask_flag) {
    ExperimentConfig ec = ExperimentConfig::from_file(args.config);
    Dataset ds = ec.load_dataset();
    BankManifest bank = load_bank(args.dir);
    if (!mask_flag.empty()) bank.set_mask_string(mask_flag);
    const auto idx = ec.eval_indices(ds);
    const double eval_budget = ec.train.eval_budget;
    const SeededRng rng = SeededRng(ec.seed).fork("report-eval");

    write_file_atomic(args.dir + "/bank_table.csv", bank_table_csv(bank));

    DeltaZTable table = delta_z_table(bank, ds, idx, eval_budget);
    write_file_atomic(args.dir + "/deltaz.csv", deltaz_csv(table));

    // Every merger checkpoint in the directory joins the sweep, in name order.
    std::vector<std::string> merger_files;
    for (const auto& entry : fs::directory_iterator(args.dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("merger", 0) == 0 && entry.path().extension() == ".afsc")
            merger_files.push_back(entry.path().string());
    }
    std::sort(merger_files.begin(), merger_files.end());

    const auto curve_budgets = ec.effective_curve_budgets();
    std::vector<AlphaSweepRow> sweep;
    std::vector<CurveRow> curves;
    std::vector<RatioRow> ratios;
    std::vector<TradeoffRow> tradeoffs;

    for (auto sel : bank.selected()) {
        const auto& e = bank.entries[sel];
        LogitsFn model = single_logits(&e.ckpt->net, &e.ckpt->head);
        const std::string id = "extractor_" + std::to_string(sel);
        for (const auto& p : robustness_curve(model, ds, idx, curve_budgets, 20, rng.fork(sel)))
            curves.push_back({p.budget, p.accuracy, id});
        tradeoffs.push_back({id, e.metrics.clean, e.metrics.pgd20});
        const WeightHistogram hh = weight_histogram(e.ckpt->head.weight);
        write_file_atomic(args.dir + "/histogram_head_" + std::to_string(sel) + ".csv",
                          histogram_csv(hh));
    }

    bool first_merger = true;
    for (const auto& file : merger_files) {
        auto [merger, mask] = load_merger(file);
        BankManifest stacked = bank;
        stacked.set_mask_string(mask);
        LogitsFn model = stacked_logits(&stacked, &merger);
        const std::string id = file_stem(file);

        const double clean = clean_accuracy(model, ds, idx);
        const double pgd10 =
            robust_accuracy(model, ds, idx, AttackConfig::pgd(eval_budget, 10, true), rng);
        const double pgd20 =
            robust_accuracy(model, ds, idx, AttackConfig::pgd(eval_budget, 20, true), rng);
        sweep.push_back({merger.alpha, clean, pgd10, pgd20});
        tradeoffs.push_back({id, clean, pgd20});

        const auto sel = stacked.selected();
        const auto r = importance_ratios(merger, stacked);
        for (std::size_t k = 0; k < sel.size(); ++k) ratios.push_back({sel[k], r[k], merger.alpha});

        for (const auto& p : robustness_curve(model, ds, idx, curve_budgets, 20, rng.fork(1000)))
            curves.push_back({p.budget, p.accuracy, id});

        const WeightHistogram h = weight_histogram(merger.weight);
        write_file_atomic(args.dir + "/histogram_" + id + ".csv", histogram_csv(h));
        if (first_merger) {
            write_file_atomic(args.dir + "/histogram.csv", histogram_csv(h));
            first_merger = false;
        }
    }

    if (!sweep.empty()) write_file_atomic(args.dir + "/alpha_sweep.csv", alpha_sweep_csv(sweep));
    if (!ratios.empty()) write_file_atomic(args.dir + "/ratios.csv", ratios_csv(ratios));
    write_file_atomic(args.dir + "/curve.csv", curve_csv(curves));
    write_file_atomic(args.dir + "/tradeoff.csv", tradeoff_csv(tradeoffs));
    std::cout << "report written to " << args.dir << " (" << merger_files.size() << " mergers, "
              << bank.selected().size() << " selected extractors)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial feature stacking toolkit"};
    app.require_subcommand(1);

    CommonArgs common;

    auto add_common = [&](CLI::App* sub, bool needs_dir = true) {
        sub->add_option("--config", common.config, "experiment config file")->required();
        if (needs_dir) sub->add_option("--dir", common.dir, "artifact directory");
    };

    std::string budget_flag, out_file = "extractor.afsc";
    auto* cmd_te = app.add_subcommand("train-extractor", "adversarially train one extractor");
    add_common(cmd_te, false);
    cmd_te->add_option("--budget", budget_flag, "training budget (fractions like 8/255 allowed)");
    cmd_te->add_option("--out", out_file, "output checkpoint path");

    auto* cmd_tb = app.add_subcommand("train-bank", "train the budget-spaced extractor bank");
    add_common(cmd_tb);

    auto* cmd_se = app.add_subcommand("select", "measure delta_z and apply the concavity standard");
    add_common(cmd_se);

    std::string alpha_flag, mask_flag, merger_name;
    auto* cmd_tm = app.add_subcommand("train-merger", "train the linear merger over the frozen bank");
    add_common(cmd_tm);
    cmd_tm->add_option("--alpha", alpha_flag, "clean/adversarial mixing ratio in [0,1]");
    cmd_tm->add_option("--mask", mask_flag, "binary inclusion mask, e.g. 01111");
    cmd_tm->add_option("--name", merger_name, "output checkpoint name");

    std::string ckpt_file, stack_file, eval_budget_flag, budgets_flag, eval_out;
    int pgd_steps = 20;
    auto* cmd_ev = app.add_subcommand("evaluate", "clean and robust accuracy of a model");
    add_common(cmd_ev);
    cmd_ev->add_option("--ckpt", ckpt_file, "extractor checkpoint to evaluate");
    cmd_ev->add_option("--stack", stack_file, "merger checkpoint to evaluate (with the bank in --dir)");
    cmd_ev->add_option("--pgd-steps", pgd_steps, "attack iterations");
    cmd_ev->add_option("--budget", eval_budget_flag, "single evaluation budget");
    cmd_ev->add_option("--budgets", budgets_flag, "comma list of budgets for a curve");
    cmd_ev->add_option("--out", eval_out, "output CSV path");

    std::string report_mask;
    auto* cmd_re = app.add_subcommand("report", "aggregate tables, curves, ratios, histograms");
    add_common(cmd_re);
    cmd_re->add_option("--mask", report_mask, "override the manifest mask");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage errors exit 1
    }

    try {
        if (app.got_subcommand(cmd_te)) return run_train_extractor(common, budget_flag, out_file);
        if (app.got_subcommand(cmd_tb)) return run_train_bank(common);
        if (app.got_subcommand(cmd_se)) return run_select(common);
        if (app.got_subcommand(cmd_tm))
            return run_train_merger(common, alpha_flag, mask_flag, merger_name);
        if (app.got_subcommand(cmd_ev))
            return run_evaluate(common, ckpt_file, stack_file, pgd_steps, eval_budget_flag,
                                budgets_flag, eval_out);
        if (app.got_subcommand(cmd_re)) return run_report(common, report_mask);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorCode::numeric);
    }
    return 1;
}
