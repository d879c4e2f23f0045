// tabrep: cross-validated benchmark of deep tabular representations
// (SSAE / DBN / VAE / AAE) against original features for regression.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>

#include <CLI11.hpp>

#include "tabrep/harness.hpp"

namespace {

using namespace tabrep;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

harness::ExperimentConfig load_effective_config(const CommonArgs& args) {
    auto cfg = harness::load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    if (with_out) cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)")->each([&](const std::string&) {
        args.seed_set = true;
    });
}

int cmd_prep(const CommonArgs& args) {
    const auto cfg = load_effective_config(args);
    const auto ds = dataio::load_csv(cfg.dataset.path, cfg.schema());
    if (ds.n() == 0) throw DataError("prep: dataset has no rows");

    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    auto processed = preprocess::apply_impute(ds, preprocess::fit_impute(ds, all));
    processed = preprocess::apply_clip(processed, preprocess::fit_clip(processed, all, cfg.zmax));

    std::filesystem::create_directories(cfg.output_dir);
    dataio::save_csv(processed, cfg.output_dir + "/processed.csv");
    const auto plan = preprocess::make_folds(
        ds.n(), cfg.folds, numkit::RngStream(cfg.seed).derive("folds").seed());
    preprocess::save_fold_manifest(plan, cfg.output_dir + "/folds.txt");
    std::cout << "prep: wrote " << cfg.output_dir << "/processed.csv and folds.txt (" << ds.n() << " rows, "
              << cfg.folds << " folds)\n";
    return 0;
}

int cmd_train_encoder(const CommonArgs& args, const std::string& kind_name) {
    const auto cfg = load_effective_config(args);
    const auto kind = encoders::kind_from_name(kind_name);
    const std::vector<encoders::EncoderConfig>* grid = nullptr;
    for (const auto& [k, g] : cfg.encoder_grids)
        if (k == kind) grid = &g;
    if (!grid)
        throw ParamError("train-encoder: config has no grid for encoder '" + kind_name + "'");

    const auto ds = dataio::load_csv(cfg.dataset.path, cfg.schema());
    if (ds.n() < 10) throw DataError("train-encoder: need at least 10 rows");

    // whole-data pipeline: impute, clip, embed, standardize
    std::vector<std::size_t> all(ds.n());
    std::iota(all.begin(), all.end(), 0);
    auto processed = preprocess::apply_impute(ds, preprocess::fit_impute(ds, all));
    processed = preprocess::apply_clip(processed, preprocess::fit_clip(processed, all, cfg.zmax));
    numkit::Matrix design;
    if (processed.categorical_cols() > 0) {
        embed::GloveConfig gcfg = cfg.glove;
        gcfg.seed = numkit::RngStream(cfg.seed).derive("glove").seed();
        const auto table = embed::train_glove(embed::build_cooccurrence(processed), cfg.embed_dim, gcfg);
        design = embed::embed_dataset(processed, table);
    } else {
        design = processed.numeric;
    }
    design = preprocess::apply_standardize(design, preprocess::fit_standardize(design, all));

    // hold out 10% for early stopping and candidate selection
    std::vector<std::size_t> order(ds.n());
    std::iota(order.begin(), order.end(), 0);
    numkit::RngStream shuffle_rng = numkit::RngStream(cfg.seed).derive("holdout");
    shuffle_rng.shuffle(order);
    const std::size_t val_n = std::max<std::size_t>(1, ds.n() / 10);
    const std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_n));
    const std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(val_n), order.end());
    const numkit::Matrix x_train = numkit::take_rows(design, train_rows);
    const numkit::Matrix x_val = numkit::take_rows(design, val_rows);

    std::optional<encoders::EncoderModel> best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t ci = 0; ci < grid->size(); ++ci) {
        encoders::EncoderConfig cand = (*grid)[ci];
        cand.seed = numkit::RngStream(cfg.seed).derive("train-encoder").derive(ci).seed();
        auto model = encoders::train_encoder(kind, x_train, x_val, cand);
        const double loss = encoders::validation_recon_loss(model, x_val);
        std::cout << "candidate " << ci << ": validation reconstruction loss " << loss << "\n";
        if (loss < best_loss) {
            best_loss = loss;
            best = std::move(model);
        }
    }

    std::filesystem::create_directories(cfg.output_dir);
    const std::string model_path = cfg.output_dir + "/model_" + std::string(encoders::kind_name(kind)) + ".bin";
    dataio::save_model(*best, model_path);
    encoders::write_history_csv(best->history,
                                cfg.output_dir + "/loss_" + std::string(encoders::kind_name(kind)) + ".csv");
    std::cout << "train-encoder: saved " << model_path << " (validation loss " << best_loss << ", "
              << best->history.epochs() << " epochs)\n";
    return 0;
}

int cmd_run(const CommonArgs& args, bool paper_faithful, bool audit) {
    const auto cfg = load_effective_config(args);
    harness::RunOptions opt;
    opt.paper_faithful = paper_faithful;
    opt.audit = audit;
    const auto report = harness::run_experiment(cfg, opt);
    harness::write_report_files(report, cfg.echo(), cfg.output_dir);
    std::cout << harness::format_report(report);
    std::cout << "\nwrote " << cfg.output_dir << "/report.{txt,csv}, loss_curves/ ("
              << report.cells_attempted << " cells attempted, " << report.wall_seconds << " s)\n";
    if (audit) std::cout << "leakage audit: passed\n";
    return 0;
}

int cmd_report(const std::string& in_path) {
    std::cout << harness::format_report(harness::read_report_csv(in_path));
    return 0;
}

int classify(const std::exception& e) {
    if (dynamic_cast<const ParamError*>(&e) || dynamic_cast<const SchemaError*>(&e)) return 2;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DataError*>(&e) ||
        dynamic_cast<const FormatError*>(&e))
        return 3;
    if (dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const LeakageError*>(&e)) return 4;
    if (dynamic_cast<const IoError*>(&e)) return 5;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabrep: benchmark deep tabular representations against original features"};
    app.require_subcommand(1);

    CommonArgs prep_args;
    auto* prep = app.add_subcommand("prep", "impute and clip the dataset, write the fold manifest");
    add_common(prep, prep_args);

    CommonArgs train_args;
    std::string kind;
    auto* train = app.add_subcommand("train-encoder", "train one encoder on the full dataset and save it");
    add_common(train, train_args);
    train->add_option("--kind", kind, "encoder kind: ssae | dbn | vae | aae")->required();

    CommonArgs run_args;
    bool paper_faithful = false, audit = false;
    auto* run = app.add_subcommand("run", "run the cross-validated experiment grid");
    add_common(run, run_args);
    run->add_flag("--paper-faithful", paper_faithful, "fit the embedding on all rows (leaks folds, as published)");
    run->add_flag("--audit-leakage", audit, "verify fitted statistics are independent of test rows");

    std::string report_in;
    auto* report = app.add_subcommand("report", "re-render the text table from a report.csv");
    report->add_option("--in", report_in, "path to report.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) return cmd_prep(prep_args);
        if (train->parsed()) return cmd_train_encoder(train_args, kind);
        if (run->parsed()) return cmd_run(run_args, paper_faithful, audit);
        if (report->parsed()) return cmd_report(report_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return 0;
}
