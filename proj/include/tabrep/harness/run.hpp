#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tabrep/harness/config.hpp"
#include "tabrep/preprocess.hpp"
#include "tabrep/synth.hpp"

namespace tabrep::harness {

struct RunOptions {
    bool paper_faithful = false; // fit the embedding on all rows (leaks folds, as published)
    bool audit = false;          // verify no fitted statistic depends on test rows
};

struct FoldOutcome {
    double test_rmse = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string reason;
    std::string encoder_params = "-";
    std::string learner_params = "-";
};

struct ReportCell {
    std::string representation;
    std::string learner;
    std::vector<FoldOutcome> folds;
    double mean_rmse = std::numeric_limits<double>::quiet_NaN();
    double sd_rmse = std::numeric_limits<double>::quiet_NaN();
    std::size_t folds_used = 0;

    bool any_ok() const { return folds_used > 0; }

    void aggregate() {
        folds_used = 0;
        double sum = 0.0;
        for (const auto& f : folds)
            if (f.ok) {
                sum += f.test_rmse;
                ++folds_used;
            }
        if (folds_used == 0) return;
        mean_rmse = sum / static_cast<double>(folds_used);
        double ss = 0.0;
        for (const auto& f : folds)
            if (f.ok) ss += (f.test_rmse - mean_rmse) * (f.test_rmse - mean_rmse);
        sd_rmse = std::sqrt(ss / static_cast<double>(folds_used)); // population sd over folds
    }
};

struct ExperimentReport {
    std::vector<std::string> representations; // row order: encoders then Original
    std::vector<std::string> learners;        // column order: RF, Lasso, SVM
    std::vector<ReportCell> cells;            // row-major
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::pair<std::string, encoders::TrainingHistory>> histories; // "<KIND>_fold<k>"
    std::size_t cells_attempted = 0;
    double wall_seconds = 0.0; // timing metadata; excluded from the serialized report

    const ReportCell& cell(const std::string& rep, const std::string& learner) const {
        for (const auto& c : cells)
            if (c.representation == rep && c.learner == learner) return c;
        throw ParamError("report: no cell (" + rep + ", " + learner + ")");
    }
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& label, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
    return numkit::RngStream(master).derive(label).derive(a).derive(b).seed();
}

struct Digest {
    std::uint64_t h = 0xCBF29CE484222325ULL;

    void add_bytes(const void* p, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ULL;
        }
    }
    void add(double v) { add_bytes(&v, sizeof v); }
    void add(std::uint64_t v) { add_bytes(&v, sizeof v); }
    void add(const std::vector<double>& v) { add_bytes(v.data(), v.size() * sizeof(double)); }
    void add(const numkit::Matrix& m) { add_bytes(m.data().data(), m.size() * sizeof(double)); }
    void add(const neural::MlpNetwork& net) {
        for (const auto& l : net.layers) {
            add(l.weights);
            add(l.bias);
        }
    }
    void add(const encoders::EncoderModel& m) {
        add(m.encoder);
        add(m.decoder);
        for (const auto& r : m.rbms) {
            add(r.weights);
            add(r.visible_bias);
            add(r.hidden_bias);
        }
    }
};

struct RepSlices {
    std::string name;
    bool ok = false;
    std::string reason;
    numkit::Matrix train, val, test;
    std::string params = "-";
    encoders::TrainingHistory history;
    bool is_encoder = false;
};

struct FoldComputation {
    std::vector<RepSlices> reps;
    std::vector<std::pair<std::string, std::uint64_t>> digests;
    std::vector<double> y_train, y_val, y_test;
};

inline std::vector<double> take(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

/// All train-fitted artifacts for one fold: preprocessing, embedding,
/// the selected encoder per kind, and the encoded row groups.
inline FoldComputation prepare_fold(const ExperimentConfig& cfg, const RunOptions& opt,
                                    const dataio::TabularDataset& ds, const preprocess::Fold& fold,
                                    std::size_t fold_index) {
    FoldComputation comp;

    const auto imp = preprocess::fit_impute(ds, fold.train);
    {
        Digest d;
        d.add(imp.numeric_median);
        for (int m : imp.categorical_mode) d.add(static_cast<std::uint64_t>(m));
        comp.digests.emplace_back("impute", d.h);
    }
    auto imputed = preprocess::apply_impute(ds, imp);

    const auto clip = preprocess::fit_clip(imputed, fold.train, cfg.zmax);
    {
        Digest d;
        d.add(clip.mean);
        d.add(clip.sd);
        comp.digests.emplace_back("clip", d.h);
    }
    imputed = preprocess::apply_clip(imputed, clip);

    numkit::Matrix design;
    if (imputed.categorical_cols() > 0) {
        std::vector<std::size_t> embed_rows = fold.train;
        if (opt.paper_faithful) {
            embed_rows.resize(ds.n());
            std::iota(embed_rows.begin(), embed_rows.end(), 0);
        }
        const auto cooc = embed::build_cooccurrence(imputed, embed_rows);
        embed::GloveConfig gcfg = cfg.glove;
        gcfg.seed = derive_seed(cfg.seed, "glove", fold_index);
        const auto table = embed::train_glove(cooc, cfg.embed_dim, gcfg);
        {
            Digest d;
            d.add(table.main);
            d.add(table.context);
            d.add(table.bias_main);
            d.add(table.bias_context);
            comp.digests.emplace_back("embedding", d.h);
        }
        design = embed::embed_dataset(imputed, table);
    } else {
        design = imputed.numeric;
    }

    const auto std_stats = preprocess::fit_standardize(design, fold.train);
    {
        Digest d;
        d.add(std_stats.mean);
        d.add(std_stats.sd);
        comp.digests.emplace_back("standardize", d.h);
    }
    const numkit::Matrix standardized = preprocess::apply_standardize(design, std_stats);

    const numkit::Matrix x_train = numkit::take_rows(standardized, fold.train);
    const numkit::Matrix x_val = numkit::take_rows(standardized, fold.validation);
    const numkit::Matrix x_test = numkit::take_rows(standardized, fold.test);
    comp.y_train = take(ds.target, fold.train);
    comp.y_val = take(ds.target, fold.validation);
    comp.y_test = take(ds.target, fold.test);

    for (const auto& [kind, grid] : cfg.encoder_grids) {
        RepSlices rep;
        rep.name = encoders::kind_name(kind);
        rep.is_encoder = true;
        std::optional<encoders::EncoderModel> best;
        double best_loss = std::numeric_limits<double>::infinity();
        std::string best_params = "-";
        std::string last_reason;
        for (std::size_t ci = 0; ci < grid.size(); ++ci) {
            encoders::EncoderConfig cand = grid[ci];
            cand.seed = derive_seed(cfg.seed, std::string("encoder:") + rep.name, fold_index, ci);
            try {
                auto model = encoders::train_encoder(kind, x_train, x_val, cand);
                const double loss = encoders::validation_recon_loss(model, x_val);
                if (loss < best_loss) {
                    best_loss = loss;
                    best = std::move(model);
                    best_params = detail::encoder_config_echo(grid[ci], kind).dump();
                }
            } catch (const DivergenceError& e) {
                last_reason = e.what();
            }
        }
        if (best) {
            rep.ok = true;
            rep.train = encoders::encode(*best, x_train);
            rep.val = encoders::encode(*best, x_val);
            rep.test = encoders::encode(*best, x_test);
            rep.params = best_params;
            rep.history = best->history;
            Digest d;
            d.add(*best);
            comp.digests.emplace_back(std::string("encoder/") + rep.name, d.h);
        } else {
            rep.reason = last_reason.empty() ? "no candidate trained" : last_reason;
        }
        comp.reps.push_back(std::move(rep));
    }

    RepSlices original;
    original.name = "Original";
    original.ok = true;
    original.train = x_train;
    original.val = x_val;
    original.test = x_test;
    original.params = "{}";
    comp.reps.push_back(std::move(original));
    return comp;
}

struct LearnerOutcome {
    double val_rmse = std::numeric_limits<double>::infinity();
    double test_rmse = std::numeric_limits<double>::quiet_NaN();
    std::string params = "-";
    std::uint64_t model_digest = 0;
    bool ok = false;
    std::string reason;
};

inline LearnerOutcome fit_learner_grid(const ExperimentConfig& cfg, LearnerKind kind, const RepSlices& rep,
                                       const std::vector<double>& y_train, const std::vector<double>& y_val,
                                       const std::vector<double>& y_test, std::uint64_t master,
                                       std::size_t fold_index) {
    LearnerOutcome best;
    std::string last_reason;
    auto consider = [&](double val_rmse, double test_rmse, std::string params, std::uint64_t digest) {
        if (!best.ok || val_rmse < best.val_rmse) {
            best.ok = true;
            best.val_rmse = val_rmse;
            best.test_rmse = test_rmse;
            best.params = std::move(params);
            best.model_digest = digest;
        }
    };

    try {
        if (kind == LearnerKind::Rf) {
            for (std::size_t li = 0; li < cfg.rf_grid.size(); ++li) {
                supervised::RfConfig rc = cfg.rf_grid[li];
                rc.seed = derive_seed(master, std::string("learner:rf:") + rep.name, fold_index, li);
                const auto model = supervised::train_random_forest(rep.train, y_train, rc);
                Digest d;
                for (const auto& t : model.trees)
                    for (const auto& nd : t.nodes) {
                        d.add(static_cast<std::uint64_t>(nd.feature));
                        d.add(nd.threshold);
                        d.add(nd.value);
                    }
                json p{{"n_trees", cfg.rf_grid[li].n_trees}, {"m_try", cfg.rf_grid[li].m_try},
                       {"min_leaf", cfg.rf_grid[li].min_leaf}, {"max_depth", cfg.rf_grid[li].max_depth}};
                consider(supervised::rmse(y_val, supervised::predict(model, rep.val)),
                         supervised::rmse(y_test, supervised::predict(model, rep.test)), p.dump(), d.h);
            }
        } else if (kind == LearnerKind::Lasso) {
            for (const auto& lp : cfg.lasso_grid) {
                const auto model = supervised::train_lasso(rep.train, y_train, lp.lambda, lp.tol, lp.max_iter);
                Digest d;
                d.add(model.weights);
                d.add(model.intercept);
                json p{{"lambda", lp.lambda}, {"tol", lp.tol}, {"max_iter", lp.max_iter}};
                consider(supervised::rmse(y_val, supervised::predict(model, rep.val)),
                         supervised::rmse(y_test, supervised::predict(model, rep.test)), p.dump(), d.h);
            }
        } else {
            for (std::size_t li = 0; li < cfg.svr_grid.size(); ++li) {
                supervised::SvrConfig sc = cfg.svr_grid[li];
                sc.seed = derive_seed(master, std::string("learner:svr:") + rep.name, fold_index, li);
                const auto model = supervised::train_svr(rep.train, y_train, sc);
                Digest d;
                d.add(model.weights);
                d.add(model.intercept);
                json p{{"c", sc.c}, {"epsilon", sc.epsilon}, {"epochs", sc.epochs}, {"lr", sc.lr}};
                consider(supervised::rmse(y_val, supervised::predict(model, rep.val)),
                         supervised::rmse(y_test, supervised::predict(model, rep.test)), p.dump(), d.h);
            }
        }
    } catch (const Error& e) {
        last_reason = e.what();
    }
    if (!best.ok) best.reason = last_reason.empty() ? "no learner candidate fitted" : last_reason;
    return best;
}

/// Replace test-row content with garbage; every train-fitted artifact must be
/// invariant to this or something upstream is leaking.
inline dataio::TabularDataset scramble_rows(const dataio::TabularDataset& ds, const std::vector<std::size_t>& rows,
                                            std::uint64_t seed) {
    dataio::TabularDataset out = ds;
    numkit::RngStream rng(seed);
    for (auto i : rows) {
        for (std::size_t j = 0; j < out.numeric_cols(); ++j) out.numeric(i, j) = 10.0 * rng.next_gaussian();
        for (std::size_t k = 0; k < out.categorical_cols(); ++k)
            if (!out.level_names[k].empty())
                out.categorical[k][i] = static_cast<int>(rng.next_below(out.level_names[k].size()));
        out.target[i] = 10.0 * rng.next_gaussian();
    }
    return out;
}

inline void compare_digests(const std::vector<std::pair<std::string, std::uint64_t>>& a,
                            const std::vector<std::pair<std::string, std::uint64_t>>& b, std::size_t fold_index) {
    if (a.size() != b.size())
        throw LeakageError("audit: fitted-stage list changed under test-row scrambling at fold " +
                           std::to_string(fold_index));
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i])
            throw LeakageError("audit: stage '" + a[i].first + "' depends on test rows at fold " +
                               std::to_string(fold_index));
}

} // namespace detail

/// The full cross-validated grid: for every fold, fit preprocessing and the
/// embedding on training rows, train and select encoders by validation
/// reconstruction loss, then fit each learner grid on every representation
/// (selection by validation RMSE, scoring on the test split).
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();

    const auto schema = cfg.schema();
    const auto ds = dataio::load_csv(cfg.dataset.path, schema);
    if (ds.n() == 0) throw DataError("run: dataset '" + cfg.dataset.path + "' has no rows");
    {
        const auto& target_missing = ds.missing[schema.target_index()];
        std::size_t missing = 0;
        for (auto m : target_missing) missing += m;
        if (missing > 0)
            throw DataError("run: target column '" + cfg.dataset.target + "' has " + std::to_string(missing) +
                            " missing values");
    }

    const auto plan =
        preprocess::make_folds(ds.n(), cfg.folds, detail::derive_seed(cfg.seed, "folds"));

    ExperimentReport report;
    report.folds = cfg.folds;
    report.seed = cfg.seed;
    report.config_hash = config_hash(cfg);

    for (const auto& [kind, grid] : cfg.encoder_grids) {
        (void)grid;
        report.representations.push_back(encoders::kind_name(kind));
    }
    report.representations.push_back("Original");
    std::vector<LearnerKind> learner_kinds;
    if (!cfg.rf_grid.empty()) learner_kinds.push_back(LearnerKind::Rf);
    if (!cfg.lasso_grid.empty()) learner_kinds.push_back(LearnerKind::Lasso);
    if (!cfg.svr_grid.empty()) learner_kinds.push_back(LearnerKind::Svr);
    for (LearnerKind k : learner_kinds) report.learners.push_back(learner_name(k));

    report.cells.resize(report.representations.size() * report.learners.size());
    for (std::size_t r = 0; r < report.representations.size(); ++r)
        for (std::size_t c = 0; c < report.learners.size(); ++c) {
            auto& cell = report.cells[r * report.learners.size() + c];
            cell.representation = report.representations[r];
            cell.learner = report.learners[c];
            cell.folds.resize(cfg.folds);
        }
    report.cells_attempted = report.cells.size() * cfg.folds;

    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const auto& fold = plan.folds[f];
        auto comp = detail::prepare_fold(cfg, opt, ds, fold, f);

        std::vector<std::vector<detail::LearnerOutcome>> fits(comp.reps.size());
        for (std::size_t r = 0; r < comp.reps.size(); ++r) {
            fits[r].resize(learner_kinds.size());
            if (!comp.reps[r].ok) continue;
            for (std::size_t c = 0; c < learner_kinds.size(); ++c)
                fits[r][c] = detail::fit_learner_grid(cfg, learner_kinds[c], comp.reps[r], comp.y_train,
                                                      comp.y_val, comp.y_test, cfg.seed, f);
        }

        if (opt.audit) {
            const auto scrambled =
                detail::scramble_rows(ds, fold.test, detail::derive_seed(cfg.seed, "audit-scramble", f));
            const auto comp2 = detail::prepare_fold(cfg, opt, scrambled, fold, f);
            detail::compare_digests(comp.digests, comp2.digests, f);
            for (std::size_t r = 0; r < comp.reps.size(); ++r) {
                if (!comp.reps[r].ok || !comp2.reps[r].ok) continue;
                for (std::size_t c = 0; c < learner_kinds.size(); ++c) {
                    const auto fit2 = detail::fit_learner_grid(cfg, learner_kinds[c], comp2.reps[r], comp2.y_train,
                                                               comp2.y_val, comp2.y_test, cfg.seed, f);
                    if (fits[r][c].ok != fit2.ok || fits[r][c].model_digest != fit2.model_digest ||
                        fits[r][c].params != fit2.params)
                        throw LeakageError("audit: learner fit (" + comp.reps[r].name + ", " +
                                           std::string(learner_name(learner_kinds[c])) +
                                           ") depends on test rows at fold " + std::to_string(f));
                }
            }
        }

        for (std::size_t r = 0; r < comp.reps.size(); ++r) {
            const auto& rep = comp.reps[r];
            if (rep.is_encoder && rep.ok)
                report.histories.emplace_back(rep.name + "_fold" + std::to_string(f), rep.history);
            for (std::size_t c = 0; c < learner_kinds.size(); ++c) {
                auto& outcome = report.cells[r * report.learners.size() + c].folds[f];
                if (!rep.ok) {
                    outcome.ok = false;
                    outcome.reason = "encoder: " + rep.reason;
                    continue;
                }
                const auto& fit = fits[r][c];
                outcome.ok = fit.ok;
                outcome.test_rmse = fit.test_rmse;
                outcome.reason = fit.reason;
                outcome.encoder_params = rep.params;
                outcome.learner_params = fit.params;
            }
        }
    }

    bool any_ok = false;
    for (auto& cell : report.cells) {
        cell.aggregate();
        any_ok = any_ok || cell.any_ok();
    }
    if (!any_ok) throw DataError("run: every cell failed; nothing to report");

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace tabrep::harness
