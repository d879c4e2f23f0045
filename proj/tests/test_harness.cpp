#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "tabrep/harness.hpp"
#include "tabrep/synth.hpp"

using namespace tabrep;
using namespace tabrep::harness;
using numkit::Matrix;
using numkit::RngStream;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "tabrep_harness";
    std::filesystem::create_directories(dir);
    return dir;
}

/// Small latent-factor CSV on disk plus a config skeleton pointing at it.
std::string write_synthetic_csv(std::size_t n, std::size_t latent, std::size_t ambient, std::uint64_t seed) {
    synth::LatentFactorSpec spec;
    spec.n = n;
    spec.latent = latent;
    spec.ambient = ambient;
    spec.seed = seed;
    const auto data = synth::make_latent_factor(spec);
    const auto path = temp_dir() / ("synth_" + std::to_string(n) + "_" + std::to_string(seed) + ".csv");
    dataio::save_csv(data.dataset, path.string());
    return path.string();
}

json base_config(const std::string& csv_path) {
    json j;
    j["dataset"] = {{"path", csv_path}, {"target", "y"}, {"numeric", "rest"}};
    j["folds"] = 3;
    j["seed"] = 7;
    j["learners"] = {{"lasso", {{"lambda", 0.01}}}};
    return j;
}

} // namespace

TEST_CASE("minimal config materializes documented defaults") {
    const auto csv = write_synthetic_csv(40, 2, 4, 1);
    const auto cfg = parse_config(base_config(csv).dump());
    CHECK(cfg.folds == 3);
    CHECK(cfg.seed == 7);
    CHECK(cfg.zmax == 4.0);
    CHECK(cfg.embed_dim == 8);
    CHECK(cfg.output_dir == "tabrep-out");
    CHECK(cfg.encoder_grids.empty());
    CHECK(cfg.lasso_grid.size() == 1);
    const json echoed = cfg.echo();
    CHECK(echoed["preprocess"]["zmax"] == 4.0);
    CHECK(echoed["embedding"]["dim"] == 8);
    CHECK(echoed["dataset"]["numeric"] == "rest");
}

TEST_CASE("config validation names the offender") {
    const auto csv = write_synthetic_csv(40, 2, 4, 1);
    json j = base_config(csv);

    j["folds"] = 1;
    CHECK_THROWS_AS(parse_config(j.dump()), ParamError);

    j = base_config(csv);
    j["surprise"] = true;
    CHECK_THROWS_MATCHES(parse_config(j.dump()), ParamError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("surprise")));

    j = base_config(csv);
    j["encoders"]["vae"]["bogus_knob"] = 1;
    CHECK_THROWS_MATCHES(parse_config(j.dump()), ParamError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("bogus_knob")));

    j = base_config(csv);
    j["dataset"].erase("path");
    CHECK_THROWS_MATCHES(parse_config(j.dump()), ParamError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("path")));

    j = base_config(csv);
    j.erase("learners");
    CHECK_THROWS_AS(parse_config(j.dump()), ParamError);

    CHECK_THROWS_AS(parse_config("{not json"), ParseError);
}

TEST_CASE("grid lists expand to their Cartesian product") {
    const auto csv = write_synthetic_csv(40, 2, 4, 1);
    json j = base_config(csv);
    j["encoders"]["vae"] = {{"latent", {2, 4}}, {"lr", {0.01, 0.001}}, {"epochs", 5}};
    const auto cfg = parse_config(j.dump());
    REQUIRE(cfg.encoder_grids.size() == 1);
    CHECK(cfg.encoder_grids[0].second.size() == 4);
    std::size_t latents = 0;
    for (const auto& c : cfg.encoder_grids[0].second) latents += c.latent;
    CHECK(latents == 12); // 2+2+4+4
}

TEST_CASE("encoder grids keep the canonical row order") {
    const auto csv = write_synthetic_csv(40, 2, 4, 1);
    json j = base_config(csv);
    j["encoders"]["vae"] = {{"epochs", 3}};
    j["encoders"]["ssae"] = {{"epochs", 3}};
    j["encoders"]["aae"] = {{"epochs", 3}};
    j["encoders"]["dbn"] = {{"epochs", 3}};
    const auto cfg = parse_config(j.dump());
    REQUIRE(cfg.encoder_grids.size() == 4);
    CHECK(cfg.encoder_grids[0].first == encoders::EncoderKind::Ssae);
    CHECK(cfg.encoder_grids[1].first == encoders::EncoderKind::Dbn);
    CHECK(cfg.encoder_grids[2].first == encoders::EncoderKind::Aae);
    CHECK(cfg.encoder_grids[3].first == encoders::EncoderKind::Vae);
}

TEST_CASE("baseline-only runs report just the Original row") {
    const auto csv = write_synthetic_csv(60, 2, 5, 3);
    const auto cfg = parse_config(base_config(csv).dump());
    const auto report = run_experiment(cfg);
    REQUIRE(report.representations == std::vector<std::string>{"Original"});
    REQUIRE(report.learners == std::vector<std::string>{"Lasso"});
    CHECK(report.cells.size() == 1);
    CHECK(report.cells[0].folds_used == 3);
    CHECK(report.cells_attempted == 3);
    CHECK(std::isfinite(report.cells[0].mean_rmse));
}

TEST_CASE("same master seed gives byte-identical reports") {
    const auto csv = write_synthetic_csv(70, 2, 5, 5);
    json j = base_config(csv);
    j["encoders"]["vae"] = {{"latent", 2}, {"epochs", 5}, {"patience", 0}};
    j["learners"]["svr"] = {{"epochs", 40}};
    const auto cfg = parse_config(j.dump());
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    CHECK(report_csv(a) == report_csv(b));
    CHECK(format_report(a) == format_report(b));
    REQUIRE(a.histories.size() == b.histories.size());
    for (std::size_t i = 0; i < a.histories.size(); ++i) {
        CHECK(a.histories[i].first == b.histories[i].first);
        CHECK(a.histories[i].second.rows == b.histories[i].second.rows);
    }
}

TEST_CASE("report aggregates are recomputable from per-fold values") {
    const auto csv = write_synthetic_csv(70, 2, 5, 9);
    json j = base_config(csv);
    j["learners"]["rf"] = {{"n_trees", 20}};
    const auto report = run_experiment(parse_config(j.dump()));
    CHECK(report.cells_attempted == report.cells.size() * report.folds);
    for (const auto& cell : report.cells) {
        REQUIRE(cell.any_ok());
        double sum = 0.0;
        std::size_t used = 0;
        for (const auto& f : cell.folds)
            if (f.ok) {
                sum += f.test_rmse;
                ++used;
            }
        const double mean = sum / static_cast<double>(used);
        double ss = 0.0;
        for (const auto& f : cell.folds)
            if (f.ok) ss += (f.test_rmse - mean) * (f.test_rmse - mean);
        CHECK(std::abs(cell.mean_rmse - mean) < 1e-12);
        CHECK(std::abs(cell.sd_rmse - std::sqrt(ss / static_cast<double>(used))) < 1e-12);
        CHECK(cell.folds_used == used);
    }
}

namespace {

ExperimentReport fixture_report() {
    // published-layout fixture: values only exercise the formatter
    const std::vector<std::string> reps{"SSAE", "DBN", "AAE", "VAE", "Original"};
    const std::vector<std::string> lrns{"RF", "Lasso", "SVM"};
    const double values[5][3] = {{6.89, 9.53, 9.31},
                                 {7.91, 9.81, 10.02},
                                 {8.49, 9.89, 10.06},
                                 {9.65, 10.17, 9.95},
                                 {11.08, 13.86, 12.16}};
    ExperimentReport report;
    report.representations = reps;
    report.learners = lrns;
    report.folds = 1;
    report.config_hash = "fixture";
    for (std::size_t r = 0; r < reps.size(); ++r)
        for (std::size_t c = 0; c < lrns.size(); ++c) {
            ReportCell cell;
            cell.representation = reps[r];
            cell.learner = lrns[c];
            FoldOutcome o;
            o.ok = true;
            o.test_rmse = values[r][c];
            cell.folds.push_back(o);
            cell.aggregate();
            report.cells.push_back(std::move(cell));
        }
    report.cells_attempted = report.cells.size();
    return report;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("format_report renders the published grid layout") {
    const auto text = format_report(fixture_report());
    const auto lines = lines_of(text);
    REQUIRE(lines.size() >= 9);

    // header, separator, then the five approach rows in order
    CHECK(lines[2].rfind("Approach", 0) == 0);
    CHECK(lines[2].find("RF") != std::string::npos);
    CHECK(lines[2].find("Lasso") != std::string::npos);
    CHECK(lines[2].find("SVM") != std::string::npos);
    CHECK(lines[2].find("RF") < lines[2].find("Lasso"));
    CHECK(lines[2].find("Lasso") < lines[2].find("SVM"));

    const std::vector<std::string> rows{"SSAE", "DBN", "AAE", "VAE", "Original"};
    const std::vector<std::vector<std::string>> cells{{"6.89", "9.53", "9.31"},
                                                      {"7.91", "9.81", "10.02"},
                                                      {"8.49", "9.89", "10.06"},
                                                      {"9.65", "10.17", "9.95"},
                                                      {"11.08", "13.86", "12.16"}};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::string& line = lines[4 + r];
        CHECK(line.rfind(rows[r], 0) == 0);
        std::size_t pos = 0;
        for (const auto& value : cells[r]) {
            const auto at = line.find(value, pos);
            REQUIRE(at != std::string::npos);
            pos = at + value.size();
        }
    }
    // the global minimum is starred
    CHECK(text.find("*6.89*") != std::string::npos);
    CHECK(text.find("*9.53*") == std::string::npos);
}

TEST_CASE("single-cell reports star their only cell") {
    ExperimentReport report;
    report.representations = {"Original"};
    report.learners = {"RF"};
    report.folds = 1;
    ReportCell cell;
    cell.representation = "Original";
    cell.learner = "RF";
    FoldOutcome o;
    o.ok = true;
    o.test_rmse = 2.5;
    cell.folds.push_back(o);
    cell.aggregate();
    report.cells.push_back(cell);
    const auto text = format_report(report);
    CHECK(text.find("*2.50*") != std::string::npos);
}

TEST_CASE("failed cells render an em dash with the reason") {
    ExperimentReport report;
    report.representations = {"VAE", "Original"};
    report.learners = {"RF"};
    report.folds = 1;
    ReportCell failed;
    failed.representation = "VAE";
    failed.learner = "RF";
    FoldOutcome o;
    o.ok = false;
    o.reason = "encoder: vae: non-finite loss at epoch 3";
    failed.folds.push_back(o);
    failed.aggregate();
    report.cells.push_back(failed);
    ReportCell okcell;
    okcell.representation = "Original";
    okcell.learner = "RF";
    FoldOutcome o2;
    o2.ok = true;
    o2.test_rmse = 1.0;
    okcell.folds.push_back(o2);
    okcell.aggregate();
    report.cells.push_back(okcell);

    const auto text = format_report(report);
    CHECK(text.find("—(encoder: vae: non-finite loss") != std::string::npos);
}

TEST_CASE("report csv round-trips through the reader") {
    const auto report = fixture_report();
    const auto path = (temp_dir() / "fixture_report.csv").string();
    std::ofstream(path, std::ios::binary) << report_csv(report);
    const auto back = read_report_csv(path);
    CHECK(back.representations == report.representations);
    CHECK(back.learners == report.learners);
    REQUIRE(back.cells.size() == report.cells.size());
    for (std::size_t i = 0; i < back.cells.size(); ++i) {
        CHECK(back.cells[i].mean_rmse == Catch::Approx(report.cells[i].mean_rmse).epsilon(1e-12));
        CHECK(back.cells[i].folds_used == report.cells[i].folds_used);
    }
    CHECK(format_report(back).find("*6.89*") != std::string::npos);
}

TEST_CASE("loss curves are emitted one file per trained encoder and fold") {
    encoders::TrainingHistory vae_history;
    vae_history.columns = {"train_loss", "val_loss", "recon_loss", "kl_loss"};
    for (int e = 0; e < 100; ++e)
        vae_history.append({1.0 / (e + 1), 1.1 / (e + 1), 0.8 / (e + 1), 0.2 / (e + 1)});

    const auto dir = (temp_dir() / "curves").string();
    std::filesystem::remove_all(dir);
    emit_loss_curves({{"VAE_fold0", vae_history}}, dir);

    std::ifstream in(dir + "/loss_VAE_fold0.csv");
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,train_loss,val_loss,recon_loss,kl_loss");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 100);

    encoders::TrainingHistory empty;
    empty.columns = {"train_loss"};
    CHECK_THROWS_AS(emit_loss_curves({{"X_fold0", empty}}, dir), ParamError);
}

TEST_CASE("write_report_files lays out the output directory") {
    const auto csv = write_synthetic_csv(60, 2, 5, 11);
    json j = base_config(csv);
    j["encoders"]["vae"] = {{"latent", 2}, {"epochs", 4}, {"patience", 0}};
    const auto cfg = parse_config(j.dump());
    const auto report = run_experiment(cfg);
    const auto dir = (temp_dir() / "full_out").string();
    std::filesystem::remove_all(dir);
    write_report_files(report, cfg.echo(), dir);
    CHECK(std::filesystem::exists(dir + "/report.txt"));
    CHECK(std::filesystem::exists(dir + "/report.csv"));
    CHECK(std::filesystem::exists(dir + "/effective_config.json"));
    CHECK(std::filesystem::exists(dir + "/run_meta.txt"));
    CHECK(std::filesystem::exists(dir + "/loss_curves/loss_VAE_fold0.csv"));
}

namespace {

/// Mixed numeric/categorical dataset with a real signal, written to CSV.
std::string write_mixed_csv(std::uint64_t seed) {
    RngStream rng(seed);
    dataio::TabularDataset ds;
    ds.schema.columns = {{"age", dataio::ColumnKind::Numeric, {"NA"}},
                         {"bmi", dataio::ColumnKind::Numeric, {"NA"}},
                         {"unit", dataio::ColumnKind::Categorical, {"NA"}},
                         {"sex", dataio::ColumnKind::Categorical, {"NA"}},
                         {"y", dataio::ColumnKind::Target, {"NA"}}};
    const std::size_t n = 80;
    ds.numeric = Matrix(n, 2);
    ds.level_names = {{"icu", "ward", "er"}, {"f", "m"}};
    ds.categorical.resize(2);
    ds.missing.assign(5, std::vector<std::uint8_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        ds.numeric(i, 0) = 50 + 10 * rng.next_gaussian();
        ds.numeric(i, 1) = 25 + 4 * rng.next_gaussian();
        const int unit = static_cast<int>(rng.next_below(3));
        const int sex = static_cast<int>(rng.next_below(2));
        ds.categorical[0].push_back(unit);
        ds.categorical[1].push_back(sex);
        ds.target.push_back(0.1 * ds.numeric(i, 0) + 0.5 * unit + 0.3 * rng.next_gaussian());
    }
    // a couple of masked cells exercise imputation
    ds.missing[0][3] = 1;
    ds.missing[2][7] = 1;
    ds.categorical[0][7] = -1;
    const auto path = temp_dir() / ("mixed_" + std::to_string(seed) + ".csv");
    dataio::save_csv(ds, path.string());
    return path.string();
}

} // namespace

TEST_CASE("mixed datasets run end to end with embedding") {
    json j;
    j["dataset"] = {{"path", write_mixed_csv(21)},
                    {"target", "y"},
                    {"numeric", json::array({"age", "bmi"})},
                    {"categorical", json::array({"unit", "sex"})},
                    {"missing_tokens", json::array({"NA"})}};
    j["folds"] = 2;
    j["seed"] = 3;
    j["embedding"] = {{"dim", 3}, {"epochs", 10}};
    j["learners"] = {{"lasso", {{"lambda", 0.01}}}};
    const auto report = run_experiment(parse_config(j.dump()));
    CHECK(report.cells[0].folds_used == 2);
}

TEST_CASE("the leakage audit passes in default mode and fails paper-faithful embedding") {
    json j;
    j["dataset"] = {{"path", write_mixed_csv(22)},
                    {"target", "y"},
                    {"numeric", json::array({"age", "bmi"})},
                    {"categorical", json::array({"unit", "sex"})}};
    j["folds"] = 2;
    j["seed"] = 5;
    j["embedding"] = {{"dim", 3}, {"epochs", 10}};
    j["learners"] = {{"lasso", {{"lambda", 0.01}}}, {"rf", {{"n_trees", 10}}}};
    const auto cfg = parse_config(j.dump());

    RunOptions audit;
    audit.audit = true;
    CHECK_NOTHROW(run_experiment(cfg, audit));

    RunOptions faithful_audit;
    faithful_audit.audit = true;
    faithful_audit.paper_faithful = true;
    CHECK_THROWS_MATCHES(run_experiment(cfg, faithful_audit), LeakageError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("embedding")));
}

TEST_CASE("missing targets are rejected up front") {
    const auto dir = temp_dir();
    const auto path = (dir / "missing_target.csv").string();
    std::ofstream(path, std::ios::binary) << "a,y\n1,2\n3,\n4,5\n";
    json j;
    j["dataset"] = {{"path", path}, {"target", "y"}, {"numeric", json::array({"a"})}};
    j["folds"] = 2;
    j["learners"] = {{"lasso", json::object()}};
    CHECK_THROWS_AS(run_experiment(parse_config(j.dump())), DataError);
}

TEST_CASE("synthetic latent-factor data has the promised structure") {
    synth::LatentFactorSpec spec;
    spec.n = 200;
    spec.latent = 4;
    spec.ambient = 30;
    spec.seed = 17;
    const auto data = synth::make_latent_factor(spec);
    CHECK(data.dataset.n() == 200);
    CHECK(data.dataset.numeric.cols() == 30);
    CHECK(data.factors.cols() == 4);
    CHECK(data.dataset.schema.columns.back().name == "y");
    // y correlates strongly with its generating factors
    double num = 0.0, den_y = 0.0, den_z = 0.0, my = 0.0, mz = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        my += data.dataset.target[i];
        mz += data.factors(i, 0);
    }
    my /= 200.0;
    mz /= 200.0;
    for (std::size_t i = 0; i < 200; ++i) {
        num += (data.dataset.target[i] - my) * (data.factors(i, 0) - mz);
        den_y += (data.dataset.target[i] - my) * (data.dataset.target[i] - my);
        den_z += (data.factors(i, 0) - mz) * (data.factors(i, 0) - mz);
    }
    CHECK(num / std::sqrt(den_y * den_z) > 0.5); // coefficient 2.0 on factor 0
    // all features bounded by tanh plus noise
    for (double v : data.dataset.numeric.data()) CHECK(std::abs(v) < 1.0 + 5 * spec.x_noise);
}

TEST_CASE("encoder failures mark cells but the run continues") {
    const auto csv = write_synthetic_csv(60, 2, 5, 33);
    json j = base_config(csv);
    // guaranteed divergence: sgd with an absurd learning rate
    j["encoders"]["vae"] = {{"latent", 2}, {"epochs", 30}, {"optimizer", "sgd"}, {"lr", 1e12}, {"patience", 0}};
    const auto report = run_experiment(parse_config(j.dump()));
    const auto& vae_cell = report.cell("VAE", "Lasso");
    CHECK_FALSE(vae_cell.any_ok());
    CHECK(vae_cell.folds.front().reason.find("vae") != std::string::npos);
    const auto& orig_cell = report.cell("Original", "Lasso");
    CHECK(orig_cell.folds_used == report.folds);
    const auto text = format_report(report);
    CHECK(text.find("—(") != std::string::npos);
}
