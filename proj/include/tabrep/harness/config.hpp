#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabrep/dataio.hpp"
#include "tabrep/embed.hpp"
#include "tabrep/encoders.hpp"
#include "tabrep/errors.hpp"
#include "tabrep/supervised.hpp"

namespace tabrep::harness {

using json = nlohmann::json;

enum class LearnerKind { Rf, Lasso, Svr };

inline const char* learner_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::Rf: return "RF";
        case LearnerKind::Lasso: return "Lasso";
        case LearnerKind::Svr: return "SVM";
    }
    return "?";
}

struct LassoParams {
    double lambda = 0.1;
    double tol = 1e-7;
    std::size_t max_iter = 10000;
};

struct DatasetConfig {
    std::string path;
    std::string target;
    std::vector<std::string> numeric; // ignored when numeric_rest is set
    bool numeric_rest = false;        // "numeric": "rest" -> every unclassified header column
    std::vector<std::string> categorical;
    std::vector<std::string> missing_tokens{"NA"};
};

struct ExperimentConfig {
    DatasetConfig dataset;
    double zmax = 4.0;
    std::size_t embed_dim = 8;
    embed::GloveConfig glove;
    std::size_t folds = 5;
    std::uint64_t seed = 42;
    std::string output_dir = "tabrep-out";

    // canonical row order SSAE, DBN, AAE, VAE; absent kinds are skipped
    std::vector<std::pair<encoders::EncoderKind, std::vector<encoders::EncoderConfig>>> encoder_grids;
    std::vector<supervised::RfConfig> rf_grid;
    std::vector<LassoParams> lasso_grid;
    std::vector<supervised::SvrConfig> svr_grid;

    std::size_t learner_kinds() const {
        return (rf_grid.empty() ? 0u : 1u) + (lasso_grid.empty() ? 0u : 1u) + (svr_grid.empty() ? 0u : 1u);
    }

    /// Resolve the dataset schema, peeking at the CSV header when columns are
    /// declared as "rest".
    dataio::FeatureSchema schema() const {
        dataio::FeatureSchema s;
        std::vector<std::string> numeric_cols = numeric_rest_resolved();
        for (const auto& n : numeric_cols) s.columns.push_back({n, dataio::ColumnKind::Numeric, dataset.missing_tokens});
        for (const auto& c : dataset.categorical)
            s.columns.push_back({c, dataio::ColumnKind::Categorical, dataset.missing_tokens});
        s.columns.push_back({dataset.target, dataio::ColumnKind::Target, dataset.missing_tokens});
        s.validate();
        return s;
    }

    json echo() const;

private:
    std::vector<std::string> numeric_rest_resolved() const {
        if (!dataset.numeric_rest) return dataset.numeric;
        std::vector<std::string> out;
        for (const auto& col : dataio::read_csv_header(dataset.path)) {
            if (col == dataset.target) continue;
            if (std::find(dataset.categorical.begin(), dataset.categorical.end(), col) != dataset.categorical.end())
                continue;
            out.push_back(col);
        }
        return out;
    }
};

namespace detail {

inline void require_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
            throw ParamError("config: unknown key '" + key + "' in " + where);
    }
}

/// Expand an object whose values may be arrays into the Cartesian product of
/// scalar-valued objects (grid enumeration). Key order is nlohmann's sorted
/// order, so enumeration is deterministic.
inline std::vector<json> expand_grid(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ParamError("config: " + where + " must be an object");
    std::vector<json> out{json::object()};
    for (const auto& [key, value] : obj.items()) {
        std::vector<json> values;
        if (value.is_array()) {
            if (value.empty()) throw ParamError("config: empty grid list for '" + key + "' in " + where);
            for (const auto& v : value) values.push_back(v);
        } else {
            values.push_back(value);
        }
        std::vector<json> next;
        next.reserve(out.size() * values.size());
        for (const auto& base : out)
            for (const auto& v : values) {
                json item = base;
                item[key] = v;
                next.push_back(std::move(item));
            }
        out = std::move(next);
    }
    return out;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

inline std::vector<std::size_t> size_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw ParamError("config: " + where + " must be a list of widths");
    std::vector<std::size_t> out;
    for (const auto& e : v) out.push_back(e.get<std::size_t>());
    return out;
}

inline encoders::EncoderConfig encoder_config_from(const json& flat, encoders::EncoderKind kind,
                                                   const std::string& where) {
    require_keys(flat, where,
                 {"hidden", "latent", "lr", "batch", "epochs", "patience", "optimizer", "rho", "lambda", "sparsity",
                  "pretrain_epochs", "cd_k", "beta", "disc_hidden", "disc_lr", "disc_steps"});
    encoders::EncoderConfig cfg;
    if (flat.contains("hidden")) cfg.hidden = size_list(flat.at("hidden"), where + ".hidden");
    cfg.latent = get_or<std::size_t>(flat, "latent", cfg.latent);
    cfg.lr = get_or<double>(flat, "lr", kind == encoders::EncoderKind::Dbn ? 0.05 : cfg.lr);
    cfg.batch = get_or<std::size_t>(flat, "batch", cfg.batch);
    cfg.epochs = get_or<std::size_t>(flat, "epochs", cfg.epochs);
    cfg.patience = get_or<std::size_t>(flat, "patience", cfg.patience);
    if (flat.contains("optimizer")) {
        const std::string o = flat.at("optimizer").get<std::string>();
        if (o == "adam") cfg.optimizer = neural::OptKind::Adam;
        else if (o == "sgd") cfg.optimizer = neural::OptKind::Sgd;
        else throw ParamError("config: unknown optimizer '" + o + "' in " + where);
    }
    cfg.rho = get_or<double>(flat, "rho", cfg.rho);
    cfg.lambda = get_or<double>(flat, "lambda", cfg.lambda);
    if (flat.contains("sparsity")) {
        const std::string s = flat.at("sparsity").get<std::string>();
        if (s == "kl") cfg.sparsity = encoders::SparsityPenalty::Kl;
        else if (s == "l1") cfg.sparsity = encoders::SparsityPenalty::L1;
        else throw ParamError("config: unknown sparsity variant '" + s + "' in " + where);
    }
    cfg.pretrain_epochs = get_or<std::size_t>(flat, "pretrain_epochs", cfg.pretrain_epochs);
    cfg.cd_k = get_or<std::size_t>(flat, "cd_k", cfg.cd_k);
    cfg.beta = get_or<double>(flat, "beta", cfg.beta);
    if (flat.contains("disc_hidden")) cfg.disc_hidden = size_list(flat.at("disc_hidden"), where + ".disc_hidden");
    cfg.disc_lr = get_or<double>(flat, "disc_lr", cfg.disc_lr);
    cfg.disc_steps = get_or<std::size_t>(flat, "disc_steps", cfg.disc_steps);
    cfg.validate();
    return cfg;
}

} // namespace detail

/// Parse and validate a JSON experiment config; every default is materialized
/// so echo() reproduces the effective configuration.
inline ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    detail::require_keys(root, "top level",
                         {"dataset", "preprocess", "embedding", "folds", "seed", "output_dir", "encoders", "learners"});

    ExperimentConfig cfg;
    if (!root.contains("dataset")) throw ParamError("config: missing 'dataset' section");
    {
        const json& d = root.at("dataset");
        detail::require_keys(d, "dataset", {"path", "target", "numeric", "categorical", "missing_tokens"});
        if (!d.contains("path")) throw ParamError("config: missing dataset path");
        cfg.dataset.path = d.at("path").get<std::string>();
        if (!d.contains("target")) throw ParamError("config: missing dataset target column");
        cfg.dataset.target = d.at("target").get<std::string>();
        if (d.contains("numeric")) {
            if (d.at("numeric").is_string() && d.at("numeric").get<std::string>() == "rest")
                cfg.dataset.numeric_rest = true;
            else
                cfg.dataset.numeric = d.at("numeric").get<std::vector<std::string>>();
        } else {
            cfg.dataset.numeric_rest = true;
        }
        cfg.dataset.categorical = detail::get_or(d, "categorical", cfg.dataset.categorical);
        cfg.dataset.missing_tokens = detail::get_or(d, "missing_tokens", cfg.dataset.missing_tokens);
    }
    if (root.contains("preprocess")) {
        const json& p = root.at("preprocess");
        detail::require_keys(p, "preprocess", {"zmax"});
        cfg.zmax = detail::get_or(p, "zmax", cfg.zmax);
        if (!(cfg.zmax > 0.0)) throw ParamError("config: preprocess.zmax must be > 0");
    }
    if (root.contains("embedding")) {
        const json& e = root.at("embedding");
        detail::require_keys(e, "embedding", {"dim", "lr", "epochs", "xmax", "alpha"});
        cfg.embed_dim = detail::get_or<std::size_t>(e, "dim", cfg.embed_dim);
        cfg.glove.lr = detail::get_or(e, "lr", cfg.glove.lr);
        cfg.glove.epochs = detail::get_or<std::size_t>(e, "epochs", cfg.glove.epochs);
        cfg.glove.xmax = detail::get_or(e, "xmax", cfg.glove.xmax);
        cfg.glove.alpha = detail::get_or(e, "alpha", cfg.glove.alpha);
        if (cfg.embed_dim < 1) throw ParamError("config: embedding.dim must be >= 1");
    }
    cfg.folds = detail::get_or<std::size_t>(root, "folds", cfg.folds);
    if (cfg.folds < 2) throw ParamError("config: folds must be >= 2");
    cfg.seed = detail::get_or<std::uint64_t>(root, "seed", cfg.seed);
    cfg.output_dir = detail::get_or<std::string>(root, "output_dir", cfg.output_dir);

    if (root.contains("encoders")) {
        const json& e = root.at("encoders");
        detail::require_keys(e, "encoders", {"ssae", "dbn", "aae", "vae"});
        // canonical row order
        for (const char* name : {"ssae", "dbn", "aae", "vae"}) {
            if (!e.contains(name)) continue;
            const auto kind = encoders::kind_from_name(name);
            std::vector<encoders::EncoderConfig> grid;
            for (const auto& flat : detail::expand_grid(e.at(name), std::string("encoders.") + name))
                grid.push_back(detail::encoder_config_from(flat, kind, std::string("encoders.") + name));
            cfg.encoder_grids.emplace_back(kind, std::move(grid));
        }
    }

    if (!root.contains("learners")) throw ParamError("config: missing 'learners' section");
    {
        const json& l = root.at("learners");
        detail::require_keys(l, "learners", {"rf", "lasso", "svr"});
        if (l.contains("rf"))
            for (const auto& flat : detail::expand_grid(l.at("rf"), "learners.rf")) {
                detail::require_keys(flat, "learners.rf", {"n_trees", "m_try", "min_leaf", "max_depth"});
                supervised::RfConfig rf;
                rf.n_trees = detail::get_or<std::size_t>(flat, "n_trees", rf.n_trees);
                rf.m_try = detail::get_or<std::size_t>(flat, "m_try", rf.m_try);
                rf.min_leaf = detail::get_or<std::size_t>(flat, "min_leaf", rf.min_leaf);
                rf.max_depth = detail::get_or<std::size_t>(flat, "max_depth", rf.max_depth);
                if (rf.n_trees < 1) throw ParamError("config: learners.rf.n_trees must be >= 1");
                cfg.rf_grid.push_back(rf);
            }
        if (l.contains("lasso"))
            for (const auto& flat : detail::expand_grid(l.at("lasso"), "learners.lasso")) {
                detail::require_keys(flat, "learners.lasso", {"lambda", "tol", "max_iter"});
                LassoParams lp;
                lp.lambda = detail::get_or(flat, "lambda", lp.lambda);
                lp.tol = detail::get_or(flat, "tol", lp.tol);
                lp.max_iter = detail::get_or<std::size_t>(flat, "max_iter", lp.max_iter);
                if (lp.lambda < 0.0) throw ParamError("config: learners.lasso.lambda must be >= 0");
                cfg.lasso_grid.push_back(lp);
            }
        if (l.contains("svr"))
            for (const auto& flat : detail::expand_grid(l.at("svr"), "learners.svr")) {
                detail::require_keys(flat, "learners.svr", {"c", "epsilon", "epochs", "lr"});
                supervised::SvrConfig sv;
                sv.c = detail::get_or(flat, "c", sv.c);
                sv.epsilon = detail::get_or(flat, "epsilon", sv.epsilon);
                sv.epochs = detail::get_or<std::size_t>(flat, "epochs", sv.epochs);
                sv.lr = detail::get_or(flat, "lr", sv.lr);
                if (!(sv.c > 0.0)) throw ParamError("config: learners.svr.c must be > 0");
                if (sv.epsilon < 0.0) throw ParamError("config: learners.svr.epsilon must be >= 0");
                cfg.svr_grid.push_back(sv);
            }
    }
    if (cfg.learner_kinds() == 0) throw ParamError("config: at least one learner grid is required");
    for (const auto& [kind, grid] : cfg.encoder_grids)
        if (grid.empty())
            throw ParamError(std::string("config: empty grid for encoder '") + encoders::kind_name(kind) + "'");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

namespace detail {

inline json encoder_config_echo(const encoders::EncoderConfig& c, encoders::EncoderKind kind) {
    json j;
    if (c.hidden) j["hidden"] = *c.hidden;
    else j["hidden"] = "auto";
    j["latent"] = c.latent;
    j["lr"] = c.lr;
    j["batch"] = c.batch;
    j["epochs"] = c.epochs;
    j["patience"] = c.patience;
    j["optimizer"] = c.optimizer == neural::OptKind::Adam ? "adam" : "sgd";
    switch (kind) {
        case encoders::EncoderKind::Ssae:
            j["rho"] = c.rho;
            j["lambda"] = c.lambda;
            j["sparsity"] = c.sparsity == encoders::SparsityPenalty::Kl ? "kl" : "l1";
            j["pretrain_epochs"] = c.pretrain_epochs;
            break;
        case encoders::EncoderKind::Dbn: j["cd_k"] = c.cd_k; break;
        case encoders::EncoderKind::Vae: j["beta"] = c.beta; break;
        case encoders::EncoderKind::Aae:
            j["disc_hidden"] = c.disc_hidden;
            j["disc_lr"] = c.disc_lr;
            j["disc_steps"] = c.disc_steps;
            break;
    }
    return j;
}

} // namespace detail

inline json ExperimentConfig::echo() const {
    json j;
    j["dataset"]["path"] = dataset.path;
    j["dataset"]["target"] = dataset.target;
    if (dataset.numeric_rest) j["dataset"]["numeric"] = "rest";
    else j["dataset"]["numeric"] = dataset.numeric;
    j["dataset"]["categorical"] = dataset.categorical;
    j["dataset"]["missing_tokens"] = dataset.missing_tokens;
    j["preprocess"]["zmax"] = zmax;
    j["embedding"] = {{"dim", embed_dim}, {"lr", glove.lr}, {"epochs", glove.epochs}, {"xmax", glove.xmax},
                      {"alpha", glove.alpha}};
    j["folds"] = folds;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["encoders"] = json::object();
    for (const auto& [kind, grid] : encoder_grids) {
        json arr = json::array();
        for (const auto& c : grid) arr.push_back(detail::encoder_config_echo(c, kind));
        std::string key = encoders::kind_name(kind);
        std::transform(key.begin(), key.end(), key.begin(), [](char ch) { return static_cast<char>(std::tolower(ch)); });
        j["encoders"][key] = arr;
    }
    j["learners"] = json::object();
    if (!rf_grid.empty()) {
        json arr = json::array();
        for (const auto& r : rf_grid)
            arr.push_back({{"n_trees", r.n_trees}, {"m_try", r.m_try}, {"min_leaf", r.min_leaf},
                           {"max_depth", r.max_depth}});
        j["learners"]["rf"] = arr;
    }
    if (!lasso_grid.empty()) {
        json arr = json::array();
        for (const auto& l : lasso_grid)
            arr.push_back({{"lambda", l.lambda}, {"tol", l.tol}, {"max_iter", l.max_iter}});
        j["learners"]["lasso"] = arr;
    }
    if (!svr_grid.empty()) {
        json arr = json::array();
        for (const auto& s : svr_grid)
            arr.push_back({{"c", s.c}, {"epsilon", s.epsilon}, {"epochs", s.epochs}, {"lr", s.lr}});
        j["learners"]["svr"] = arr;
    }
    return j;
}

/// FNV-1a of the canonical config dump, reported for reproducibility.
inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string dump = cfg.echo().dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(numkit::RngStream::fnv1a(dump)));
    return buf;
}

} // namespace tabrep::harness
