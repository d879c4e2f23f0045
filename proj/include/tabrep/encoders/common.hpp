#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tabrep/errors.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/model_io.hpp"
#include "tabrep/neural.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::encoders {

using numkit::Matrix;
using numkit::RngStream;

enum class EncoderKind { Ssae, Dbn, Vae, Aae };

inline const char* kind_name(EncoderKind k) {
    switch (k) {
        case EncoderKind::Ssae: return "SSAE";
        case EncoderKind::Dbn: return "DBN";
        case EncoderKind::Vae: return "VAE";
        case EncoderKind::Aae: return "AAE";
    }
    return "?";
}

inline EncoderKind kind_from_name(const std::string& s) {
    if (s == "SSAE" || s == "ssae") return EncoderKind::Ssae;
    if (s == "DBN" || s == "dbn") return EncoderKind::Dbn;
    if (s == "VAE" || s == "vae") return EncoderKind::Vae;
    if (s == "AAE" || s == "aae") return EncoderKind::Aae;
    throw ParamError("unknown encoder kind '" + s + "'");
}

enum class SparsityPenalty { Kl, L1 };

struct EncoderConfig {
    // architecture: encoder-side interior widths; unset -> geometric taper (2 layers)
    std::optional<std::vector<std::size_t>> hidden;
    std::size_t latent = 8;

    double lr = 0.002;
    std::size_t batch = 32;
    std::size_t epochs = 60;
    std::uint64_t seed = 0;
    std::size_t patience = 10; // early-stop patience on validation loss; 0 disables
    neural::OptKind optimizer = neural::OptKind::Adam;

    // SSAE
    double rho = 0.05;
    double lambda = 1.0;
    SparsityPenalty sparsity = SparsityPenalty::Kl;
    std::size_t pretrain_epochs = 15;

    // DBN
    std::size_t cd_k = 1;

    // VAE
    double beta = 1.0;

    // AAE
    std::vector<std::size_t> disc_hidden = {16, 16};
    double disc_lr = 0.0;        // 0 -> lr
    std::size_t disc_steps = 2;  // discriminator updates per generator update

    void validate() const {
        if (latent < 1) throw ParamError("encoder config: latent dim must be >= 1");
        if (!(lr > 0.0)) throw ParamError("encoder config: lr must be > 0");
        if (batch < 1) throw ParamError("encoder config: batch size must be >= 1");
        if (epochs < 1) throw ParamError("encoder config: epochs must be >= 1");
        if (!(rho > 0.0 && rho < 1.0)) throw ParamError("encoder config: rho must lie in (0,1)");
        if (lambda < 0.0) throw ParamError("encoder config: lambda must be >= 0");
        if (cd_k < 1) throw ParamError("encoder config: cd_k must be >= 1");
        if (beta < 0.0) throw ParamError("encoder config: beta must be >= 0");
        if (disc_steps < 1) throw ParamError("encoder config: disc_steps must be >= 1");
    }

    /// Auto architecture: geometric taper input -> latent with a capacity
    /// floor of twice the latent width on interior layers.
    std::vector<std::size_t> interior_widths(std::size_t input_dim) const {
        if (hidden) return *hidden;
        auto w = neural::geometric_widths(input_dim, latent, 2);
        for (auto& v : w) v = std::max(v, 2 * latent);
        return w;
    }

    double regularization_lr() const { return disc_lr > 0.0 ? disc_lr : lr; }
};

struct TrainingHistory {
    std::vector<std::string> columns; // after the implicit leading "epoch"
    std::vector<std::vector<double>> rows;

    std::size_t epochs() const { return rows.size(); }

    void append(std::vector<double> row) {
        if (row.size() != columns.size())
            throw ShapeError("history: row width " + std::to_string(row.size()) + " != column count " +
                             std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }

    double last(const std::string& column) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == column) return rows.back()[c];
        throw ParamError("history: no column '" + column + "'");
    }
};

inline void write_history_csv(const TrainingHistory& history, std::ostream& out) {
    out << "epoch";
    for (const auto& c : history.columns) out << ',' << c;
    out << '\n';
    char buf[32];
    for (std::size_t e = 0; e < history.rows.size(); ++e) {
        out << (e + 1);
        for (double v : history.rows[e]) {
            std::snprintf(buf, sizeof buf, "%.10g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

inline void write_history_csv(const TrainingHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_history_csv(history, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Restricted Boltzmann machine (used by the DBN trainer).
// ---------------------------------------------------------------------------

enum class VisibleKind { Gaussian, Bernoulli };

struct Rbm {
    Matrix weights; // hidden x visible
    std::vector<double> visible_bias;
    std::vector<double> hidden_bias;
    VisibleKind visible = VisibleKind::Bernoulli;

    std::size_t visible_dim() const { return weights.cols(); }
    std::size_t hidden_dim() const { return weights.rows(); }
};

// ---------------------------------------------------------------------------
// Trained representation model: encoder/decoder networks for SSAE/VAE/AAE,
// an RBM stack for the DBN.
// ---------------------------------------------------------------------------

struct EncoderModel {
    EncoderKind kind = EncoderKind::Ssae;
    neural::MlpNetwork encoder;
    neural::MlpNetwork decoder; // absent for DBN
    std::vector<Rbm> rbms;      // DBN only
    std::size_t input_dim = 0;
    std::size_t latent_dim = 0;
    TrainingHistory history;
    EncoderConfig config;
    std::uint64_t seed = 0;
};

namespace detail {

inline Matrix rbm_hidden_probs(const Rbm& rbm, const Matrix& v) {
    Matrix z = numkit::matmul_nt(v, rbm.weights);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) row[j] = neural::sigmoid(row[j] + rbm.hidden_bias[j]);
    }
    return z;
}

inline Matrix rbm_visible_mean(const Rbm& rbm, const Matrix& h) {
    Matrix z = numkit::matmul(h, rbm.weights);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const double pre = row[j] + rbm.visible_bias[j];
            row[j] = rbm.visible == VisibleKind::Gaussian ? pre : neural::sigmoid(pre);
        }
    }
    return z;
}

} // namespace detail

/// Deterministic latent representation: middle-layer activations (SSAE/AAE),
/// the posterior mean for the VAE, top-layer probabilities for the DBN.
inline Matrix encode(const EncoderModel& model, const Matrix& x) {
    if (x.cols() != model.input_dim)
        throw ShapeError("encode: input width " + std::to_string(x.cols()) + " != model input dim " +
                         std::to_string(model.input_dim));
    if (model.kind == EncoderKind::Dbn) {
        Matrix h = x;
        for (const auto& rbm : model.rbms) h = detail::rbm_hidden_probs(rbm, h);
        return h;
    }
    const Matrix out = neural::forward(model.encoder, x).output();
    if (model.kind == EncoderKind::Vae) return numkit::slice_cols(out, 0, model.latent_dim); // mean head
    return out;
}

/// Deterministic reconstruction through the decoder (DBN: transposed down-pass).
inline Matrix reconstruct(const EncoderModel& model, const Matrix& x) {
    const Matrix z = encode(model, x);
    if (model.kind == EncoderKind::Dbn) {
        Matrix v = z;
        for (std::size_t i = model.rbms.size(); i-- > 0;) v = detail::rbm_visible_mean(model.rbms[i], v);
        return v;
    }
    return neural::forward(model.decoder, z).output();
}

/// Validation reconstruction loss in the model's native units (MAE for the
/// SSAE, MSE otherwise); the harness selects grid candidates with this.
inline double validation_recon_loss(const EncoderModel& model, const Matrix& x) {
    const Matrix xhat = reconstruct(model, x);
    return model.kind == EncoderKind::Ssae ? neural::mae(x, xhat) : neural::mse(x, xhat);
}

// ---------------------------------------------------------------------------
// Scalar divergence kernels.
// ---------------------------------------------------------------------------

inline constexpr double kKlClamp = 1e-7;

/// KL(Bernoulli(rho) || Bernoulli(rho_bar)); rho_bar is clamped away from {0,1}.
inline double kl_bernoulli(double rho, double rho_bar) {
    if (!(rho > 0.0 && rho < 1.0)) throw ParamError("kl_bernoulli: rho must lie in (0,1)");
    const double r = std::clamp(rho_bar, kKlClamp, 1.0 - kKlClamp);
    return rho * std::log(rho / r) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r));
}

/// KL(N(mu, exp(logvar)) || N(0, I)), summed over dimensions.
inline double kl_gaussian(std::span<const double> mu, std::span<const double> logvar) {
    if (mu.size() != logvar.size()) throw ShapeError("kl_gaussian: mu and logvar lengths differ");
    double s = 0.0;
    for (std::size_t d = 0; d < mu.size(); ++d)
        s += mu[d] * mu[d] + std::exp(logvar[d]) - 1.0 - logvar[d];
    return 0.5 * s;
}

inline double kl_gaussian(double mu, double logvar) {
    return kl_gaussian(std::span<const double>(&mu, 1), std::span<const double>(&logvar, 1));
}

/// z = mu + exp(logvar / 2) .* eps
inline Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
    numkit::require_same_shape(mu, logvar, "reparameterize");
    numkit::require_same_shape(mu, eps, "reparameterize");
    Matrix z = mu;
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data()[i] += std::exp(0.5 * logvar.data()[i]) * eps.data()[i];
    return z;
}

// ---------------------------------------------------------------------------
// Shared trainer plumbing.
// ---------------------------------------------------------------------------

namespace detail {

struct EarlyStopper {
    std::size_t patience = 0; // 0 disables
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    bool improved = false;

    /// Feed one validation loss; returns true when training should stop.
    bool update(double val_loss) {
        improved = val_loss < best;
        if (improved) {
            best = val_loss;
            since_best = 0;
            return false;
        }
        if (patience == 0) return false;
        return ++since_best >= patience;
    }
};

inline void check_finite_loss(double loss, const char* trainer, std::size_t epoch, const char* phase = nullptr) {
    if (std::isfinite(loss)) return;
    std::string msg = std::string(trainer) + ": non-finite " + (phase ? std::string(phase) + " " : "") +
                      "loss at epoch " + std::to_string(epoch + 1);
    throw DivergenceError(msg);
}

inline void check_finite_params(const neural::MlpNetwork& net, const char* trainer, std::size_t epoch) {
    if (!neural::all_finite(net))
        throw DivergenceError(std::string(trainer) + ": non-finite parameters at epoch " + std::to_string(epoch + 1));
}

} // namespace detail

} // namespace tabrep::encoders

// Model persistence lives with the other file formats.
namespace tabrep::dataio {

namespace detail {

inline void put_network(ModelContainer& c, const std::string& prefix, const neural::MlpNetwork& net) {
    c.put(prefix + ".count", static_cast<std::int64_t>(net.layers.size()));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        const std::string base = prefix + "." + std::to_string(l);
        c.put(base + ".weights", layer.weights);
        numkit::Matrix b(1, layer.bias.size());
        for (std::size_t i = 0; i < layer.bias.size(); ++i) b(0, i) = layer.bias[i];
        c.put(base + ".bias", b);
        c.put(base + ".activation", std::string(neural::activation_name(layer.activation)));
    }
}

inline neural::MlpNetwork get_network(const ModelContainer& c, const std::string& prefix) {
    neural::MlpNetwork net;
    const auto count = static_cast<std::size_t>(c.get_i64(prefix + ".count"));
    for (std::size_t l = 0; l < count; ++l) {
        const std::string base = prefix + "." + std::to_string(l);
        neural::DenseLayer layer;
        layer.weights = c.get_matrix(base + ".weights");
        const auto& b = c.get_matrix(base + ".bias");
        layer.bias.assign(b.data().begin(), b.data().end());
        layer.activation = neural::activation_from_name(c.get_string(base + ".activation"));
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    return out;
}

} // namespace detail

inline void save_model(const encoders::EncoderModel& model, const std::string& path) {
    ModelContainer c;
    c.put("format", std::string("encoder-model"));
    c.put("kind", std::string(encoders::kind_name(model.kind)));
    c.put("input_dim", static_cast<std::int64_t>(model.input_dim));
    c.put("latent_dim", static_cast<std::int64_t>(model.latent_dim));
    c.put("seed", static_cast<std::int64_t>(model.seed));

    const auto& cfg = model.config;
    c.put("config.hidden", cfg.hidden ? detail::join_sizes(*cfg.hidden) : std::string("auto"));
    c.put("config.latent", static_cast<std::int64_t>(cfg.latent));
    numkit::Matrix scalars(1, 6);
    scalars(0, 0) = cfg.lr;
    scalars(0, 1) = cfg.rho;
    scalars(0, 2) = cfg.lambda;
    scalars(0, 3) = cfg.beta;
    scalars(0, 4) = cfg.disc_lr;
    scalars(0, 5) = 0.0;
    c.put("config.scalars", scalars);
    c.put("config.batch", static_cast<std::int64_t>(cfg.batch));
    c.put("config.epochs", static_cast<std::int64_t>(cfg.epochs));
    c.put("config.seed", static_cast<std::int64_t>(cfg.seed));
    c.put("config.patience", static_cast<std::int64_t>(cfg.patience));
    c.put("config.optimizer", std::string(cfg.optimizer == neural::OptKind::Adam ? "adam" : "sgd"));
    c.put("config.sparsity", std::string(cfg.sparsity == encoders::SparsityPenalty::Kl ? "kl" : "l1"));
    c.put("config.pretrain_epochs", static_cast<std::int64_t>(cfg.pretrain_epochs));
    c.put("config.cd_k", static_cast<std::int64_t>(cfg.cd_k));
    c.put("config.disc_hidden", detail::join_sizes(cfg.disc_hidden));
    c.put("config.disc_steps", static_cast<std::int64_t>(cfg.disc_steps));

    std::string cols;
    for (std::size_t i = 0; i < model.history.columns.size(); ++i) {
        if (i) cols += '\n';
        cols += model.history.columns[i];
    }
    c.put("history.columns", cols);
    numkit::Matrix hist(model.history.rows.size(), model.history.columns.size());
    for (std::size_t r = 0; r < model.history.rows.size(); ++r)
        for (std::size_t j = 0; j < model.history.columns.size(); ++j) hist(r, j) = model.history.rows[r][j];
    c.put("history.data", hist);

    detail::put_network(c, "encoder", model.encoder);
    detail::put_network(c, "decoder", model.decoder);

    c.put("rbm.count", static_cast<std::int64_t>(model.rbms.size()));
    for (std::size_t r = 0; r < model.rbms.size(); ++r) {
        const std::string base = "rbm." + std::to_string(r);
        c.put(base + ".weights", model.rbms[r].weights);
        numkit::Matrix vb(1, model.rbms[r].visible_bias.size()), hb(1, model.rbms[r].hidden_bias.size());
        for (std::size_t i = 0; i < vb.cols(); ++i) vb(0, i) = model.rbms[r].visible_bias[i];
        for (std::size_t i = 0; i < hb.cols(); ++i) hb(0, i) = model.rbms[r].hidden_bias[i];
        c.put(base + ".visible_bias", vb);
        c.put(base + ".hidden_bias", hb);
        c.put(base + ".visible_kind",
              std::string(model.rbms[r].visible == encoders::VisibleKind::Gaussian ? "gaussian" : "bernoulli"));
    }
    save_container(c, path);
}

inline encoders::EncoderModel load_model(const std::string& path) {
    const auto c = load_container(path);
    if (!c.has("format") || c.get_string("format") != "encoder-model")
        throw FormatError("'" + path + "': not an encoder model container");

    encoders::EncoderModel model;
    model.kind = encoders::kind_from_name(c.get_string("kind"));
    model.input_dim = static_cast<std::size_t>(c.get_i64("input_dim"));
    model.latent_dim = static_cast<std::size_t>(c.get_i64("latent_dim"));
    model.seed = static_cast<std::uint64_t>(c.get_i64("seed"));

    auto& cfg = model.config;
    const std::string hidden = c.get_string("config.hidden");
    if (hidden != "auto") cfg.hidden = detail::split_sizes(hidden);
    cfg.latent = static_cast<std::size_t>(c.get_i64("config.latent"));
    const auto& scalars = c.get_matrix("config.scalars");
    cfg.lr = scalars(0, 0);
    cfg.rho = scalars(0, 1);
    cfg.lambda = scalars(0, 2);
    cfg.beta = scalars(0, 3);
    cfg.disc_lr = scalars(0, 4);
    cfg.batch = static_cast<std::size_t>(c.get_i64("config.batch"));
    cfg.epochs = static_cast<std::size_t>(c.get_i64("config.epochs"));
    cfg.seed = static_cast<std::uint64_t>(c.get_i64("config.seed"));
    cfg.patience = static_cast<std::size_t>(c.get_i64("config.patience"));
    cfg.optimizer = c.get_string("config.optimizer") == "adam" ? neural::OptKind::Adam : neural::OptKind::Sgd;
    cfg.sparsity =
        c.get_string("config.sparsity") == "kl" ? encoders::SparsityPenalty::Kl : encoders::SparsityPenalty::L1;
    cfg.pretrain_epochs = static_cast<std::size_t>(c.get_i64("config.pretrain_epochs"));
    cfg.cd_k = static_cast<std::size_t>(c.get_i64("config.cd_k"));
    cfg.disc_hidden = detail::split_sizes(c.get_string("config.disc_hidden"));
    cfg.disc_steps = static_cast<std::size_t>(c.get_i64("config.disc_steps"));

    const std::string cols = c.get_string("history.columns");
    std::istringstream colstream(cols);
    std::string col;
    while (std::getline(colstream, col)) model.history.columns.push_back(col);
    const auto& hist = c.get_matrix("history.data");
    for (std::size_t r = 0; r < hist.rows(); ++r) {
        std::vector<double> row(hist.cols());
        for (std::size_t j = 0; j < hist.cols(); ++j) row[j] = hist(r, j);
        model.history.rows.push_back(std::move(row));
    }

    model.encoder = detail::get_network(c, "encoder");
    model.decoder = detail::get_network(c, "decoder");

    const auto rbm_count = static_cast<std::size_t>(c.get_i64("rbm.count"));
    for (std::size_t r = 0; r < rbm_count; ++r) {
        const std::string base = "rbm." + std::to_string(r);
        encoders::Rbm rbm;
        rbm.weights = c.get_matrix(base + ".weights");
        const auto& vb = c.get_matrix(base + ".visible_bias");
        const auto& hb = c.get_matrix(base + ".hidden_bias");
        rbm.visible_bias.assign(vb.data().begin(), vb.data().end());
        rbm.hidden_bias.assign(hb.data().begin(), hb.data().end());
        rbm.visible = c.get_string(base + ".visible_kind") == "gaussian" ? encoders::VisibleKind::Gaussian
                                                                         : encoders::VisibleKind::Bernoulli;
        model.rbms.push_back(std::move(rbm));
    }
    return model;
}

} // namespace tabrep::dataio
