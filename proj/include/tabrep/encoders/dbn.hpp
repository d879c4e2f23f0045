#pragma once

#include <cmath>
#include <vector>

#include "tabrep/encoders/common.hpp"

namespace tabrep::encoders {

namespace detail {

inline Matrix bernoulli_sample(const Matrix& probs, RngStream& rng) {
    Matrix s = probs;
    for (double& v : s.data()) v = rng.next_unit() < v ? 1.0 : 0.0;
    return s;
}

} // namespace detail

/// One CD-k update. Positive statistics use hidden probabilities; the chain
/// samples hidden states and uses mean-field visibles (identity conditionals
/// for Gaussian units, sigmoid for Bernoulli). Returns the batch
/// reconstruction MSE of the final down-pass.
inline double rbm_cd_step(Rbm& rbm, const Matrix& batch, std::size_t k, double lr, RngStream& rng) {
    if (k < 1) throw ParamError("rbm_cd_step: k must be >= 1");
    if (batch.cols() != rbm.visible_dim())
        throw ShapeError("rbm_cd_step: batch width " + std::to_string(batch.cols()) + " != visible dim " +
                         std::to_string(rbm.visible_dim()));

    const Matrix h0 = detail::rbm_hidden_probs(rbm, batch);
    Matrix h_state = detail::bernoulli_sample(h0, rng);
    Matrix v;
    Matrix h;
    for (std::size_t step = 0; step < k; ++step) {
        v = detail::rbm_visible_mean(rbm, h_state);
        h = detail::rbm_hidden_probs(rbm, v);
        if (step + 1 < k) h_state = detail::bernoulli_sample(h, rng);
    }

    const double scale = lr / static_cast<double>(batch.rows());
    const Matrix pos = numkit::matmul_tn(h0, batch);
    const Matrix neg = numkit::matmul_tn(h, v);
    for (std::size_t i = 0; i < rbm.weights.size(); ++i)
        rbm.weights.data()[i] += scale * (pos.data()[i] - neg.data()[i]);

    const auto v_pos = numkit::col_sums(batch), v_neg = numkit::col_sums(v);
    for (std::size_t j = 0; j < rbm.visible_bias.size(); ++j)
        rbm.visible_bias[j] += scale * (v_pos[j] - v_neg[j]);
    const auto h_pos = numkit::col_sums(h0), h_neg = numkit::col_sums(h);
    for (std::size_t j = 0; j < rbm.hidden_bias.size(); ++j)
        rbm.hidden_bias[j] += scale * (h_pos[j] - h_neg[j]);

    return neural::mse(batch, v);
}

inline Rbm make_rbm(std::size_t visible, std::size_t hidden, VisibleKind kind, RngStream& rng) {
    Rbm rbm;
    rbm.weights = numkit::sample(rng, numkit::Gaussian{0.0, 0.01}, hidden, visible);
    rbm.visible_bias.assign(visible, 0.0);
    rbm.hidden_bias.assign(hidden, 0.0);
    rbm.visible = kind;
    return rbm;
}

/// Greedy RBM stack: a Gaussian-Bernoulli machine on the standardized inputs,
/// Bernoulli machines above it, each trained on the hidden probabilities of
/// the layer below. encode() is the deterministic top-layer probability.
inline EncoderModel train_dbn(const Matrix& x, const Matrix& x_val, const EncoderConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw ParamError("train_dbn: empty training matrix");
    const std::size_t p = x.cols();
    const auto interior = cfg.interior_widths(p);

    std::vector<std::size_t> widths{p};
    widths.insert(widths.end(), interior.begin(), interior.end());
    widths.push_back(cfg.latent);

    RngStream root(cfg.seed);

    EncoderModel model;
    model.kind = EncoderKind::Dbn;
    model.input_dim = p;
    model.latent_dim = cfg.latent;
    model.config = cfg;
    model.seed = cfg.seed;
    model.history.columns = {"train_loss", "val_loss", "layer"};

    Matrix data = x, val = x_val;
    for (std::size_t level = 0; level + 1 < widths.size(); ++level) {
        RngStream init_rng = root.derive("rbm-init").derive(level);
        RngStream chain_rng = root.derive("rbm-chain").derive(level);
        RngStream batch_rng = root.derive("rbm-batches").derive(level);
        Rbm rbm = make_rbm(widths[level], widths[level + 1],
                           level == 0 ? VisibleKind::Gaussian : VisibleKind::Bernoulli, init_rng);

        detail::EarlyStopper stopper{cfg.patience};
        Rbm best = rbm;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            double err_sum = 0.0;
            std::size_t seen = 0;
            for (const auto& idx : neural::make_batches(data.rows(), cfg.batch, batch_rng)) {
                const Matrix batch = numkit::take_rows(data, idx);
                const double err = rbm_cd_step(rbm, batch, cfg.cd_k, cfg.lr, chain_rng);
                detail::check_finite_loss(err, "dbn", epoch);
                err_sum += err * static_cast<double>(idx.size());
                seen += idx.size();
            }
            if (!numkit::all_finite(rbm.weights))
                throw DivergenceError("dbn: non-finite parameters at epoch " + std::to_string(epoch + 1));

            // mean-field validation reconstruction for this layer
            const Matrix v_recon = detail::rbm_visible_mean(rbm, detail::rbm_hidden_probs(rbm, val));
            const double val_err = neural::mse(val, v_recon);
            model.history.append({err_sum / static_cast<double>(seen), val_err, static_cast<double>(level)});

            const bool stop = stopper.update(val_err);
            if (stopper.improved) best = rbm;
            if (stop) break;
        }
        if (cfg.patience > 0) rbm = std::move(best);

        data = detail::rbm_hidden_probs(rbm, data);
        val = detail::rbm_hidden_probs(rbm, val);
        model.rbms.push_back(std::move(rbm));
    }
    return model;
}

inline EncoderModel train_dbn(const Matrix& x, const EncoderConfig& cfg) { return train_dbn(x, x, cfg); }

} // namespace tabrep::encoders
