#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tabrep/encoders/common.hpp"

namespace tabrep::encoders {

/// One SSAE objective evaluation on a batch: mean-absolute reconstruction
/// error plus the sparsity penalty on the middle layer (the encoder output),
/// with exact gradients for both networks.
struct SsaeBatch {
    double total = 0.0;
    double recon = 0.0;
    double sparsity = 0.0;
    neural::NetGrads encoder_grads;
    neural::NetGrads decoder_grads;
};

inline SsaeBatch ssae_batch(const neural::MlpNetwork& encoder, const neural::MlpNetwork& decoder, const Matrix& x,
                            double rho, double lambda, SparsityPenalty penalty) {
    SsaeBatch out;
    const auto enc_acts = neural::forward(encoder, x);
    const Matrix& z = enc_acts.output();
    const auto dec_acts = neural::forward(decoder, z);
    const Matrix& xhat = dec_acts.output();

    out.recon = neural::mae(x, xhat);
    auto dec_back = neural::backward(decoder, dec_acts, neural::mae_grad(x, xhat));
    out.decoder_grads = std::move(dec_back.grads);
    Matrix dz = std::move(dec_back.input_grad);

    const double n = static_cast<double>(x.rows());
    if (lambda > 0.0) {
        if (penalty == SparsityPenalty::Kl) {
            // KL(rho || mean activation) per middle unit; gradient only flows
            // where the mean stayed inside the clamp.
            const auto rho_bar = numkit::col_means(z);
            for (std::size_t j = 0; j < z.cols(); ++j) {
                out.sparsity += lambda * kl_bernoulli(rho, rho_bar[j]);
                if (rho_bar[j] <= kKlClamp || rho_bar[j] >= 1.0 - kKlClamp) continue;
                const double d = lambda * (-rho / rho_bar[j] + (1.0 - rho) / (1.0 - rho_bar[j])) / n;
                for (std::size_t i = 0; i < z.rows(); ++i) dz(i, j) += d;
            }
        } else {
            for (std::size_t i = 0; i < z.size(); ++i) {
                out.sparsity += lambda * std::abs(z.data()[i]) / n;
                const double s = z.data()[i] > 0.0 ? 1.0 : (z.data()[i] < 0.0 ? -1.0 : 0.0);
                dz.data()[i] += lambda * s / n;
            }
        }
    }
    out.total = out.recon + out.sparsity;
    out.encoder_grads = neural::backward(encoder, enc_acts, dz).grads;
    return out;
}

namespace detail {

/// Train one tied pair (in -> hidden -> in) on plain MAE; returns the pair.
struct PretrainedPair {
    neural::DenseLayer encode_layer;
    neural::DenseLayer decode_layer;
};

inline PretrainedPair pretrain_pair(const Matrix& data, std::size_t hidden_width, neural::Activation hidden_act,
                                    neural::Activation out_act, const EncoderConfig& cfg, RngStream init_rng,
                                    RngStream batch_rng) {
    neural::MlpNetwork enc, dec;
    {
        auto net = neural::make_mlp({data.cols(), hidden_width, data.cols()}, {hidden_act, out_act}, init_rng);
        enc.layers.push_back(net.layers[0]);
        dec.layers.push_back(net.layers[1]);
    }
    neural::NetOptimizer opt_enc(cfg.optimizer, cfg.lr), opt_dec(cfg.optimizer, cfg.lr);
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        for (const auto& idx : neural::make_batches(data.rows(), cfg.batch, batch_rng)) {
            const Matrix xb = numkit::take_rows(data, idx);
            const auto res = ssae_batch(enc, dec, xb, cfg.rho, 0.0, cfg.sparsity);
            check_finite_loss(res.total, "ssae pretraining", epoch);
            opt_enc.step(enc, res.encoder_grads);
            opt_dec.step(dec, res.decoder_grads);
        }
        check_finite_params(enc, "ssae pretraining", epoch);
    }
    return {enc.layers[0], dec.layers[0]};
}

} // namespace detail

/// Greedy layer-wise pretraining of each autoencoder pair, then end-to-end
/// fine-tuning of MAE + lambda * sparsity. The middle layer is sigmoid so the
/// mean-activation penalty is well defined; history carries both components.
inline EncoderModel train_ssae(const Matrix& x, const Matrix& x_val, const EncoderConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw ParamError("train_ssae: empty training matrix");
    const std::size_t p = x.cols();
    const auto interior = cfg.interior_widths(p);

    // encoder widths p -> interior... -> latent; decoder mirrors it
    std::vector<std::size_t> enc_widths{p};
    enc_widths.insert(enc_widths.end(), interior.begin(), interior.end());
    enc_widths.push_back(cfg.latent);

    RngStream root(cfg.seed);

    EncoderModel model;
    model.kind = EncoderKind::Ssae;
    model.input_dim = p;
    model.latent_dim = cfg.latent;
    model.config = cfg;
    model.seed = cfg.seed;

    // greedy pretraining, one pair per depth, each on the previous encoding
    Matrix data = x;
    std::vector<neural::DenseLayer> enc_layers, dec_layers;
    for (std::size_t level = 0; level + 1 < enc_widths.size(); ++level) {
        const bool is_middle = level + 2 == enc_widths.size();
        const neural::Activation hidden_act = is_middle ? neural::Activation::Sigmoid : neural::Activation::Relu;
        const neural::Activation out_act = level == 0 ? neural::Activation::Linear : neural::Activation::Relu;
        auto pair = detail::pretrain_pair(data, enc_widths[level + 1], hidden_act, out_act, cfg,
                                          root.derive("pretrain-init").derive(level),
                                          root.derive("pretrain-batches").derive(level));
        if (level + 2 < enc_widths.size()) {
            neural::MlpNetwork probe;
            probe.layers.push_back(pair.encode_layer);
            data = neural::forward(probe, data).output();
        }
        enc_layers.push_back(std::move(pair.encode_layer));
        dec_layers.insert(dec_layers.begin(), std::move(pair.decode_layer));
    }
    model.encoder.layers = std::move(enc_layers);
    model.decoder.layers = std::move(dec_layers);

    // end-to-end fine-tuning with the sparsity penalty switched on
    model.history.columns = {"train_loss", "val_loss", "recon_loss", "sparsity_loss"};
    neural::NetOptimizer opt_enc(cfg.optimizer, cfg.lr), opt_dec(cfg.optimizer, cfg.lr);
    RngStream batch_rng = root.derive("finetune-batches");
    detail::EarlyStopper stopper{cfg.patience};
    neural::MlpNetwork best_enc = model.encoder, best_dec = model.decoder;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double train_sum = 0.0, recon_sum = 0.0, sparsity_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& idx : neural::make_batches(x.rows(), cfg.batch, batch_rng)) {
            const Matrix xb = numkit::take_rows(x, idx);
            const auto res = ssae_batch(model.encoder, model.decoder, xb, cfg.rho, cfg.lambda, cfg.sparsity);
            detail::check_finite_loss(res.total, "ssae", epoch);
            opt_enc.step(model.encoder, res.encoder_grads);
            opt_dec.step(model.decoder, res.decoder_grads);
            const double w = static_cast<double>(idx.size());
            train_sum += res.total * w;
            recon_sum += res.recon * w;
            sparsity_sum += res.sparsity * w;
            seen += idx.size();
        }
        detail::check_finite_params(model.encoder, "ssae", epoch);
        detail::check_finite_params(model.decoder, "ssae", epoch);

        const auto val = ssae_batch(model.encoder, model.decoder, x_val, cfg.rho, cfg.lambda, cfg.sparsity);
        detail::check_finite_loss(val.total, "ssae", epoch, "validation");
        const double nd = static_cast<double>(seen);
        model.history.append({train_sum / nd, val.total, recon_sum / nd, sparsity_sum / nd});

        const bool stop = stopper.update(val.total);
        if (stopper.improved) {
            best_enc = model.encoder;
            best_dec = model.decoder;
        }
        if (stop) break;
    }
    if (cfg.patience > 0) {
        model.encoder = std::move(best_enc);
        model.decoder = std::move(best_dec);
    }
    return model;
}

inline EncoderModel train_ssae(const Matrix& x, const EncoderConfig& cfg) { return train_ssae(x, x, cfg); }

} // namespace tabrep::encoders
