#pragma once

#include <cmath>
#include <vector>

#include "tabrep/encoders/common.hpp"

namespace tabrep::encoders {

/// One evidence-lower-bound evaluation on a batch: squared reconstruction
/// error of the sampled decode (summed over features, averaged over the
/// batch) plus beta times the batch-mean Gaussian KL — the standard ELBO
/// shape, so beta = 1 balances sensibly at any feature count. The encoder's
/// output packs [mu | logvar]; `eps` is the reparameterization noise (passed
/// explicitly so gradients are checkable).
struct VaeBatch {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
    neural::NetGrads encoder_grads;
    neural::NetGrads decoder_grads;
};

inline VaeBatch vae_batch(const neural::MlpNetwork& encoder, const neural::MlpNetwork& decoder, const Matrix& x,
                          const Matrix& eps, double beta) {
    const std::size_t d = decoder.input_dim();
    if (encoder.output_dim() != 2 * d)
        throw ShapeError("vae_batch: encoder must emit 2 x latent dim, got " + std::to_string(encoder.output_dim()));

    VaeBatch out;
    const auto enc_acts = neural::forward(encoder, x);
    const Matrix mu = numkit::slice_cols(enc_acts.output(), 0, d);
    const Matrix logvar = numkit::slice_cols(enc_acts.output(), d, 2 * d);
    const Matrix z = reparameterize(mu, logvar, eps);

    const auto dec_acts = neural::forward(decoder, z);
    const double n = static_cast<double>(x.rows());
    const Matrix& xhat = dec_acts.output();
    Matrix recon_grad = xhat;
    for (std::size_t i = 0; i < xhat.size(); ++i) {
        const double diff = xhat.data()[i] - x.data()[i];
        out.recon += diff * diff / n;
        recon_grad.data()[i] = 2.0 * diff / n;
    }
    auto dec_back = neural::backward(decoder, dec_acts, recon_grad);
    out.decoder_grads = std::move(dec_back.grads);
    const Matrix& dz = dec_back.input_grad;
    for (std::size_t i = 0; i < x.rows(); ++i) out.kl += kl_gaussian(mu.row(i), logvar.row(i));
    out.kl /= n;
    out.total = out.recon + beta * out.kl;

    // d/dmu: chain through z plus beta/n * mu; d/dlogvar: chain times
    // eps * exp(logvar/2)/2 plus beta/(2n) * (exp(logvar) - 1)
    Matrix dout(x.rows(), 2 * d);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) {
            dout(i, k) = dz(i, k) + beta / n * mu(i, k);
            dout(i, d + k) = dz(i, k) * eps(i, k) * 0.5 * std::exp(0.5 * logvar(i, k)) +
                             beta / (2.0 * n) * (std::exp(logvar(i, k)) - 1.0);
        }
    out.encoder_grads = neural::backward(encoder, enc_acts, dout).grads;
    return out;
}

/// Variational autoencoder against a standard-normal prior. encode() returns
/// the posterior mean; the history tracks the total, reconstruction, and KL
/// components (validation uses the deterministic mean decode).
inline EncoderModel train_vae(const Matrix& x, const Matrix& x_val, const EncoderConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw ParamError("train_vae: empty training matrix");
    const std::size_t p = x.cols();
    const auto interior = cfg.interior_widths(p);

    std::vector<std::size_t> enc_widths{p};
    enc_widths.insert(enc_widths.end(), interior.begin(), interior.end());
    enc_widths.push_back(2 * cfg.latent);
    std::vector<neural::Activation> enc_acts(enc_widths.size() - 1, neural::Activation::Relu);
    enc_acts.back() = neural::Activation::Linear;

    std::vector<std::size_t> dec_widths{cfg.latent};
    dec_widths.insert(dec_widths.end(), interior.rbegin(), interior.rend());
    dec_widths.push_back(p);
    std::vector<neural::Activation> dec_acts(dec_widths.size() - 1, neural::Activation::Relu);
    dec_acts.back() = neural::Activation::Linear;

    RngStream root(cfg.seed);
    RngStream init_rng = root.derive("init");

    EncoderModel model;
    model.kind = EncoderKind::Vae;
    model.input_dim = p;
    model.latent_dim = cfg.latent;
    model.config = cfg;
    model.seed = cfg.seed;
    model.encoder = neural::make_mlp(enc_widths, enc_acts, init_rng);
    model.decoder = neural::make_mlp(dec_widths, dec_acts, init_rng);
    model.history.columns = {"train_loss", "val_loss", "recon_loss", "kl_loss"};

    neural::NetOptimizer opt_enc(cfg.optimizer, cfg.lr), opt_dec(cfg.optimizer, cfg.lr);
    RngStream batch_rng = root.derive("batches");
    RngStream noise_rng = root.derive("noise");
    detail::EarlyStopper stopper{cfg.patience};
    neural::MlpNetwork best_enc = model.encoder, best_dec = model.decoder;

    const Matrix val_eps(x_val.rows(), cfg.latent, 0.0); // mean decode for monitoring

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double train_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& idx : neural::make_batches(x.rows(), cfg.batch, batch_rng)) {
            const Matrix xb = numkit::take_rows(x, idx);
            const Matrix eps = numkit::sample(noise_rng, numkit::Gaussian{0.0, 1.0}, xb.rows(), cfg.latent);
            const auto res = vae_batch(model.encoder, model.decoder, xb, eps, cfg.beta);
            detail::check_finite_loss(res.total, "vae", epoch);
            opt_enc.step(model.encoder, res.encoder_grads);
            opt_dec.step(model.decoder, res.decoder_grads);
            const double w = static_cast<double>(idx.size());
            train_sum += res.total * w;
            recon_sum += res.recon * w;
            kl_sum += res.kl * w;
            seen += idx.size();
        }
        detail::check_finite_params(model.encoder, "vae", epoch);
        detail::check_finite_params(model.decoder, "vae", epoch);

        const auto val = vae_batch(model.encoder, model.decoder, x_val, val_eps, cfg.beta);
        detail::check_finite_loss(val.total, "vae", epoch, "validation");
        const double nd = static_cast<double>(seen);
        model.history.append({train_sum / nd, val.total, recon_sum / nd, kl_sum / nd});

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

inline EncoderModel train_vae(const Matrix& x, const EncoderConfig& cfg) { return train_vae(x, x, cfg); }

} // namespace tabrep::encoders
