#pragma once

#include <cmath>
#include <vector>

#include "tabrep/encoders/common.hpp"

namespace tabrep::encoders {

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, kKlClamp, 1.0 - kKlClamp); }

} // namespace detail

/// Reconstruction phase: plain MSE through encoder and decoder.
struct AaeReconBatch {
    double recon = 0.0;
    neural::NetGrads encoder_grads;
    neural::NetGrads decoder_grads;
};

inline AaeReconBatch aae_recon_batch(const neural::MlpNetwork& encoder, const neural::MlpNetwork& decoder,
                                     const Matrix& x) {
    AaeReconBatch out;
    const auto enc_acts = neural::forward(encoder, x);
    const auto dec_acts = neural::forward(decoder, enc_acts.output());
    out.recon = neural::mse(x, dec_acts.output());
    auto dec_back = neural::backward(decoder, dec_acts, neural::mse_grad(x, dec_acts.output()));
    out.decoder_grads = std::move(dec_back.grads);
    out.encoder_grads = neural::backward(encoder, enc_acts, dec_back.input_grad).grads;
    return out;
}

/// Regularization phase, discriminator side: cross-entropy separating prior
/// draws (label 1) from encoder outputs (label 0), averaged over both sets.
struct AaeDiscBatch {
    double loss = 0.0;
    double accuracy = 0.0;
    neural::NetGrads discriminator_grads;
};

inline AaeDiscBatch aae_disc_batch(const neural::MlpNetwork& discriminator, const Matrix& z_prior,
                                   const Matrix& z_encoded) {
    if (z_prior.cols() != z_encoded.cols())
        throw ShapeError("aae_disc_batch: latent widths differ, " + numkit::shape_str(z_prior) + " vs " +
                         numkit::shape_str(z_encoded));
    const std::size_t n_real = z_prior.rows(), n_fake = z_encoded.rows();
    Matrix stacked(n_real + n_fake, z_prior.cols());
    for (std::size_t i = 0; i < n_real; ++i)
        std::copy_n(z_prior.data().data() + i * z_prior.cols(), z_prior.cols(),
                    stacked.data().data() + i * stacked.cols());
    for (std::size_t i = 0; i < n_fake; ++i)
        std::copy_n(z_encoded.data().data() + i * z_encoded.cols(), z_encoded.cols(),
                    stacked.data().data() + (n_real + i) * stacked.cols());

    const auto acts = neural::forward(discriminator, stacked);
    const Matrix& d = acts.output();
    const double n = static_cast<double>(n_real + n_fake);

    AaeDiscBatch out;
    Matrix dout(d.rows(), 1, 0.0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const bool real = i < n_real;
        const double p = detail::clamp_prob(d(i, 0));
        out.loss += real ? -std::log(p) : -std::log(1.0 - p);
        if ((d(i, 0) > 0.5) == real) ++correct;
        if (d(i, 0) <= kKlClamp || d(i, 0) >= 1.0 - kKlClamp) continue; // clamped: flat segment
        dout(i, 0) = real ? -1.0 / (n * p) : 1.0 / (n * (1.0 - p));
    }
    out.loss /= n;
    out.accuracy = static_cast<double>(correct) / n;
    out.discriminator_grads = neural::backward(discriminator, acts, dout).grads;
    return out;
}

/// Regularization phase, generator side: the encoder maximizes discriminator
/// confusion with the non-saturating loss -log D(G(x)).
struct AaeGenBatch {
    double loss = 0.0;
    neural::NetGrads encoder_grads;
};

inline AaeGenBatch aae_gen_batch(const neural::MlpNetwork& encoder, const neural::MlpNetwork& discriminator,
                                 const Matrix& x) {
    AaeGenBatch out;
    const auto enc_acts = neural::forward(encoder, x);
    const auto disc_acts = neural::forward(discriminator, enc_acts.output());
    const Matrix& d = disc_acts.output();
    const double n = static_cast<double>(x.rows());

    Matrix dout(d.rows(), 1, 0.0);
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double p = detail::clamp_prob(d(i, 0));
        out.loss += -std::log(p);
        if (d(i, 0) <= kKlClamp || d(i, 0) >= 1.0 - kKlClamp) continue;
        dout(i, 0) = -1.0 / (n * p);
    }
    out.loss /= n;
    const auto disc_back = neural::backward(discriminator, disc_acts, dout);
    out.encoder_grads = neural::backward(encoder, enc_acts, disc_back.input_grad).grads;
    return out;
}

inline double discriminator_accuracy(const neural::MlpNetwork& discriminator, const Matrix& z_prior,
                                     const Matrix& z_encoded) {
    std::size_t correct = 0;
    const Matrix dp = neural::forward(discriminator, z_prior).output();
    for (std::size_t i = 0; i < dp.rows(); ++i)
        if (dp(i, 0) > 0.5) ++correct;
    const Matrix df = neural::forward(discriminator, z_encoded).output();
    for (std::size_t i = 0; i < df.rows(); ++i)
        if (df(i, 0) <= 0.5) ++correct;
    return static_cast<double>(correct) / static_cast<double>(dp.rows() + df.rows());
}

inline neural::MlpNetwork make_discriminator(std::size_t latent, const std::vector<std::size_t>& hidden,
                                             RngStream& rng) {
    std::vector<std::size_t> widths{latent};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    std::vector<neural::Activation> acts(widths.size() - 1, neural::Activation::Relu);
    acts.back() = neural::Activation::Sigmoid;
    return neural::make_mlp(widths, acts, rng);
}

/// Adversarial autoencoder with a deterministic encoder and standard-normal
/// prior. Each batch runs three phases: reconstruction (encoder+decoder),
/// discriminator (prior vs encoded), and generator (encoder fools the
/// discriminator); the history records all three losses.
inline EncoderModel train_aae(const Matrix& x, const Matrix& x_val, const EncoderConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw ParamError("train_aae: empty training matrix");
    const std::size_t p = x.cols();
    const auto interior = cfg.interior_widths(p);

    std::vector<std::size_t> enc_widths{p};
    enc_widths.insert(enc_widths.end(), interior.begin(), interior.end());
    enc_widths.push_back(cfg.latent);
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
    model.kind = EncoderKind::Aae;
    model.input_dim = p;
    model.latent_dim = cfg.latent;
    model.config = cfg;
    model.seed = cfg.seed;
    model.encoder = neural::make_mlp(enc_widths, enc_acts, init_rng);
    model.decoder = neural::make_mlp(dec_widths, dec_acts, init_rng);
    neural::MlpNetwork disc = make_discriminator(cfg.latent, cfg.disc_hidden, init_rng);
    model.history.columns = {"train_loss", "val_loss", "recon_loss", "disc_loss", "gen_loss"};

    const double reg_lr = cfg.regularization_lr();
    neural::NetOptimizer opt_enc(cfg.optimizer, cfg.lr), opt_dec(cfg.optimizer, cfg.lr);
    neural::NetOptimizer opt_disc(cfg.optimizer, reg_lr), opt_gen(cfg.optimizer, reg_lr);
    RngStream batch_rng = root.derive("batches");
    RngStream prior_rng = root.derive("prior");
    detail::EarlyStopper stopper{cfg.patience};
    neural::MlpNetwork best_enc = model.encoder, best_dec = model.decoder;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // anneal all phases so the adversarial game settles instead of orbiting
        const double anneal =
            1.0 / (1.0 + 4.0 * static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
        opt_enc.set_lr(cfg.lr * anneal);
        opt_dec.set_lr(cfg.lr * anneal);
        opt_disc.set_lr(reg_lr * anneal);
        opt_gen.set_lr(reg_lr * anneal);

        double recon_sum = 0.0, disc_sum = 0.0, gen_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& idx : neural::make_batches(x.rows(), cfg.batch, batch_rng)) {
            const Matrix xb = numkit::take_rows(x, idx);

            const auto rec = aae_recon_batch(model.encoder, model.decoder, xb);
            detail::check_finite_loss(rec.recon, "aae", epoch, "reconstruction");
            opt_enc.step(model.encoder, rec.encoder_grads);
            opt_dec.step(model.decoder, rec.decoder_grads);

            // keep the discriminator ahead of the generator
            const Matrix z_fake = neural::forward(model.encoder, xb).output();
            double disc_loss = 0.0;
            for (std::size_t s = 0; s < cfg.disc_steps; ++s) {
                const Matrix z_prior = numkit::sample(prior_rng, numkit::Gaussian{0.0, 1.0}, xb.rows(), cfg.latent);
                const auto dsc = aae_disc_batch(disc, z_prior, z_fake);
                detail::check_finite_loss(dsc.loss, "aae", epoch, "discriminator");
                opt_disc.step(disc, dsc.discriminator_grads);
                disc_loss = dsc.loss;
            }

            const auto gen = aae_gen_batch(model.encoder, disc, xb);
            detail::check_finite_loss(gen.loss, "aae", epoch, "generator");
            opt_gen.step(model.encoder, gen.encoder_grads);

            const double w = static_cast<double>(idx.size());
            recon_sum += rec.recon * w;
            disc_sum += disc_loss * w;
            gen_sum += gen.loss * w;
            seen += idx.size();
        }
        detail::check_finite_params(model.encoder, "aae", epoch);
        detail::check_finite_params(model.decoder, "aae", epoch);
        detail::check_finite_params(disc, "aae", epoch);

        const Matrix val_recon = neural::forward(model.decoder, neural::forward(model.encoder, x_val).output()).output();
        const double val_loss = neural::mse(x_val, val_recon);
        detail::check_finite_loss(val_loss, "aae", epoch, "validation");
        const double nd = static_cast<double>(seen);
        model.history.append({recon_sum / nd, val_loss, recon_sum / nd, disc_sum / nd, gen_sum / nd});

        const bool stop = stopper.update(val_loss);
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

inline EncoderModel train_aae(const Matrix& x, const EncoderConfig& cfg) { return train_aae(x, x, cfg); }

} // namespace tabrep::encoders
