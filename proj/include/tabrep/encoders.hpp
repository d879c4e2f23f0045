#pragma once

#include "tabrep/encoders/aae.hpp"
#include "tabrep/encoders/common.hpp"
#include "tabrep/encoders/dbn.hpp"
#include "tabrep/encoders/ssae.hpp"
#include "tabrep/encoders/vae.hpp"

namespace tabrep::encoders {

/// Dispatch on kind with a shared signature.
inline EncoderModel train_encoder(EncoderKind kind, const Matrix& x, const Matrix& x_val,
                                  const EncoderConfig& cfg) {
    switch (kind) {
        case EncoderKind::Ssae: return train_ssae(x, x_val, cfg);
        case EncoderKind::Dbn: return train_dbn(x, x_val, cfg);
        case EncoderKind::Vae: return train_vae(x, x_val, cfg);
        case EncoderKind::Aae: return train_aae(x, x_val, cfg);
    }
    throw ParamError("train_encoder: unknown kind");
}

} // namespace tabrep::encoders
