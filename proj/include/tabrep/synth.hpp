#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tabrep/dataio.hpp"
#include "tabrep/matrix.hpp"
#include "tabrep/rng.hpp"

namespace tabrep::synth {

using dataio::ColumnKind;
using dataio::TabularDataset;
using numkit::Matrix;
using numkit::RngStream;

/// Latent-factor regression benchmark: z ~ N(0, I) in a small latent space,
/// x = a two-layer random tanh expansion of z plus noise in a wide ambient
/// space, y linear in z plus noise. Learners never see z; recovering it is
/// what representation learning is for.
struct LatentFactorSpec {
    std::size_t n = 1000;
    std::size_t latent = 4;
    std::size_t ambient = 100;
    std::size_t expansion_width = 32; // hidden width of the random feature map
    double tanh_scale = 2.0;          // pre-activation scale; larger saturates harder
    double x_noise = 0.3;
    double y_noise = 0.3;
    std::uint64_t seed = 0;
};

struct LatentFactorData {
    TabularDataset dataset;
    Matrix factors; // the hidden z, for diagnostics only
};

inline LatentFactorData make_latent_factor(const LatentFactorSpec& spec) {
    RngStream rng(spec.seed);
    const Matrix z = numkit::sample(rng, numkit::Gaussian{0.0, 1.0}, spec.n, spec.latent);

    // two random tanh layers with offsets: smooth, invertible in information
    // but far from linearly readable
    auto random_layer = [&](const Matrix& input, std::size_t width) {
        const double sd = spec.tanh_scale / std::sqrt(static_cast<double>(input.cols()));
        const Matrix w = numkit::sample(rng, numkit::Gaussian{0.0, sd}, input.cols(), width);
        const Matrix b = numkit::sample(rng, numkit::Gaussian{0.0, 0.5 * spec.tanh_scale}, 1, width);
        Matrix out = numkit::matmul(input, w);
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < width; ++j) out(i, j) = std::tanh(out(i, j) + b(0, j));
        return out;
    };
    const Matrix hidden = random_layer(z, spec.expansion_width);
    Matrix x = random_layer(hidden, spec.ambient);
    if (spec.x_noise > 0.0) {
        const Matrix e = numkit::sample(rng, numkit::Gaussian{0.0, spec.x_noise}, spec.n, spec.ambient);
        x = x + e;
    }

    // fixed coefficient pattern across the latent dims: 2, -1.5, 1, 0.5, 2, ...
    const double pattern[4] = {2.0, -1.5, 1.0, 0.5};
    std::vector<double> y(spec.n, 0.0);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t d = 0; d < spec.latent; ++d) y[i] += pattern[d % 4] * z(i, d);
        y[i] += spec.y_noise * rng.next_gaussian();
    }

    LatentFactorData out;
    out.factors = z;
    dataio::FeatureSchema schema;
    for (std::size_t j = 0; j < spec.ambient; ++j)
        schema.columns.push_back({"x" + std::to_string(j), ColumnKind::Numeric, {}});
    schema.columns.push_back({"y", ColumnKind::Target, {}});
    out.dataset.schema = schema;
    out.dataset.numeric = std::move(x);
    out.dataset.target = std::move(y);
    out.dataset.missing.assign(schema.columns.size(), std::vector<std::uint8_t>(spec.n, 0));
    return out;
}

} // namespace tabrep::synth
