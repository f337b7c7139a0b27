#pragma once

#include <span>
#include <string>
#include <vector>

#include "actoreg/compute/rng.hpp"
#include "actoreg/compute/tensor.hpp"

namespace actoreg::reg {

using compute::Rng;
using compute::Tensor;

enum class Mode { train, eval };

enum class NormKind { none, layer, feature, group, spectral };

std::string norm_kind_name(NormKind k);
NormKind norm_kind_from_name(const std::string& name);  // throws config_error

// Full regularizer selection for one actor. All techniques can be stacked;
// each is inert at its zero value.
struct RegularizerConfig {
    float weight_decay_omega = 0.0f;  // penalty strength
    float weight_decay_alpha = 0.0f;  // 0 = L2, 0.5 = elastic net, 1 = L1
    float dropout_rate = 0.0f;
    NormKind norm_kind = NormKind::none;
    int group_count = 8;  // group norm only
    float input_noise = 0.0f;
    float objective_noise = 0.0f;
    float gradient_noise = 0.0f;
    float gradient_noise_decay = 0.55f;

    void validate() const;  // throws config_error
};

// omega * (alpha * sum|W| + (1 - alpha) * sum W^2) over the given weight
// matrices (biases excluded by the caller). Differentiable; the L1 term uses
// subgradient 0 at exact zeros.
Tensor elastic_net_penalty(std::span<const Tensor> weights, float omega, float alpha);

// Inverted dropout: train mode zeroes each unit with probability `rate` and
// scales survivors by 1/(1-rate), so eval mode is the identity.
Tensor dropout_forward(const Tensor& x, float rate, Rng* rng, Mode mode);

// Per-sample normalization across all features, then affine.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

// Layer norm applied independently within contiguous feature groups.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  float eps = 1e-5f);

// Per-feature standardization across the batch dimension. Train mode
// normalizes with the current batch statistics (taken as constants) and
// folds them into the running estimates; eval mode normalizes with the
// running estimates. Running stats start at mean 0, variance 1.
struct FeatureNormState {
    Tensor running_mean;  // [n], not trainable
    Tensor running_var;   // [n]
    float momentum = 0.99f;

    explicit FeatureNormState(int n = 0);
};

Tensor feature_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    FeatureNormState& state, Mode mode, float eps = 1e-5f);

// Power-iteration state for one weight matrix.
struct SpectralState {
    Tensor u;  // [1, rows]
    Tensor v;  // [cols, 1]

    SpectralState() = default;
    SpectralState(int rows, int cols, Rng& rng);
};

// W / max(sigma_hat, 1e-12) where sigma_hat = u^T W v is the power-iteration
// estimate of the largest singular value. Runs `iters` power iterations
// (updating the state in place) when update_state is set; gradients flow
// through W only, u and v are treated as constants.
Tensor spectral_normalize(const Tensor& w, SpectralState& state, int iters = 1,
                          bool update_state = true);

// y + nu * eps with fresh standard-normal eps per call; nu = 0 returns y
// unchanged. Gradients pass through y untouched.
Tensor inject_noise(const Tensor& y, float nu, Rng& rng);

// nu / (1 + t)^gamma, the decayed standard deviation applied to actor
// gradients before the optimizer step.
double gradient_noise_scale(double nu, int64_t t, double gamma);

}  // namespace actoreg::reg
