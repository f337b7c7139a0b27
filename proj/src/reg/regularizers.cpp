#include "actoreg/reg/regularizers.hpp"

#include <cmath>
#include <limits>

namespace actoreg::reg {

namespace cc = actoreg::compute;

std::string norm_kind_name(NormKind k) {
    switch (k) {
        case NormKind::none: return "none";
        case NormKind::layer: return "layer";
        case NormKind::feature: return "feature";
        case NormKind::group: return "group";
        case NormKind::spectral: return "spectral";
    }
    return "none";
}

NormKind norm_kind_from_name(const std::string& name) {
    if (name == "none") return NormKind::none;
    if (name == "layer") return NormKind::layer;
    if (name == "feature") return NormKind::feature;
    if (name == "group") return NormKind::group;
    if (name == "spectral") return NormKind::spectral;
    throw config_error("unknown norm kind '" + name +
                       "' (expected none|layer|feature|group|spectral)");
}

void RegularizerConfig::validate() const {
    if (weight_decay_omega < 0.0f)
        throw config_error("weight_decay_omega must be >= 0, got " +
                           std::to_string(weight_decay_omega));
    if (weight_decay_alpha < 0.0f || weight_decay_alpha > 1.0f)
        throw config_error("weight_decay_alpha must be in [0,1], got " +
                           std::to_string(weight_decay_alpha));
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
        throw config_error("dropout_rate must be in [0,1), got " + std::to_string(dropout_rate));
    if (group_count < 1)
        throw config_error("group_count must be >= 1, got " + std::to_string(group_count));
    if (input_noise < 0.0f || objective_noise < 0.0f || gradient_noise < 0.0f)
        throw config_error("noise scales must be >= 0");
    if (gradient_noise_decay < 0.0f)
        throw config_error("gradient_noise_decay must be >= 0, got " +
                           std::to_string(gradient_noise_decay));
}

Tensor elastic_net_penalty(std::span<const Tensor> weights, float omega, float alpha) {
    if (omega < 0.0f)
        throw config_error("elastic_net_penalty: omega must be >= 0, got " +
                           std::to_string(omega));
    if (alpha < 0.0f || alpha > 1.0f)
        throw config_error("elastic_net_penalty: alpha must be in [0,1], got " +
                           std::to_string(alpha));
    if (omega == 0.0f || weights.empty()) return Tensor::scalar(0.0f);

    Tensor total;
    for (const Tensor& w : weights) {
        Tensor term;
        if (alpha > 0.0f) term = cc::mul(cc::sum(cc::abs(w)), alpha);
        if (alpha < 1.0f) {
            Tensor l2 = cc::mul(cc::sum(cc::square(w)), 1.0f - alpha);
            term = term.defined() ? cc::add(term, l2) : l2;
        }
        total = total.defined() ? cc::add(total, term) : term;
    }
    return cc::mul(total, omega);
}

Tensor dropout_forward(const Tensor& x, float rate, Rng* rng, Mode mode) {
    if (rate < 0.0f || rate >= 1.0f)
        throw config_error("dropout rate must be in [0,1), got " + std::to_string(rate));
    if (mode == Mode::eval || rate == 0.0f) return x;
    if (rng == nullptr) throw contract_error("dropout_forward: train mode needs an rng");
    Tensor mask = Tensor::zeros(x.shape());
    rng->fill_mask(mask.mutable_data(), 1.0 - static_cast<double>(rate), 1.0f / (1.0f - rate));
    return cc::mul(x, mask);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    return cc::group_norm_rows(x, gamma, beta, 1, eps);
}

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  float eps) {
    return cc::group_norm_rows(x, gamma, beta, groups, eps);
}

FeatureNormState::FeatureNormState(int n)
    : running_mean(Tensor::zeros({1, n})), running_var(Tensor::full({1, n}, 1.0f)) {}

Tensor feature_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    FeatureNormState& state, Mode mode, float eps) {
    const int m = x.rows(), n = x.cols();
    if (state.running_mean.numel() != n)
        throw shape_error("feature_norm: state sized for " +
                          std::to_string(state.running_mean.numel()) + " features, input has " +
                          std::to_string(n));

    Tensor mu_row, var_row;
    if (mode == Mode::train) {
        // Batch statistics as constants: gradients do not flow through them.
        std::vector<float> mu(n), var(n);
        const float* px = x.data().data();
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int r = 0; r < m; ++r) acc += static_cast<double>(px[r * n + j]);
            const double mj = acc / m;
            double dev = 0.0;
            for (int r = 0; r < m; ++r) {
                const double d = static_cast<double>(px[r * n + j]) - mj;
                dev += d * d;
            }
            mu[j] = static_cast<float>(mj);
            var[j] = static_cast<float>(dev / m);
        }
        auto rm = state.running_mean.mutable_data();
        auto rv = state.running_var.mutable_data();
        const float rho = state.momentum;
        for (int j = 0; j < n; ++j) {
            rm[j] = rho * rm[j] + (1.0f - rho) * mu[j];
            rv[j] = rho * rv[j] + (1.0f - rho) * var[j];
        }
        mu_row = Tensor::from({1, n}, std::move(mu));
        var_row = Tensor::from({1, n}, std::move(var));
    } else {
        mu_row = state.running_mean.detach();
        var_row = state.running_var.detach();
    }

    std::vector<float> inv(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        inv[j] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(var_row.data()[j]) +
                                                    static_cast<double>(eps)));
    Tensor inv_row = Tensor::from({1, n}, std::move(inv));
    Tensor y = cc::mul(cc::sub(x, mu_row), inv_row);
    return cc::add(cc::mul(y, gamma), beta);
}

SpectralState::SpectralState(int rows, int cols, Rng& rng) {
    u = Tensor::zeros({1, rows});
    v = Tensor::zeros({cols, 1});
    rng.fill_normal(u.mutable_data());
    rng.fill_normal(v.mutable_data());
    auto normalize = [](std::span<float> s) {
        double nrm = 0.0;
        for (float x : s) nrm += static_cast<double>(x) * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) nrm = 1.0;
        for (float& x : s) x = static_cast<float>(x / nrm);
    };
    normalize(u.mutable_data());
    normalize(v.mutable_data());
}

Tensor spectral_normalize(const Tensor& w, SpectralState& state, int iters, bool update_state) {
    if (w.rank() != 2)
        throw shape_error("spectral_normalize: weight must be 2-D, got " +
                          cc::shape_str(w.shape()));
    const int r = w.dim(0), c = w.dim(1);
    if (state.u.numel() != r || state.v.numel() != c)
        throw shape_error("spectral_normalize: state shaped for " +
                          std::to_string(state.u.numel()) + "x" + std::to_string(state.v.numel()) +
                          ", weight is " + cc::shape_str(w.shape()));

    if (update_state) {
        const float* pw = w.data().data();
        auto pu = state.u.mutable_data();
        auto pv = state.v.mutable_data();
        for (int it = 0; it < iters; ++it) {
            // v <- normalize(W^T u)
            double vn = 0.0;
            std::vector<double> vtmp(static_cast<size_t>(c), 0.0);
            for (int i = 0; i < r; ++i) {
                const double ui = pu[i];
                for (int j = 0; j < c; ++j) vtmp[j] += ui * pw[static_cast<size_t>(i) * c + j];
            }
            for (int j = 0; j < c; ++j) vn += vtmp[j] * vtmp[j];
            vn = std::sqrt(vn);
            if (vn > 1e-12)
                for (int j = 0; j < c; ++j) pv[j] = static_cast<float>(vtmp[j] / vn);
            // u <- normalize(W v)
            double un = 0.0;
            std::vector<double> utmp(static_cast<size_t>(r), 0.0);
            for (int i = 0; i < r; ++i) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j)
                    acc += static_cast<double>(pw[static_cast<size_t>(i) * c + j]) * pv[j];
                utmp[i] = acc;
                un += acc * acc;
            }
            un = std::sqrt(un);
            if (un > 1e-12)
                for (int i = 0; i < r; ++i) pu[i] = static_cast<float>(utmp[i] / un);
        }
    }

    // sigma_hat = u W v, built from ops so gradients reach W; u, v constant.
    Tensor u_const = state.u.detach();
    Tensor v_const = state.v.detach();
    Tensor sigma = cc::matmul(cc::matmul(u_const, w), v_const);  // [1,1]
    sigma = cc::clamp(sigma, 1e-12f, std::numeric_limits<float>::max());
    return cc::div(w, sigma);
}

Tensor inject_noise(const Tensor& y, float nu, Rng& rng) {
    if (nu < 0.0f) throw config_error("inject_noise: nu must be >= 0, got " + std::to_string(nu));
    if (nu == 0.0f) return y;
    Tensor eps = Tensor::zeros(y.shape());
    rng.fill_normal(eps.mutable_data(), 0.0f, nu);
    return cc::add(y, eps);
}

double gradient_noise_scale(double nu, int64_t t, double gamma) {
    if (t < 0) throw contract_error("gradient_noise_scale: t must be >= 0");
    return nu / std::pow(1.0 + static_cast<double>(t), gamma);
}

}  // namespace actoreg::reg
