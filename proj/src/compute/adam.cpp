#include "actoreg/compute/adam.hpp"

#include <cmath>
#include <string>

#include "actoreg/compute/kernels.hpp"

namespace actoreg::compute {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        const size_t n = static_cast<size_t>(p.numel());
        m_.emplace_back(n, 0.0f);
        v_.emplace_back(n, 0.0f);
    }
}

void Adam::step(float lr_scale) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_));
    const float lr = cfg_.lr * lr_scale;

    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        auto grad = p.grad();
        auto value = p.mutable_data();
        float* m = m_[pi].data();
        float* v = v_[pi].data();
        const size_t n = grad.size();

        for (size_t i = 0; i < n; ++i)
            if (!std::isfinite(grad[i]))
                throw numeric_error("adam: non-finite gradient in parameter " +
                                    std::to_string(pi) + " at step " + std::to_string(t_));

        kernels::parallel_for(n, [&](size_t i) {
            const float g = grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g * g;
            const float mhat = static_cast<float>(m[i] / bc1);
            const float vhat = static_cast<float>(v[i] / bc2);
            value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        });

        for (size_t i = 0; i < n; ++i)
            if (!std::isfinite(value[i]))
                throw numeric_error("adam: non-finite parameter " + std::to_string(pi) +
                                    " after step " + std::to_string(t_));
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

}  // namespace actoreg::compute
