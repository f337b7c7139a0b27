#pragma once

#include <cstdint>
#include <vector>

#include "actoreg/compute/tensor.hpp"

namespace actoreg::compute {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Adam with bias correction. Moment buffers are owned here, keyed by the
// position of each parameter in the list passed at construction.
class Adam {
  public:
    Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    // One update from the parameters' current grad buffers. lr_scale scales
    // the base learning rate for this step only (schedule hook). Throws
    // numeric_error on non-finite gradients or parameters.
    void step(float lr_scale = 1.0f);
    void zero_grad();

    int64_t t() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    std::vector<Tensor>& params() { return params_; }

    // Moment access for checkpointing.
    std::vector<std::vector<float>>& m() { return m_; }
    std::vector<std::vector<float>>& v() { return v_; }
    void set_t(int64_t t) { t_ = t; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> m_, v_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace actoreg::compute
