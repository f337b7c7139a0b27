#pragma once

#include <utility>

#include "actoreg/net/mlp.hpp"

namespace actoreg::net {

// Policy network. The head decides the family: tanh-bounded deterministic or
// diagonal gaussian (unbounded mean, learned state-independent log-std).
class Actor {
  public:
    Actor(MlpSpec spec, Rng& init_rng);

    // Differentiable policy outputs for training losses.
    MlpOut forward(const Tensor& states, Mode mode, Rng* dropout_rng = nullptr);

    // Deterministic evaluation action: tanh head output, or the gaussian
    // mean clamped to the [-1, 1] action box. No gradients recorded.
    Tensor act(const Tensor& states);

    // Diagonal-gaussian log density of the given actions, [m,1].
    Tensor log_prob(const Tensor& states, const Tensor& actions, Mode mode,
                    Rng* dropout_rng = nullptr);

    // Reparameterized sample: mean + std * eps, eps drawn from noise_rng.
    Tensor sample(const Tensor& states, Mode mode, Rng* dropout_rng, Rng& noise_rng);

    Mlp& net() { return mlp_; }
    const MlpSpec& spec() const { return mlp_.spec(); }

  private:
    Mlp mlp_;
};

struct CriticSpec {
    int state_dim = 0;
    int action_dim = 0;
    int hidden_dim = 256;
    int num_hidden_layers = 2;
    bool categorical = false;
    int bins = 101;
    float v_min = 0.0f;
    float v_max = 0.0f;

    void validate() const;
};

// Twin action-value heads over concat(state, action); the heads share no
// parameters. The optional categorical head outputs a distribution over
// fixed support bins and reads values as its expectation.
class Critic {
  public:
    Critic(CriticSpec spec, Rng& init_rng);

    // Q estimates per head, each [m,1].
    std::pair<Tensor, Tensor> q_values(const Tensor& states, const Tensor& actions, Mode mode);
    // Raw bin logits per head, each [m,bins]; categorical spec only.
    std::pair<Tensor, Tensor> logits(const Tensor& states, const Tensor& actions, Mode mode);

    // Evenly spaced support [v_min, v_max], shape [bins,1].
    Tensor bin_centers() const;

    Mlp& q1() { return q1_; }
    Mlp& q2() { return q2_; }
    const CriticSpec& spec() const { return spec_; }

  private:
    Tensor head_input(const Tensor& states, const Tensor& actions) const;
    CriticSpec spec_;
    Mlp q1_, q2_;
};

// State-value network with a scalar linear head.
class ValueNet {
  public:
    ValueNet(int state_dim, int hidden_dim, int num_hidden_layers, Rng& init_rng);
    Tensor value(const Tensor& states, Mode mode);  // [m,1]
    Mlp& net() { return mlp_; }

  private:
    Mlp mlp_;
};

}  // namespace actoreg::net
