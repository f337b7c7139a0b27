#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "actoreg/compute/adam.hpp"
#include "actoreg/data/dataset.hpp"
#include "actoreg/net/actor_critic.hpp"
#include "actoreg/net/checkpoint.hpp"
#include "actoreg/reg/regularizers.hpp"

namespace actoreg::alg {

using compute::Rng;
using compute::Tensor;

enum class CriticLossKind { mse, categorical };

// Deterministic-policy trainer with twin critics, smoothed target actions,
// and decoupled behavior-cloning penalties on the actor and on the TD target.
struct RebracConfig {
    float actor_bc_coef = 0.01f;   // actor-side BC penalty weight
    float critic_bc_coef = 0.01f;  // TD-target penalty weight
    float policy_noise = 0.2f;     // target-action smoothing stddev
    float noise_clip = 0.5f;
    int policy_update_delay = 2;
    float discount = 0.99f;  // 0.999 on maze-type tasks
    float polyak = 5e-3f;
    int batch_size = 1024;
    float actor_lr = 1e-3f;
    float critic_lr = 1e-3f;
    bool normalize_q = true;  // scale the -Q term by 1/mean|Q|
    CriticLossKind critic_loss = CriticLossKind::mse;
    int bins = 101;  // categorical head only
    float v_min = -1.0f;
    float v_max = 1.0f;
    int hidden_dim = 256;
    int num_hidden_layers = 3;
    void validate() const;
};

// Expectile-value trainer with advantage-weighted policy extraction.
struct IqlConfig {
    float expectile = 0.7f;     // in (0,1); asymmetric above 0.5
    float temperature = 3.0f;   // advantage weight sharpness
    float adv_clip = 100.0f;    // cap on exp(temperature * advantage)
    float discount = 0.99f;
    float polyak = 5e-3f;
    int batch_size = 256;
    float lr = 3e-4f;
    bool cosine_lr = true;           // actor-only cosine decay to zero
    int64_t lr_decay_steps = 50000;  // cosine period = total training steps
    int hidden_dim = 256;
    int num_hidden_layers = 2;
    void validate() const;
};

// One JSON line per report: {step, actor_loss, critic_loss, bc_term,
// penalty_term, noise_scale}. Actor-side fields hold the values from the
// most recent actor update.
struct LossReport {
    int64_t step = 0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double bc_term = 0.0;       // BC / advantage-weighted likelihood term
    double penalty_term = 0.0;  // weight-decay contribution
    double noise_scale = 0.0;   // gradient-noise scale at the actor update
};
std::string to_json_line(const LossReport& r);

struct Batch {
    Tensor states;       // [B, n]
    Tensor actions;      // [B, m]
    Tensor rewards;      // [B, 1]
    Tensor next_states;  // [B, n]
    Tensor not_dones;    // [B, 1], 1 - done
};

// Uniform with-replacement draw of `batch_size` rows from `indices`.
Batch sample_batch(const data::TransitionDataset& ds,
                   const std::vector<int64_t>& indices, int batch_size, Rng& rng);

// Two-hot projection of clamped scalar targets onto an even bin grid, and
// the cross-entropy loss between that projection and predicted logits.
Tensor two_hot(const std::vector<float>& targets, int bins, float v_min, float v_max);
Tensor categorical_critic_loss(const Tensor& logits, const std::vector<float>& targets,
                               float v_min, float v_max);

// Even-coverage value support for a dataset: the episode-return range padded
// by 10% on each side (unit width when degenerate).
std::pair<float, float> categorical_value_range(const data::TransitionDataset& ds);

class Trainer {
  public:
    virtual ~Trainer() = default;
    virtual LossReport step(const Batch& batch) = 0;
    virtual net::Actor& actor() = 0;
    virtual int64_t steps_done() const = 0;
    virtual int batch_size() const = 0;
    virtual std::string algorithm() const = 0;
    // Snapshot of every network (online and target) plus the step counter.
    virtual void store(net::Checkpoint& ck) = 0;
};

class RebracTrainer final : public Trainer {
  public:
    RebracTrainer(int state_dim, int action_dim, RebracConfig cfg,
                  reg::RegularizerConfig reg, uint64_t seed);

    LossReport step(const Batch& batch) override;
    // Explicit loss-path selection: `regularized` false evaluates the plain
    // loss expression with every regularizer hook absent. The equivalence
    // tests drive both paths; `step` dispatches on the config.
    LossReport step_path(const Batch& batch, bool regularized);

    net::Actor& actor() override { return actor_; }
    net::Critic& critic() { return critic_; }
    net::Actor& actor_target() { return actor_target_; }
    net::Critic& critic_target() { return critic_target_; }
    int64_t steps_done() const override { return t_; }
    int batch_size() const override { return cfg_.batch_size; }
    std::string algorithm() const override { return "rebrac"; }
    void store(net::Checkpoint& ck) override;

  private:
    template <bool WithReg>
    LossReport step_impl(const Batch& batch);
    void polyak_targets();

    RebracConfig cfg_;
    reg::RegularizerConfig reg_;
    bool reg_active_;
    net::Actor actor_, actor_target_;
    net::Critic critic_, critic_target_;
    compute::Adam actor_opt_, critic_opt_;
    Rng dropout_rng_, input_rng_, objective_rng_, gradient_rng_, smoothing_rng_;
    int64_t t_ = 0;
    double last_actor_loss_ = 0, last_bc_ = 0, last_penalty_ = 0, last_noise_ = 0;
};

class IqlTrainer final : public Trainer {
  public:
    IqlTrainer(int state_dim, int action_dim, IqlConfig cfg, reg::RegularizerConfig reg,
               uint64_t seed);

    LossReport step(const Batch& batch) override;
    LossReport step_path(const Batch& batch, bool regularized);

    net::Actor& actor() override { return actor_; }
    net::Critic& critic() { return critic_; }
    net::ValueNet& value() { return value_; }
    int64_t steps_done() const override { return t_; }
    int batch_size() const override { return cfg_.batch_size; }
    std::string algorithm() const override { return "iql"; }
    void store(net::Checkpoint& ck) override;
    double actor_lr_scale() const;  // cosine factor at the current step

  private:
    template <bool WithReg>
    LossReport step_impl(const Batch& batch);
    void polyak_targets();

    IqlConfig cfg_;
    reg::RegularizerConfig reg_;
    bool reg_active_;
    net::Actor actor_;
    net::Critic critic_, critic_target_;
    net::ValueNet value_;
    compute::Adam actor_opt_, critic_opt_, value_opt_;
    Rng dropout_rng_, input_rng_, objective_rng_, gradient_rng_;
    int64_t t_ = 0;
    double last_actor_loss_ = 0, last_bc_ = 0, last_penalty_ = 0, last_noise_ = 0;
};

struct TrainRunConfig {
    int64_t steps = 50000;
    int64_t eval_interval = 2500;
    int64_t loss_log_interval = 100;
    void validate() const;
};

using EvalHook = std::function<void(int64_t step, net::Actor& actor)>;
using LossHook = std::function<void(const LossReport& report)>;

// Runs `steps` trainer updates on batches drawn from the train split,
// invoking the hooks at their intervals (the eval hook fires on multiples of
// eval_interval). Fully deterministic for a fixed seed.
void train_run(Trainer& trainer, const data::TransitionDataset& ds,
               const data::SplitDataset& split, const TrainRunConfig& run, uint64_t seed,
               const EvalHook& on_eval = {}, const LossHook& on_loss = {});

}  // namespace actoreg::alg
