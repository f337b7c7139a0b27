#include "actoreg/alg/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>

#include "actoreg/common/errors.hpp"

namespace actoreg::alg {

using compute::Adam;
using compute::AdamConfig;
using compute::NoGradGuard;
using compute::Stream;

namespace {

void check_finite_loss(double v, const char* what, int64_t step) {
    if (!std::isfinite(v))
        throw numeric_error(std::string(what) + ": non-finite loss at step " +
                            std::to_string(step));
}

net::MlpSpec actor_spec(int state_dim, int action_dim, int hidden, int layers,
                        const reg::RegularizerConfig& reg, net::OutputHead head) {
    net::MlpSpec s;
    s.input_dim = state_dim;
    s.output_dim = action_dim;
    s.hidden_dim = hidden;
    s.num_hidden_layers = layers;
    s.output_head = head;
    s.norm_kind = reg.norm_kind;
    s.dropout_rate = reg.dropout_rate;
    s.group_count = reg.group_count;
    return s;
}

net::CriticSpec critic_spec(int state_dim, int action_dim, const RebracConfig& cfg) {
    net::CriticSpec s;
    s.state_dim = state_dim;
    s.action_dim = action_dim;
    s.hidden_dim = cfg.hidden_dim;
    s.num_hidden_layers = cfg.num_hidden_layers;
    s.categorical = cfg.critic_loss == CriticLossKind::categorical;
    s.bins = cfg.bins;
    s.v_min = cfg.v_min;
    s.v_max = cfg.v_max;
    return s;
}

std::vector<Tensor> twin_params(net::Critic& c) {
    auto p = c.q1().parameters();
    auto p2 = c.q2().parameters();
    p.insert(p.end(), p2.begin(), p2.end());
    return p;
}

void copy_values(std::vector<std::pair<std::string, Tensor>> from,
                 std::vector<std::pair<std::string, Tensor>> to) {
    if (from.size() != to.size())
        throw contract_error("target network does not mirror the online network");
    for (size_t i = 0; i < from.size(); ++i) {
        auto s = from[i].second.data();
        auto d = to[i].second.mutable_data();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

bool is_tracking_buffer(const std::string& name) {
    return name.ends_with("running_mean") || name.ends_with("running_var") ||
           name.ends_with("sn_u") || name.ends_with("sn_v");
}

// target <- polyak * online + (1 - polyak) * target for weights; tracking
// buffers are copied outright (mixing power-iteration vectors or running
// statistics would denormalize them).
void polyak_mix(std::vector<std::pair<std::string, Tensor>> online,
                std::vector<std::pair<std::string, Tensor>> target, float polyak) {
    for (size_t i = 0; i < online.size(); ++i) {
        auto s = online[i].second.data();
        auto d = target[i].second.mutable_data();
        if (is_tracking_buffer(online[i].first)) {
            std::copy(s.begin(), s.end(), d.begin());
        } else {
            for (size_t k = 0; k < s.size(); ++k)
                d[k] = polyak * s[k] + (1.0f - polyak) * d[k];
        }
    }
}

void add_gradient_noise(std::vector<Tensor>& params, double scale, Rng& rng) {
    if (scale <= 0.0) return;
    std::vector<float> noise;
    for (auto& p : params) {
        noise.resize(static_cast<size_t>(p.numel()));
        rng.fill_normal(noise, 0.0f, static_cast<float>(scale));
        auto g = p.mutable_grad();
        for (size_t i = 0; i < noise.size(); ++i) g[i] += noise[i];
    }
}

double mean_abs(const Tensor& t) {
    double acc = 0.0;
    for (float v : t.data()) acc += std::fabs(v);
    return acc / static_cast<double>(t.numel());
}

// Stored q-value reads for target math, all under NoGrad.
std::pair<std::vector<float>, std::vector<float>> target_q_pair(net::Critic& critic,
                                                                const Tensor& s,
                                                                const Tensor& a) {
    NoGradGuard guard;
    auto [q1, q2] = critic.q_values(s, a, reg::Mode::eval);
    return {std::vector<float>(q1.data().begin(), q1.data().end()),
            std::vector<float>(q2.data().begin(), q2.data().end())};
}

}  // namespace

void RebracConfig::validate() const {
    if (!(discount > 0.0f && discount < 1.0f))
        throw config_error("rebrac: discount must lie in (0, 1)");
    if (!(polyak > 0.0f && polyak <= 1.0f))
        throw config_error("rebrac: polyak must lie in (0, 1]");
    if (policy_update_delay < 1) throw config_error("rebrac: delay must be >= 1");
    if (batch_size < 1) throw config_error("rebrac: batch_size must be >= 1");
    if (actor_bc_coef < 0.0f || critic_bc_coef < 0.0f)
        throw config_error("rebrac: BC coefficients must be non-negative");
    if (policy_noise < 0.0f || noise_clip < 0.0f)
        throw config_error("rebrac: smoothing noise values must be non-negative");
    if (actor_lr <= 0.0f || critic_lr <= 0.0f)
        throw config_error("rebrac: learning rates must be positive");
    if (critic_loss == CriticLossKind::categorical) {
        if (bins < 2) throw config_error("rebrac: categorical head needs bins >= 2");
        if (!(v_min < v_max)) throw config_error("rebrac: v_min must be below v_max");
    }
    if (hidden_dim < 1 || num_hidden_layers < 1)
        throw config_error("rebrac: network dimensions must be positive");
}

void IqlConfig::validate() const {
    if (!(expectile > 0.0f && expectile < 1.0f))
        throw config_error("iql: expectile must lie in (0, 1)");
    if (!(discount > 0.0f && discount < 1.0f))
        throw config_error("iql: discount must lie in (0, 1)");
    if (!(polyak > 0.0f && polyak <= 1.0f))
        throw config_error("iql: polyak must lie in (0, 1]");
    if (adv_clip <= 0.0f) throw config_error("iql: adv_clip must be positive");
    if (temperature < 0.0f) throw config_error("iql: temperature must be non-negative");
    if (batch_size < 1) throw config_error("iql: batch_size must be >= 1");
    if (lr <= 0.0f) throw config_error("iql: lr must be positive");
    if (cosine_lr && lr_decay_steps < 1)
        throw config_error("iql: lr_decay_steps must be >= 1 with cosine decay");
    if (hidden_dim < 1 || num_hidden_layers < 1)
        throw config_error("iql: network dimensions must be positive");
}

void TrainRunConfig::validate() const {
    if (steps < 1) throw config_error("train_run: steps must be >= 1");
    if (eval_interval < 1 || loss_log_interval < 1)
        throw config_error("train_run: intervals must be >= 1");
}

std::string to_json_line(const LossReport& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["actor_loss"] = r.actor_loss;
    j["critic_loss"] = r.critic_loss;
    j["bc_term"] = r.bc_term;
    j["penalty_term"] = r.penalty_term;
    j["noise_scale"] = r.noise_scale;
    return j.dump();
}

Batch sample_batch(const data::TransitionDataset& ds,
                   const std::vector<int64_t>& indices, int batch_size, Rng& rng) {
    if (indices.empty()) throw config_error("sample_batch: empty index list");
    if (batch_size < 1) throw config_error("sample_batch: batch_size must be >= 1");
    const int n = ds.state_dim, m = ds.action_dim;
    Batch b;
    b.states = Tensor::zeros({batch_size, n});
    b.actions = Tensor::zeros({batch_size, m});
    b.rewards = Tensor::zeros({batch_size, 1});
    b.next_states = Tensor::zeros({batch_size, n});
    b.not_dones = Tensor::zeros({batch_size, 1});
    auto sd = b.states.mutable_data();
    auto ad = b.actions.mutable_data();
    auto rd = b.rewards.mutable_data();
    auto nd = b.next_states.mutable_data();
    auto dd = b.not_dones.mutable_data();
    for (int r = 0; r < batch_size; ++r) {
        const auto pick = indices[rng.uniform_int(indices.size())];
        std::copy_n(ds.states.begin() + pick * n, n, sd.begin() + static_cast<int64_t>(r) * n);
        std::copy_n(ds.actions.begin() + pick * m, m,
                    ad.begin() + static_cast<int64_t>(r) * m);
        rd[static_cast<size_t>(r)] = ds.rewards[static_cast<size_t>(pick)];
        std::copy_n(ds.next_states.begin() + pick * n, n,
                    nd.begin() + static_cast<int64_t>(r) * n);
        dd[static_cast<size_t>(r)] = ds.dones[static_cast<size_t>(pick)] ? 0.0f : 1.0f;
    }
    return b;
}

Tensor two_hot(const std::vector<float>& targets, int bins, float v_min, float v_max) {
    if (bins < 2) throw config_error("two_hot: bins must be >= 2");
    if (!(v_min < v_max)) throw config_error("two_hot: v_min must be below v_max");
    const auto b = static_cast<int>(targets.size());
    if (b < 1) throw config_error("two_hot: empty target list");
    Tensor out = Tensor::zeros({b, bins});
    auto d = out.mutable_data();
    const double width = (static_cast<double>(v_max) - v_min) / (bins - 1);
    for (int i = 0; i < b; ++i) {
        const double y = std::clamp(static_cast<double>(targets[static_cast<size_t>(i)]),
                                    static_cast<double>(v_min),
                                    static_cast<double>(v_max));
        const double u = (y - v_min) / width;
        const int lo = std::min(static_cast<int>(std::floor(u)), bins - 1);
        const int hi = std::min(lo + 1, bins - 1);
        const auto w_hi = static_cast<float>(u - lo);
        d[static_cast<size_t>(i) * bins + lo] += 1.0f - w_hi;
        d[static_cast<size_t>(i) * bins + hi] += w_hi;
    }
    return out;
}

Tensor categorical_critic_loss(const Tensor& logits, const std::vector<float>& targets,
                               float v_min, float v_max) {
    if (logits.shape().size() != 2)
        throw shape_error("categorical_critic_loss: logits must be [batch, bins]");
    const int bins = logits.shape()[1];
    if (static_cast<size_t>(logits.shape()[0]) != targets.size())
        throw shape_error("categorical_critic_loss: batch size mismatch");
    auto project = two_hot(targets, bins, v_min, v_max);
    return compute::neg(
        compute::mean(compute::sum_rows(compute::mul(project,
                                                     compute::log_softmax_rows(logits)))));
}

std::pair<float, float> categorical_value_range(const data::TransitionDataset& ds) {
    auto rets = data::episode_returns(ds, ds.horizon > 0 ? ds.horizon : 100);
    double lo = 0.0, hi = 0.0;
    if (!rets.empty()) {
        lo = *std::min_element(rets.begin(), rets.end());
        hi = *std::max_element(rets.begin(), rets.end());
    }
    const double span = hi - lo;
    if (span <= 0.0) return {static_cast<float>(lo - 0.5), static_cast<float>(hi + 0.5)};
    return {static_cast<float>(lo - 0.1 * span), static_cast<float>(hi + 0.1 * span)};
}

// ---------------------------------------------------------------------------
// ReBRAC

RebracTrainer::RebracTrainer(int state_dim, int action_dim, RebracConfig cfg,
                             reg::RegularizerConfig reg, uint64_t seed)
    : cfg_([&] {
          cfg.validate();
          return cfg;
      }()),
      reg_([&] {
          reg.validate();
          return reg;
      }()),
      reg_active_(reg_.weight_decay_omega > 0.0f || reg_.dropout_rate > 0.0f ||
                  reg_.norm_kind != reg::NormKind::none || reg_.input_noise > 0.0f ||
                  reg_.objective_noise > 0.0f || reg_.gradient_noise > 0.0f),
      actor_([&] {
          Rng init(seed, Stream::init);
          return net::Actor(actor_spec(state_dim, action_dim, cfg_.hidden_dim,
                                       cfg_.num_hidden_layers, reg_,
                                       net::OutputHead::tanh_bounded),
                            init);
      }()),
      actor_target_([&] {
          Rng init(seed + 1, Stream::init);
          return net::Actor(actor_spec(state_dim, action_dim, cfg_.hidden_dim,
                                       cfg_.num_hidden_layers, reg_,
                                       net::OutputHead::tanh_bounded),
                            init);
      }()),
      critic_([&] {
          Rng init(seed, Stream::init);
          init = init.substream(2);
          return net::Critic(critic_spec(state_dim, action_dim, cfg_), init);
      }()),
      critic_target_([&] {
          Rng init(seed + 1, Stream::init);
          init = init.substream(2);
          return net::Critic(critic_spec(state_dim, action_dim, cfg_), init);
      }()),
      actor_opt_(actor_.net().parameters(), AdamConfig{.lr = cfg_.actor_lr}),
      critic_opt_(twin_params(critic_), AdamConfig{.lr = cfg_.critic_lr}),
      dropout_rng_(seed, Stream::dropout),
      input_rng_(seed, Stream::input_noise),
      objective_rng_(seed, Stream::objective_noise),
      gradient_rng_(seed, Stream::gradient_noise),
      smoothing_rng_(seed, Stream::target_smoothing) {
    copy_values(actor_.net().named_tensors(), actor_target_.net().named_tensors());
    copy_values(critic_.q1().named_tensors(), critic_target_.q1().named_tensors());
    copy_values(critic_.q2().named_tensors(), critic_target_.q2().named_tensors());
}

LossReport RebracTrainer::step(const Batch& batch) {
    return step_path(batch, reg_active_);
}

LossReport RebracTrainer::step_path(const Batch& batch, bool regularized) {
    return regularized ? step_impl<true>(batch) : step_impl<false>(batch);
}

template <bool WithReg>
LossReport RebracTrainer::step_impl(const Batch& batch) {
    const int b = batch.states.shape()[0];
    const int m = batch.actions.shape()[1];
    ++t_;

    // --- critic update: y = r + g*(1-d)*(min_i Qt_i(s', a~) - bc * ||a~ - a||^2)
    std::vector<float> y(static_cast<size_t>(b));
    {
        NoGradGuard guard;
        auto next_pi = actor_target_.forward(batch.next_states, reg::Mode::eval).output;
        std::vector<float> smoothing(static_cast<size_t>(b) * m);
        smoothing_rng_.fill_normal(smoothing, 0.0f, cfg_.policy_noise);
        std::vector<float> tilde(static_cast<size_t>(b) * m);
        for (size_t i = 0; i < tilde.size(); ++i) {
            const float eps = std::clamp(smoothing[i], -cfg_.noise_clip, cfg_.noise_clip);
            tilde[i] = std::clamp(next_pi.data()[i] + eps, -1.0f, 1.0f);
        }
        Tensor tilde_t = Tensor::from({b, m}, tilde);
        auto [q1t, q2t] = target_q_pair(critic_target_, batch.next_states, tilde_t);
        for (int i = 0; i < b; ++i) {
            double dist2 = 0.0;
            for (int j = 0; j < m; ++j) {
                const double diff = tilde[static_cast<size_t>(i) * m + j] -
                                    batch.actions.data()[static_cast<size_t>(i) * m + j];
                dist2 += diff * diff;
            }
            const double qmin = std::min(q1t[static_cast<size_t>(i)],
                                         q2t[static_cast<size_t>(i)]);
            const double nd = batch.not_dones.data()[static_cast<size_t>(i)];
            y[static_cast<size_t>(i)] = static_cast<float>(
                batch.rewards.data()[static_cast<size_t>(i)] +
                cfg_.discount * nd * (qmin - cfg_.critic_bc_coef * dist2));
        }
    }
    double critic_loss_val = 0.0;
    {
        Tensor loss;
        if (cfg_.critic_loss == CriticLossKind::mse) {
            auto [q1, q2] = critic_.q_values(batch.states, batch.actions, reg::Mode::train);
            Tensor target = Tensor::from({b, 1}, y);
            loss = compute::add(compute::mean(compute::square(compute::sub(q1, target))),
                                compute::mean(compute::square(compute::sub(q2, target))));
        } else {
            auto [l1, l2] = critic_.logits(batch.states, batch.actions, reg::Mode::train);
            loss = compute::add(categorical_critic_loss(l1, y, cfg_.v_min, cfg_.v_max),
                                categorical_critic_loss(l2, y, cfg_.v_min, cfg_.v_max));
        }
        critic_loss_val = loss.item();
        check_finite_loss(critic_loss_val, "rebrac critic", t_);
        critic_opt_.zero_grad();
        compute::backward(loss);
        critic_opt_.step();
    }

    // --- delayed actor update
    if (t_ % cfg_.policy_update_delay == 0) {
        Tensor actor_states = batch.states;
        if constexpr (WithReg)
            actor_states = reg::inject_noise(batch.states, reg_.input_noise, input_rng_);
        Rng* drop = nullptr;
        if constexpr (WithReg)
            drop = reg_.dropout_rate > 0.0f ? &dropout_rng_ : nullptr;
        auto pi = actor_.forward(actor_states, reg::Mode::train, drop).output;

        auto [q_pi, q2_unused] = critic_.q_values(batch.states, pi, reg::Mode::train);
        (void)q2_unused;
        float lambda = 1.0f;
        if (cfg_.normalize_q)
            lambda = static_cast<float>(1.0 / std::max(mean_abs(q_pi), 1e-6));

        Tensor diff = compute::sub(pi, batch.actions);
        if constexpr (WithReg)
            diff = reg::inject_noise(diff, reg_.objective_noise, objective_rng_);
        Tensor bc = compute::mean(compute::sum_rows(compute::square(diff)));
        const double bc_val = bc.item();

        Tensor loss = compute::add(compute::mul(compute::mean(q_pi), -lambda),
                                   compute::mul(bc, cfg_.actor_bc_coef));
        double penalty_val = 0.0;
        if constexpr (WithReg) {
            if (reg_.weight_decay_omega > 0.0f) {
                auto weights = actor_.net().weight_matrices();
                Tensor pen = reg::elastic_net_penalty(weights, reg_.weight_decay_omega,
                                                      reg_.weight_decay_alpha);
                penalty_val = pen.item();
                loss = compute::add(loss, pen);
            }
        }
        const double actor_loss_val = loss.item();
        check_finite_loss(actor_loss_val, "rebrac actor", t_);
        actor_opt_.zero_grad();
        compute::backward(loss);
        double noise_scale = 0.0;
        if constexpr (WithReg) {
            noise_scale = reg::gradient_noise_scale(reg_.gradient_noise, t_,
                                                    reg_.gradient_noise_decay);
            add_gradient_noise(actor_opt_.params(), noise_scale, gradient_rng_);
        }
        actor_opt_.step();
        last_actor_loss_ = actor_loss_val;
        last_bc_ = cfg_.actor_bc_coef * bc_val;
        last_penalty_ = penalty_val;
        last_noise_ = noise_scale;
    }

    polyak_targets();

    LossReport r;
    r.step = t_;
    r.actor_loss = last_actor_loss_;
    r.critic_loss = critic_loss_val;
    r.bc_term = last_bc_;
    r.penalty_term = last_penalty_;
    r.noise_scale = last_noise_;
    return r;
}

void RebracTrainer::polyak_targets() {
    polyak_mix(actor_.net().named_tensors(), actor_target_.net().named_tensors(),
               cfg_.polyak);
    polyak_mix(critic_.q1().named_tensors(), critic_target_.q1().named_tensors(),
               cfg_.polyak);
    polyak_mix(critic_.q2().named_tensors(), critic_target_.q2().named_tensors(),
               cfg_.polyak);
}

void RebracTrainer::store(net::Checkpoint& ck) {
    ck.meta["algorithm"] = algorithm();
    ck.meta["step"] = std::to_string(t_);
    net::store_module(ck, "actor.", actor_.net().named_tensors());
    net::store_module(ck, "actor_target.", actor_target_.net().named_tensors());
    net::store_module(ck, "critic.q1.", critic_.q1().named_tensors());
    net::store_module(ck, "critic.q2.", critic_.q2().named_tensors());
    net::store_module(ck, "critic_target.q1.", critic_target_.q1().named_tensors());
    net::store_module(ck, "critic_target.q2.", critic_target_.q2().named_tensors());
}

// ---------------------------------------------------------------------------
// IQL

IqlTrainer::IqlTrainer(int state_dim, int action_dim, IqlConfig cfg,
                       reg::RegularizerConfig reg, uint64_t seed)
    : cfg_([&] {
          cfg.validate();
          return cfg;
      }()),
      reg_([&] {
          reg.validate();
          return reg;
      }()),
      reg_active_(reg_.weight_decay_omega > 0.0f || reg_.dropout_rate > 0.0f ||
                  reg_.norm_kind != reg::NormKind::none || reg_.input_noise > 0.0f ||
                  reg_.objective_noise > 0.0f || reg_.gradient_noise > 0.0f),
      actor_([&] {
          Rng init(seed, Stream::init);
          return net::Actor(actor_spec(state_dim, action_dim, cfg_.hidden_dim,
                                       cfg_.num_hidden_layers, reg_,
                                       net::OutputHead::gaussian),
                            init);
      }()),
      critic_([&] {
          Rng init(seed, Stream::init);
          init = init.substream(2);
          net::CriticSpec s;
          s.state_dim = state_dim;
          s.action_dim = action_dim;
          s.hidden_dim = cfg_.hidden_dim;
          s.num_hidden_layers = cfg_.num_hidden_layers;
          return net::Critic(s, init);
      }()),
      critic_target_([&] {
          Rng init(seed + 1, Stream::init);
          init = init.substream(2);
          net::CriticSpec s;
          s.state_dim = state_dim;
          s.action_dim = action_dim;
          s.hidden_dim = cfg_.hidden_dim;
          s.num_hidden_layers = cfg_.num_hidden_layers;
          return net::Critic(s, init);
      }()),
      value_([&] {
          Rng init(seed, Stream::init);
          init = init.substream(3);
          return net::ValueNet(state_dim, cfg_.hidden_dim, cfg_.num_hidden_layers, init);
      }()),
      actor_opt_(actor_.net().parameters(), AdamConfig{.lr = cfg_.lr}),
      critic_opt_(twin_params(critic_), AdamConfig{.lr = cfg_.lr}),
      value_opt_(value_.net().parameters(), AdamConfig{.lr = cfg_.lr}),
      dropout_rng_(seed, Stream::dropout),
      input_rng_(seed, Stream::input_noise),
      objective_rng_(seed, Stream::objective_noise),
      gradient_rng_(seed, Stream::gradient_noise) {
    copy_values(critic_.q1().named_tensors(), critic_target_.q1().named_tensors());
    copy_values(critic_.q2().named_tensors(), critic_target_.q2().named_tensors());
}

double IqlTrainer::actor_lr_scale() const {
    if (!cfg_.cosine_lr) return 1.0;
    const double frac =
        std::min(1.0, static_cast<double>(t_) / static_cast<double>(cfg_.lr_decay_steps));
    return 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

LossReport IqlTrainer::step(const Batch& batch) { return step_path(batch, reg_active_); }

LossReport IqlTrainer::step_path(const Batch& batch, bool regularized) {
    return regularized ? step_impl<true>(batch) : step_impl<false>(batch);
}

template <bool WithReg>
LossReport IqlTrainer::step_impl(const Batch& batch) {
    const int b = batch.states.shape()[0];
    ++t_;

    // q from the target critics and the advantage weights, both detached
    auto [q1t, q2t] = target_q_pair(critic_target_, batch.states, batch.actions);
    std::vector<float> q_min(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i)
        q_min[static_cast<size_t>(i)] =
            std::min(q1t[static_cast<size_t>(i)], q2t[static_cast<size_t>(i)]);

    std::vector<float> weights(static_cast<size_t>(b));
    {
        NoGradGuard guard;
        auto v_now = value_.value(batch.states, reg::Mode::eval);
        std::vector<float> eps(static_cast<size_t>(b), 0.0f);
        if constexpr (WithReg) {
            if (reg_.objective_noise > 0.0f)
                objective_rng_.fill_normal(eps, 0.0f, reg_.objective_noise);
        }
        for (int i = 0; i < b; ++i) {
            const double adv = static_cast<double>(q_min[static_cast<size_t>(i)]) -
                               v_now.data()[static_cast<size_t>(i)];
            const double w =
                std::exp(cfg_.temperature * adv + eps[static_cast<size_t>(i)]);
            weights[static_cast<size_t>(i)] =
                static_cast<float>(std::min(w, static_cast<double>(cfg_.adv_clip)));
        }
    }

    // --- value net: expectile regression of min-target-q
    double value_loss_val = 0.0;
    {
        auto v = value_.value(batch.states, reg::Mode::train);
        Tensor q_const = Tensor::from({b, 1}, q_min);
        auto loss = compute::expectile_loss(compute::sub(q_const, v), cfg_.expectile);
        value_loss_val = loss.item();
        check_finite_loss(value_loss_val, "iql value", t_);
        value_opt_.zero_grad();
        compute::backward(loss);
        value_opt_.step();
    }

    // --- critics toward r + g*(1-d)*V(s') with the freshly updated V
    double critic_loss_val = 0.0;
    {
        std::vector<float> y(static_cast<size_t>(b));
        {
            NoGradGuard guard;
            auto v_next = value_.value(batch.next_states, reg::Mode::eval);
            for (int i = 0; i < b; ++i)
                y[static_cast<size_t>(i)] = static_cast<float>(
                    batch.rewards.data()[static_cast<size_t>(i)] +
                    cfg_.discount * batch.not_dones.data()[static_cast<size_t>(i)] *
                        v_next.data()[static_cast<size_t>(i)]);
        }
        auto [q1, q2] = critic_.q_values(batch.states, batch.actions, reg::Mode::train);
        Tensor target = Tensor::from({b, 1}, y);
        auto loss = compute::add(compute::mean(compute::square(compute::sub(q1, target))),
                                 compute::mean(compute::square(compute::sub(q2, target))));
        critic_loss_val = loss.item();
        check_finite_loss(critic_loss_val, "iql critic", t_);
        critic_opt_.zero_grad();
        compute::backward(loss);
        critic_opt_.step();
    }

    // --- actor: advantage-weighted log-likelihood, every step
    {
        Tensor actor_states = batch.states;
        if constexpr (WithReg)
            actor_states = reg::inject_noise(batch.states, reg_.input_noise, input_rng_);
        Rng* drop = nullptr;
        if constexpr (WithReg)
            drop = reg_.dropout_rate > 0.0f ? &dropout_rng_ : nullptr;
        auto log_pi = actor_.log_prob(actor_states, batch.actions, reg::Mode::train, drop);
        Tensor w_const = Tensor::from({b, 1}, weights);
        Tensor awr = compute::neg(compute::mean(compute::mul(w_const, log_pi)));
        const double awr_val = awr.item();

        Tensor loss = awr;
        double penalty_val = 0.0;
        if constexpr (WithReg) {
            if (reg_.weight_decay_omega > 0.0f) {
                auto weights_list = actor_.net().weight_matrices();
                Tensor pen = reg::elastic_net_penalty(weights_list, reg_.weight_decay_omega,
                                                      reg_.weight_decay_alpha);
                penalty_val = pen.item();
                loss = compute::add(loss, pen);
            }
        }
        const double actor_loss_val = loss.item();
        check_finite_loss(actor_loss_val, "iql actor", t_);
        actor_opt_.zero_grad();
        compute::backward(loss);
        double noise_scale = 0.0;
        if constexpr (WithReg) {
            noise_scale = reg::gradient_noise_scale(reg_.gradient_noise, t_,
                                                    reg_.gradient_noise_decay);
            add_gradient_noise(actor_opt_.params(), noise_scale, gradient_rng_);
        }
        actor_opt_.step(static_cast<float>(actor_lr_scale()));
        last_actor_loss_ = actor_loss_val;
        last_bc_ = awr_val;
        last_penalty_ = penalty_val;
        last_noise_ = noise_scale;
    }

    polyak_targets();

    LossReport r;
    r.step = t_;
    r.actor_loss = last_actor_loss_;
    r.critic_loss = critic_loss_val;
    r.bc_term = last_bc_;
    r.penalty_term = last_penalty_;
    r.noise_scale = last_noise_;
    return r;
}

void IqlTrainer::polyak_targets() {
    polyak_mix(critic_.q1().named_tensors(), critic_target_.q1().named_tensors(),
               cfg_.polyak);
    polyak_mix(critic_.q2().named_tensors(), critic_target_.q2().named_tensors(),
               cfg_.polyak);
}

void IqlTrainer::store(net::Checkpoint& ck) {
    ck.meta["algorithm"] = algorithm();
    ck.meta["step"] = std::to_string(t_);
    net::store_module(ck, "actor.", actor_.net().named_tensors());
    net::store_module(ck, "critic.q1.", critic_.q1().named_tensors());
    net::store_module(ck, "critic.q2.", critic_.q2().named_tensors());
    net::store_module(ck, "critic_target.q1.", critic_target_.q1().named_tensors());
    net::store_module(ck, "critic_target.q2.", critic_target_.q2().named_tensors());
    net::store_module(ck, "value.", value_.net().named_tensors());
}

// ---------------------------------------------------------------------------

void train_run(Trainer& trainer, const data::TransitionDataset& ds,
               const data::SplitDataset& split, const TrainRunConfig& run, uint64_t seed,
               const EvalHook& on_eval, const LossHook& on_loss) {
    run.validate();
    if (split.train.empty()) throw config_error("train_run: empty train split");
    Rng batch_rng(seed, Stream::batch);
    for (int64_t t = 1; t <= run.steps; ++t) {
        Batch batch = sample_batch(ds, split.train, trainer.batch_size(), batch_rng);
        LossReport report = trainer.step(batch);
        if (on_loss && t % run.loss_log_interval == 0) on_loss(report);
        if (on_eval && t % run.eval_interval == 0) on_eval(t, trainer.actor());
    }
}

}  // namespace actoreg::alg
