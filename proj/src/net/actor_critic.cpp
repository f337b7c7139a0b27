#include "actoreg/net/actor_critic.hpp"

#include <cmath>

namespace actoreg::net {

namespace cc = actoreg::compute;

namespace {
constexpr float kHalfLog2Pi = 0.9189385332046727f;  // 0.5 * log(2*pi)

MlpSpec checked_actor_spec(MlpSpec spec) {
    if (spec.output_head == OutputHead::linear)
        throw config_error("actor: head must be tanh_bounded or gaussian");
    return spec;
}
}  // namespace

Actor::Actor(MlpSpec spec, Rng& init_rng) : mlp_(checked_actor_spec(spec), init_rng) {}

MlpOut Actor::forward(const Tensor& states, Mode mode, Rng* dropout_rng) {
    return mlp_.forward(states, mode, dropout_rng);
}

Tensor Actor::act(const Tensor& states) {
    cc::NoGradGuard guard;
    MlpOut out = mlp_.forward(states, Mode::eval, nullptr);
    if (spec().output_head == OutputHead::gaussian) return cc::clamp(out.output, -1.0f, 1.0f);
    return out.output;
}

Tensor Actor::log_prob(const Tensor& states, const Tensor& actions, Mode mode,
                       Rng* dropout_rng) {
    if (spec().output_head != OutputHead::gaussian)
        throw contract_error("actor: log_prob requires a gaussian head");
    MlpOut out = mlp_.forward(states, mode, dropout_rng);
    Tensor sigma = cc::exp(out.log_std);  // [1, d]
    Tensor z = cc::div(cc::sub(actions, out.output), sigma);
    Tensor elem = cc::sub(cc::mul(cc::square(z), -0.5f), out.log_std);
    elem = cc::add(elem, -kHalfLog2Pi);
    return cc::sum_rows(elem);
}

Tensor Actor::sample(const Tensor& states, Mode mode, Rng* dropout_rng, Rng& noise_rng) {
    if (spec().output_head != OutputHead::gaussian)
        throw contract_error("actor: sample requires a gaussian head");
    MlpOut out = mlp_.forward(states, mode, dropout_rng);
    Tensor eps = Tensor::zeros(out.output.shape());
    noise_rng.fill_normal(eps.mutable_data());
    return cc::add(out.output, cc::mul(eps, cc::exp(out.log_std)));
}

void CriticSpec::validate() const {
    if (state_dim < 1 || action_dim < 1)
        throw config_error("critic: state_dim and action_dim must be >= 1");
    if (categorical) {
        if (bins < 2) throw config_error("critic: categorical head needs >= 2 bins");
        if (!(v_min < v_max)) throw config_error("critic: need v_min < v_max");
    }
}

namespace {
MlpSpec critic_body(const CriticSpec& s) {
    MlpSpec m;
    m.input_dim = s.state_dim + s.action_dim;
    m.output_dim = s.categorical ? s.bins : 1;
    m.hidden_dim = s.hidden_dim;
    m.num_hidden_layers = s.num_hidden_layers;
    m.output_head = OutputHead::linear;
    return m;
}
}  // namespace

Critic::Critic(CriticSpec spec, Rng& init_rng)
    : spec_((spec.validate(), spec)),
      q1_(critic_body(spec_), init_rng),
      q2_(critic_body(spec_), init_rng) {}

Tensor Critic::head_input(const Tensor& states, const Tensor& actions) const {
    if (states.rank() != 2 || states.cols() != spec_.state_dim)
        throw shape_error("critic: states are " + cc::shape_str(states.shape()) + ", expected [m," +
                          std::to_string(spec_.state_dim) + "]");
    if (actions.rank() != 2 || actions.cols() != spec_.action_dim ||
        actions.rows() != states.rows())
        throw shape_error("critic: actions are " + cc::shape_str(actions.shape()) +
                          ", expected [" + std::to_string(states.rows()) + "," +
                          std::to_string(spec_.action_dim) + "]");
    return cc::concat_cols(states, actions);
}

std::pair<Tensor, Tensor> Critic::q_values(const Tensor& states, const Tensor& actions,
                                           Mode mode) {
    Tensor x = head_input(states, actions);
    Tensor y1 = q1_.forward(x, mode).output;
    Tensor y2 = q2_.forward(x, mode).output;
    if (!spec_.categorical) return {y1, y2};
    Tensor centers = bin_centers();
    return {cc::matmul(cc::softmax_rows(y1), centers), cc::matmul(cc::softmax_rows(y2), centers)};
}

std::pair<Tensor, Tensor> Critic::logits(const Tensor& states, const Tensor& actions, Mode mode) {
    if (!spec_.categorical) throw contract_error("critic: logits need a categorical head");
    Tensor x = head_input(states, actions);
    return {q1_.forward(x, mode).output, q2_.forward(x, mode).output};
}

Tensor Critic::bin_centers() const {
    if (!spec_.categorical) throw contract_error("critic: bin_centers need a categorical head");
    std::vector<float> c(static_cast<size_t>(spec_.bins));
    const double step =
        (static_cast<double>(spec_.v_max) - spec_.v_min) / static_cast<double>(spec_.bins - 1);
    for (int i = 0; i < spec_.bins; ++i)
        c[static_cast<size_t>(i)] = static_cast<float>(spec_.v_min + step * i);
    return Tensor::from({spec_.bins, 1}, std::move(c));
}

ValueNet::ValueNet(int state_dim, int hidden_dim, int num_hidden_layers, Rng& init_rng)
    : mlp_(
          [&] {
              MlpSpec s;
              s.input_dim = state_dim;
              s.output_dim = 1;
              s.hidden_dim = hidden_dim;
              s.num_hidden_layers = num_hidden_layers;
              s.output_head = OutputHead::linear;
              return s;
          }(),
          init_rng) {}

Tensor ValueNet::value(const Tensor& states, Mode mode) {
    return mlp_.forward(states, mode).output;
}

}  // namespace actoreg::net
