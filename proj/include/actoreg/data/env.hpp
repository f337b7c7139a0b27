#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "actoreg/common/errors.hpp"
#include "actoreg/compute/rng.hpp"

namespace actoreg::data {

using compute::Rng;
using compute::Stream;

struct StepResult {
    std::vector<float> next_state;
    float reward = 0.0f;
    bool done = false;
};

// Deterministic point-mass control task. The transition function is pure:
// randomness enters only through initial_state draws, so replaying stored
// (state, action) pairs reproduces rewards and next states bit-exactly.
class Environment {
  public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual int horizon() const = 0;
    virtual float reward_scale() const = 0;

    // Start state with zero velocity, position uniform in the start region.
    virtual std::vector<float> initial_state(Rng& rng) const = 0;

    // Actions are clipped to [-1,1]^m before integration. Episodes end when
    // the point enters the goal radius (done) or externally at `horizon`.
    virtual StepResult step(std::span<const float> state,
                            std::span<const float> action) const = 0;

    // Scripted near-optimal controller; reaches the goal within the horizon
    // from any start-region state.
    virtual std::vector<float> expert_action(std::span<const float> state) const = 0;
};

enum class GoalVariant { dense, sparse };

// dense: reward is the negative distance to goal each step.
// sparse: reward is reward_scale once, on the step that enters the goal
// radius; the sparse task adds a wall so the direct path is blocked.
std::unique_ptr<Environment> point_goal_env(GoalVariant variant, int action_dim = 2,
                                            float reward_scale = 1.0f);

// Registry: "point-dense" (m=2, dense), "point-maze" (m=2, sparse, wall,
// scale 100), "point-wide" (m=8 redundant channels, dense).
std::unique_ptr<Environment> make_env(const std::string& name);
std::vector<std::string> env_names();

using Policy = std::function<std::vector<float>(std::span<const float>)>;

// Mean undiscounted return over `episodes` rollouts with seeded starts.
double mean_return(const Environment& env, const Policy& policy, int episodes,
                   uint64_t seed);

// Rollout-based normalization anchors for scoring trained policies.
struct ScoreAnchors {
    double random_return = 0.0;
    double expert_return = 0.0;
};
ScoreAnchors score_anchors(const Environment& env, int episodes, uint64_t seed);

}  // namespace actoreg::data
