#include "actoreg/data/env.hpp"

#include <algorithm>
#include <cmath>

#include "actoreg/common/errors.hpp"

namespace actoreg::data {

namespace {

constexpr double kDt = 0.1;
constexpr double kMaxSpeed = 1.0;
constexpr double kBound = 1.0;

struct PointConfig {
    std::string name;
    int action_dim = 2;
    bool dense = true;
    bool wall = false;
    float reward_scale = 1.0f;
    double goal_x = 0.7, goal_y = 0.7;
    double goal_radius = 0.1;
    double start_lo_x = -0.9, start_hi_x = 0.9;
    double start_lo_y = -0.9, start_hi_y = 0.9;
    int horizon = 100;
};

// Wall occupies x = 0 for y in [-kBound, kWallTop]; passage above.
constexpr double kWallTop = 0.3;

class PointEnv final : public Environment {
  public:
    explicit PointEnv(PointConfig cfg) : cfg_(std::move(cfg)) {}

    std::string name() const override { return cfg_.name; }
    int state_dim() const override { return 4; }
    int action_dim() const override { return cfg_.action_dim; }
    int horizon() const override { return cfg_.horizon; }
    float reward_scale() const override { return cfg_.reward_scale; }

    std::vector<float> initial_state(Rng& rng) const override {
        const double px =
            cfg_.start_lo_x + rng.uniform() * (cfg_.start_hi_x - cfg_.start_lo_x);
        const double py =
            cfg_.start_lo_y + rng.uniform() * (cfg_.start_hi_y - cfg_.start_lo_y);
        return {static_cast<float>(px), static_cast<float>(py), 0.0f, 0.0f};
    }

    StepResult step(std::span<const float> state,
                    std::span<const float> action) const override {
        if (static_cast<int>(state.size()) != 4)
            throw shape_error("env step: state must have 4 entries, got " +
                              std::to_string(state.size()));
        if (static_cast<int>(action.size()) != cfg_.action_dim)
            throw shape_error("env step: action dim mismatch: want " +
                              std::to_string(cfg_.action_dim) + ", got " +
                              std::to_string(action.size()));

        const auto [ax, ay] = effective_accel(action);
        double px = state[0], py = state[1];
        double vx = clampd(state[2] + kDt * ax, -kMaxSpeed, kMaxSpeed);
        double vy = clampd(state[3] + kDt * ay, -kMaxSpeed, kMaxSpeed);
        double nx = px + kDt * vx;
        double ny = py + kDt * vy;

        if (cfg_.wall && px != 0.0 && (px < 0.0) != (nx < 0.0)) {
            const double t = -px / (nx - px);
            const double cross_y = py + t * (ny - py);
            if (cross_y <= kWallTop) {  // blocked: stop just short of the wall
                nx = px < 0.0 ? -1e-3 : 1e-3;
                vx = 0.0;
            }
        }
        if (nx < -kBound || nx > kBound) {
            nx = clampd(nx, -kBound, kBound);
            vx = 0.0;
        }
        if (ny < -kBound || ny > kBound) {
            ny = clampd(ny, -kBound, kBound);
            vy = 0.0;
        }

        const double dist = std::hypot(nx - cfg_.goal_x, ny - cfg_.goal_y);
        const bool done = dist <= cfg_.goal_radius;
        const double raw = cfg_.dense ? -dist : (done ? 1.0 : 0.0);

        StepResult out;
        out.next_state = {static_cast<float>(nx), static_cast<float>(ny),
                          static_cast<float>(vx), static_cast<float>(vy)};
        out.reward = static_cast<float>(raw * cfg_.reward_scale);
        out.done = done;
        return out;
    }

    std::vector<float> expert_action(std::span<const float> state) const override {
        if (static_cast<int>(state.size()) != 4)
            throw shape_error("expert_action: state must have 4 entries");
        const double px = state[0], py = state[1], vx = state[2], vy = state[3];
        double tx = cfg_.goal_x, ty = cfg_.goal_y;
        if (cfg_.wall && px < 0.05 && py < 0.5) {  // detour through the passage
            tx = 0.0;
            ty = 0.65;
        }
        constexpr double kp = 3.0, kd = 3.0;
        const double ax = clampd(kp * (tx - px) - kd * vx, -1.0, 1.0);
        const double ay = clampd(kp * (ty - py) - kd * vy, -1.0, 1.0);
        return spread_accel(ax, ay);
    }

  private:
    static double clampd(double v, double lo, double hi) {
        return std::min(std::max(v, lo), hi);
    }

    // First half of the channels drives x, second half drives y; each axis
    // takes the mean of its group, so redundant channels act together.
    std::pair<double, double> effective_accel(std::span<const float> action) const {
        const int m = cfg_.action_dim;
        const int half = m / 2;
        double ax = 0.0, ay = 0.0;
        for (int i = 0; i < half; ++i) ax += clampd(action[i], -1.0, 1.0);
        for (int i = half; i < m; ++i) ay += clampd(action[i], -1.0, 1.0);
        return {ax / half, ay / (m - half)};
    }

    std::vector<float> spread_accel(double ax, double ay) const {
        const int m = cfg_.action_dim;
        const int half = m / 2;
        std::vector<float> a(static_cast<size_t>(m));
        for (int i = 0; i < half; ++i) a[static_cast<size_t>(i)] = static_cast<float>(ax);
        for (int i = half; i < m; ++i) a[static_cast<size_t>(i)] = static_cast<float>(ay);
        return a;
    }

    PointConfig cfg_;
};

}  // namespace

std::unique_ptr<Environment> point_goal_env(GoalVariant variant, int action_dim,
                                            float reward_scale) {
    if (action_dim < 2 || action_dim % 2 != 0)
        throw config_error("point_goal_env: action_dim must be even and >= 2, got " +
                           std::to_string(action_dim));
    PointConfig cfg;
    cfg.action_dim = action_dim;
    cfg.reward_scale = reward_scale;
    if (variant == GoalVariant::dense) {
        cfg.name = action_dim == 2 ? "point-dense" : "point-wide";
        cfg.dense = true;
        cfg.wall = false;
    } else {
        cfg.name = "point-maze";
        cfg.dense = false;
        cfg.wall = true;
        cfg.goal_x = 0.7;
        cfg.goal_y = -0.7;
        cfg.goal_radius = 0.15;
        cfg.start_lo_x = -0.9;
        cfg.start_hi_x = -0.5;
        cfg.start_lo_y = -0.9;
        cfg.start_hi_y = -0.5;
    }
    return std::make_unique<PointEnv>(cfg);
}

std::unique_ptr<Environment> make_env(const std::string& name) {
    if (name == "point-dense") return point_goal_env(GoalVariant::dense, 2, 1.0f);
    if (name == "point-maze") return point_goal_env(GoalVariant::sparse, 2, 100.0f);
    if (name == "point-wide") return point_goal_env(GoalVariant::dense, 8, 1.0f);
    throw config_error("make_env: unknown environment '" + name +
                       "' (expected point-dense, point-maze, or point-wide)");
}

std::vector<std::string> env_names() { return {"point-dense", "point-maze", "point-wide"}; }

double mean_return(const Environment& env, const Policy& policy, int episodes,
                   uint64_t seed) {
    if (episodes < 1) throw config_error("mean_return: episodes must be >= 1");
    Rng rng(seed, Stream::env);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto s = env.initial_state(rng);
        double ret = 0.0;
        for (int t = 0; t < env.horizon(); ++t) {
            auto a = policy(std::span<const float>(s));
            auto r = env.step(s, a);
            ret += r.reward;
            s = std::move(r.next_state);
            if (r.done) break;
        }
        total += ret;
    }
    return total / episodes;
}

ScoreAnchors score_anchors(const Environment& env, int episodes, uint64_t seed) {
    Rng act_rng(seed, Stream::dataset);
    const int m = env.action_dim();
    Policy random_policy = [&](std::span<const float>) {
        std::vector<float> a(static_cast<size_t>(m));
        act_rng.fill_uniform(a, -1.0f, 1.0f);
        return a;
    };
    Policy expert_policy = [&](std::span<const float> s) { return env.expert_action(s); };
    ScoreAnchors anchors;
    // Same seed for both: anchors share start states, so the gap reflects
    // the policies rather than the draw of initial conditions.
    anchors.random_return = mean_return(env, random_policy, episodes, seed);
    anchors.expert_return = mean_return(env, expert_policy, episodes, seed);
    return anchors;
}

}  // namespace actoreg::data
