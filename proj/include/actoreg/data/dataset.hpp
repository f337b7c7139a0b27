#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actoreg/data/env.hpp"

namespace actoreg::data {

enum class Tier { random, medium, expert, mixed };
std::string tier_name(Tier t);
Tier tier_from_name(const std::string& s);

// Flat transition storage; all arrays share length `size` (row-major for the
// state/action blocks). Immutable after generation or load.
struct TransitionDataset {
    int state_dim = 0;
    int action_dim = 0;
    int64_t size = 0;
    std::vector<float> states;       // size x state_dim
    std::vector<float> actions;      // size x action_dim
    std::vector<float> rewards;      // size
    std::vector<float> next_states;  // size x state_dim
    std::vector<uint8_t> dones;      // size, 1 on goal termination

    std::string env_name;
    std::string tier;
    uint64_t seed = 0;
    float reward_scale = 1.0f;
    int horizon = 0;

    void validate() const;  // array lengths, finite rewards, bounded actions
};

// Behavior tiers: random = uniform actions; expert = scripted controller;
// medium = expert with N(0, 0.3) action noise and epsilon-greedy 0.3;
// mixed = 50/50 concatenation of random and medium halves.
TransitionDataset generate_dataset(const Environment& env, Tier tier, int64_t size,
                                   uint64_t seed);

struct SplitDataset {
    std::vector<int64_t> train;
    std::vector<int64_t> validation;
};

// Uniform index partition; validation gets floor(n * fraction) entries.
// fraction outside (0, 0.5] or an empty validation share is a config error.
SplitDataset split(int64_t n, double fraction, uint64_t seed);
SplitDataset split(const TransitionDataset& ds, double fraction, uint64_t seed);

// Binary file with CRC32 trailer plus a `<name>.meta.json` sidecar carrying
// env, tier, seed, reward_scale, and horizon.
void save_dataset(const std::string& path, const TransitionDataset& ds);
TransitionDataset load_dataset(const std::string& path);  // throws io_error

// Returns of the complete episodes stored in the dataset. Episodes end at a
// done flag or after `horizon` transitions; a trailing cut-off episode is
// skipped.
std::vector<double> episode_returns(const TransitionDataset& ds, int horizon);

}  // namespace actoreg::data
