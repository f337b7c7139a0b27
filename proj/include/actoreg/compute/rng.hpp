#pragma once

#include <cstdint>
#include <span>

namespace actoreg::compute {

// Stream ids used across the framework so that every consumer of randomness
// owns a stream fully determined by (run seed, stream id).
enum class Stream : uint64_t {
    init = 1,
    batch = 2,
    dropout = 3,
    input_noise = 4,
    objective_noise = 5,
    gradient_noise = 6,
    env = 7,
    target_smoothing = 8,
    eval = 9,
    diagnostics = 10,
    bootstrap = 11,
    dataset = 12,
};

// Counter-based generator: sample i of a stream is a pure function of
// (seed, stream, i), so bulk fills can run in parallel and still produce the
// sequence i = 0,1,2,... exactly. Every normal draw consumes two counter
// ticks; every uniform draw consumes one.
class Rng {
  public:
    Rng() : Rng(0, 0) {}
    explicit Rng(uint64_t seed, uint64_t stream = 0);
    Rng(uint64_t seed, Stream stream) : Rng(seed, static_cast<uint64_t>(stream)) {}

    uint64_t next_u64();
    double uniform();              // [0, 1)
    double normal();               // standard normal, Box-Muller
    uint64_t uniform_int(uint64_t n);  // [0, n)

    void fill_normal(std::span<float> out, float mean = 0.0f, float stddev = 1.0f);
    void fill_uniform(std::span<float> out, float lo, float hi);
    // Inverted-dropout mask: each entry is scale with probability keep_prob,
    // else 0. Consumes one tick per entry.
    void fill_mask(std::span<float> out, double keep_prob, float scale);

    uint64_t counter() const { return counter_; }
    Rng substream(uint64_t id) const;  // derived independent stream

  private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

}  // namespace actoreg::compute
