#include "actoreg/compute/rng.hpp"

#include <cmath>

#include "actoreg/compute/kernels.hpp"

namespace actoreg::compute {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t tick_value(uint64_t key, uint64_t tick) { return mix64(key + tick * kGolden); }

// (0, 1]: never 0 so log() is safe in Box-Muller.
inline double to_open01(uint64_t x) { return static_cast<double>((x >> 11) + 1) * 0x1.0p-53; }

// [0, 1)
inline double to_half_open01(uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// One normal from two counter ticks.
inline double normal_at(uint64_t key, uint64_t tick) {
    const double u1 = to_open01(tick_value(key, tick));
    const double u2 = to_half_open01(tick_value(key, tick + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : key_(mix64(seed + kGolden * mix64(stream + 1))) {}

uint64_t Rng::next_u64() {
    ++counter_;
    return tick_value(key_, counter_);
}

double Rng::uniform() { return to_half_open01(next_u64()); }

double Rng::normal() {
    const double n = normal_at(key_, counter_ + 1);
    counter_ += 2;
    return n;
}

uint64_t Rng::uniform_int(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

void Rng::fill_normal(std::span<float> out, float mean, float stddev) {
    const uint64_t key = key_;
    const uint64_t base = counter_;
    kernels::parallel_for(out.size(), [&](size_t i) {
        out[i] = mean + stddev * static_cast<float>(normal_at(key, base + 2 * i + 1));
    });
    counter_ += 2 * out.size();
}

void Rng::fill_uniform(std::span<float> out, float lo, float hi) {
    const uint64_t key = key_;
    const uint64_t base = counter_;
    const double width = static_cast<double>(hi) - static_cast<double>(lo);
    kernels::parallel_for(out.size(), [&](size_t i) {
        out[i] = static_cast<float>(lo + width * to_half_open01(tick_value(key, base + i + 1)));
    });
    counter_ += out.size();
}

void Rng::fill_mask(std::span<float> out, double keep_prob, float scale) {
    const uint64_t key = key_;
    const uint64_t base = counter_;
    kernels::parallel_for(out.size(), [&](size_t i) {
        out[i] = to_half_open01(tick_value(key, base + i + 1)) < keep_prob ? scale : 0.0f;
    });
    counter_ += out.size();
}

Rng Rng::substream(uint64_t id) const {
    Rng r;
    r.key_ = mix64(key_ + kGolden * mix64(id + 1));
    r.counter_ = 0;
    return r;
}

}  // namespace actoreg::compute
