#include "actoreg/data/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "actoreg/common/errors.hpp"

namespace actoreg::data {

namespace {

constexpr char kMagic[8] = {'O', 'F', 'R', 'L', 'D', 'S', '1', '\0'};
constexpr double kMediumNoise = 0.3;
constexpr double kMediumEpsilon = 0.3;

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian");

std::filesystem::path sidecar_path(const std::string& path) {
    std::filesystem::path p(path);
    p.replace_extension(".meta.json");
    return p;
}

void append_episode_stream(const Environment& env, TransitionDataset& ds, int64_t want,
                           Rng& init_rng, Rng& act_rng, bool random_tier,
                           bool medium_tier) {
    const int m = env.action_dim();
    std::vector<float> noise(static_cast<size_t>(m));
    while (ds.size < want) {
        auto s = env.initial_state(init_rng);
        for (int t = 0; t < env.horizon() && ds.size < want; ++t) {
            std::vector<float> a;
            if (random_tier) {
                a.resize(static_cast<size_t>(m));
                act_rng.fill_uniform(a, -1.0f, 1.0f);
            } else {
                a = env.expert_action(s);
                if (medium_tier) {
                    // epsilon-greedy first so the tick budget per step is
                    // fixed: one uniform + m normals + m uniforms.
                    const bool explore = act_rng.uniform() < kMediumEpsilon;
                    act_rng.fill_normal(noise, 0.0f, static_cast<float>(kMediumNoise));
                    std::vector<float> rand_a(static_cast<size_t>(m));
                    act_rng.fill_uniform(rand_a, -1.0f, 1.0f);
                    if (explore) {
                        a = rand_a;
                    } else {
                        for (int i = 0; i < m; ++i)
                            a[static_cast<size_t>(i)] = std::clamp(
                                a[static_cast<size_t>(i)] + noise[static_cast<size_t>(i)],
                                -1.0f, 1.0f);
                    }
                }
            }
            auto r = env.step(s, a);
            ds.states.insert(ds.states.end(), s.begin(), s.end());
            ds.actions.insert(ds.actions.end(), a.begin(), a.end());
            ds.rewards.push_back(r.reward);
            ds.next_states.insert(ds.next_states.end(), r.next_state.begin(),
                                  r.next_state.end());
            ds.dones.push_back(r.done ? 1 : 0);
            ++ds.size;
            s = std::move(r.next_state);
            if (r.done) break;
        }
    }
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void write_vec(std::ofstream& os, const std::vector<T>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void crc_pod(uint32_t& crc, const T& v) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(&v), sizeof(T));
}

template <typename T>
void crc_vec(uint32_t& crc, const std::vector<T>& v) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(v.data()),
                static_cast<uInt>(v.size() * sizeof(T)));
}

template <typename T>
void read_pod(std::ifstream& is, T& v, const char* section) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw io_error(std::string("dataset file truncated in ") + section);
}

template <typename T>
void read_vec(std::ifstream& is, std::vector<T>& v, size_t count, const char* section) {
    v.resize(count);
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(T)));
    if (!is)
        throw io_error(std::string("dataset file truncated in ") + section);
}

}  // namespace

std::string tier_name(Tier t) {
    switch (t) {
        case Tier::random: return "random";
        case Tier::medium: return "medium";
        case Tier::expert: return "expert";
        case Tier::mixed: return "mixed";
    }
    throw contract_error("tier_name: invalid tier");
}

Tier tier_from_name(const std::string& s) {
    if (s == "random") return Tier::random;
    if (s == "medium") return Tier::medium;
    if (s == "expert") return Tier::expert;
    if (s == "mixed") return Tier::mixed;
    throw config_error("unknown dataset tier '" + s +
                       "' (expected random, medium, expert, or mixed)");
}

void TransitionDataset::validate() const {
    const auto n = static_cast<size_t>(size);
    if (size <= 0) throw io_error("dataset is empty");
    if (state_dim < 1 || action_dim < 1)
        throw io_error("dataset has non-positive dimensions");
    if (states.size() != n * static_cast<size_t>(state_dim) ||
        next_states.size() != n * static_cast<size_t>(state_dim) ||
        actions.size() != n * static_cast<size_t>(action_dim) ||
        rewards.size() != n || dones.size() != n)
        throw io_error("dataset array lengths disagree with header");
    for (float r : rewards)
        if (!std::isfinite(r)) throw io_error("dataset contains non-finite reward");
    for (float a : actions)
        if (!(a >= -1.0f && a <= 1.0f))
            throw io_error("dataset contains out-of-bounds action");
    for (uint8_t d : dones)
        if (d > 1) throw io_error("dataset done flags must be 0 or 1");
}

TransitionDataset generate_dataset(const Environment& env, Tier tier, int64_t size,
                                   uint64_t seed) {
    if (size < 100)
        throw config_error("generate_dataset: size must be >= 100, got " +
                           std::to_string(size));
    TransitionDataset ds;
    ds.state_dim = env.state_dim();
    ds.action_dim = env.action_dim();
    ds.env_name = env.name();
    ds.tier = tier_name(tier);
    ds.seed = seed;
    ds.reward_scale = env.reward_scale();
    ds.horizon = env.horizon();
    ds.states.reserve(static_cast<size_t>(size * ds.state_dim));
    ds.actions.reserve(static_cast<size_t>(size * ds.action_dim));

    if (tier == Tier::mixed) {
        Rng init_a = Rng(seed, Stream::env).substream(1);
        Rng act_a = Rng(seed, Stream::dataset).substream(1);
        append_episode_stream(env, ds, size / 2, init_a, act_a, true, false);
        Rng init_b = Rng(seed, Stream::env).substream(2);
        Rng act_b = Rng(seed, Stream::dataset).substream(2);
        append_episode_stream(env, ds, size, init_b, act_b, false, true);
    } else {
        Rng init_rng(seed, Stream::env);
        Rng act_rng(seed, Stream::dataset);
        append_episode_stream(env, ds, size, init_rng, act_rng, tier == Tier::random,
                              tier == Tier::medium);
    }
    ds.validate();
    return ds;
}

SplitDataset split(int64_t n, double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 0.5))
        throw config_error("split: fraction must lie in (0, 0.5], got " +
                           std::to_string(fraction));
    if (n < 1) throw config_error("split: dataset is empty");
    const auto n_val = static_cast<int64_t>(std::floor(static_cast<double>(n) * fraction));
    if (n_val < 1)
        throw config_error("split: validation share is empty (n=" + std::to_string(n) +
                           ", fraction=" + std::to_string(fraction) + ")");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, Stream::dataset);
    for (int64_t i = n - 1; i > 0; --i) {  // Fisher-Yates
        const auto j = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(i + 1)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    SplitDataset out;
    out.validation.assign(idx.begin(), idx.begin() + n_val);
    out.train.assign(idx.begin() + n_val, idx.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

SplitDataset split(const TransitionDataset& ds, double fraction, uint64_t seed) {
    return split(ds.size, fraction, seed);
}

void save_dataset(const std::string& path, const TransitionDataset& ds) {
    ds.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open '" + path + "' for writing");

    const auto n32 = static_cast<uint32_t>(ds.state_dim);
    const auto m32 = static_cast<uint32_t>(ds.action_dim);
    const auto count = static_cast<uint64_t>(ds.size);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, n32);
    write_pod(os, m32);
    write_pod(os, count);
    write_vec(os, ds.states);
    write_vec(os, ds.actions);
    write_vec(os, ds.rewards);
    write_vec(os, ds.next_states);
    write_vec(os, ds.dones);

    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc_pod(crc, n32);
    crc_pod(crc, m32);
    crc_pod(crc, count);
    crc_vec(crc, ds.states);
    crc_vec(crc, ds.actions);
    crc_vec(crc, ds.rewards);
    crc_vec(crc, ds.next_states);
    crc_vec(crc, ds.dones);
    write_pod(os, crc);
    if (!os) throw io_error("failed writing dataset to '" + path + "'");
    os.close();

    nlohmann::json meta = {
        {"env", ds.env_name},   {"tier", ds.tier},
        {"seed", ds.seed},      {"reward_scale", ds.reward_scale},
        {"horizon", ds.horizon}};
    std::ofstream ms(sidecar_path(path));
    if (!ms) throw io_error("cannot open metadata sidecar for '" + path + "'");
    ms << meta.dump(2) << "\n";
}

TransitionDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open dataset '" + path + "'");

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw io_error("'" + path + "' is not a dataset file (bad magic)");

    TransitionDataset ds;
    uint32_t n32 = 0, m32 = 0;
    uint64_t count = 0;
    read_pod(is, n32, "header");
    read_pod(is, m32, "header");
    read_pod(is, count, "header");
    if (count == 0) throw io_error("'" + path + "' holds an empty dataset");
    if (n32 == 0 || m32 == 0 || count > (1ULL << 32))
        throw io_error("'" + path + "' has an implausible header");
    ds.state_dim = static_cast<int>(n32);
    ds.action_dim = static_cast<int>(m32);
    ds.size = static_cast<int64_t>(count);
    read_vec(is, ds.states, count * n32, "states");
    read_vec(is, ds.actions, count * m32, "actions");
    read_vec(is, ds.rewards, count, "rewards");
    read_vec(is, ds.next_states, count * n32, "next_states");
    read_vec(is, ds.dones, count, "dones");
    uint32_t stored_crc = 0;
    read_pod(is, stored_crc, "checksum");
    is.peek();
    if (!is.eof()) throw io_error("'" + path + "' has trailing bytes after checksum");

    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc_pod(crc, n32);
    crc_pod(crc, m32);
    crc_pod(crc, count);
    crc_vec(crc, ds.states);
    crc_vec(crc, ds.actions);
    crc_vec(crc, ds.rewards);
    crc_vec(crc, ds.next_states);
    crc_vec(crc, ds.dones);
    if (crc != stored_crc)
        throw io_error("'" + path + "' failed its checksum (corrupted file)");

    const auto mp = sidecar_path(path);
    std::ifstream ms(mp);
    if (!ms) throw io_error("missing metadata sidecar '" + mp.string() + "'");
    nlohmann::json meta;
    try {
        ms >> meta;
        ds.env_name = meta.at("env").get<std::string>();
        ds.tier = meta.at("tier").get<std::string>();
        ds.seed = meta.at("seed").get<uint64_t>();
        ds.reward_scale = meta.at("reward_scale").get<float>();
        ds.horizon = meta.at("horizon").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed metadata sidecar '" + mp.string() + "': " + e.what());
    }
    ds.validate();
    return ds;
}

std::vector<double> episode_returns(const TransitionDataset& ds, int horizon) {
    if (horizon < 1) throw config_error("episode_returns: horizon must be >= 1");
    std::vector<double> out;
    int64_t i = 0;
    while (i < ds.size) {
        double ret = 0.0;
        int len = 0;
        bool terminated = false;
        while (i < ds.size && len < horizon) {
            ret += ds.rewards[static_cast<size_t>(i)];
            ++len;
            const bool done = ds.dones[static_cast<size_t>(i)] != 0;
            ++i;
            if (done) {
                terminated = true;
                break;
            }
        }
        if (terminated || len == horizon) out.push_back(ret);
        // else: trailing episode cut off by the dataset size; skip it
    }
    return out;
}

}  // namespace actoreg::data
