#include "actoreg/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "actoreg/common/errors.hpp"
#include "actoreg/compute/rng.hpp"

namespace actoreg::stats {

using compute::Rng;
using compute::Stream;

void ScoreMatrix::validate() const {
    if (tasks.empty()) throw config_error("score matrix: no tasks");
    if (scores.empty()) throw config_error("score matrix: no runs");
    if (seeds.size() != scores.size())
        throw config_error("score matrix: one seed per run required");
    for (const auto& row : scores) {
        if (row.size() != tasks.size())
            throw config_error("score matrix: ragged rows (missing entries)");
        for (double v : row)
            if (!std::isfinite(v)) throw config_error("score matrix: non-finite score");
    }
    if (std::set<std::string>(tasks.begin(), tasks.end()).size() != tasks.size())
        throw config_error("score matrix: duplicate task names");
    if (std::set<uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw config_error("score matrix: duplicate seeds");
}

double normalized_score(double raw, double random_ref, double expert_ref) {
    if (!(expert_ref > random_ref))
        throw config_error("normalized_score: expert reference must exceed random reference");
    return 100.0 * (raw - random_ref) / (expert_ref - random_ref);
}

double rar(const EvalSeries& series, int n) {
    if (n < 1) throw config_error("rar: window must be >= 1");
    const auto len = static_cast<int>(series.returns.size());
    if (len < n)
        throw config_error("rar: series of length " + std::to_string(len) +
                           " is shorter than the window " + std::to_string(n));
    double acc = 0.0;
    for (int i = len - n; i < len; ++i) acc += series.returns[static_cast<size_t>(i)];
    return acc / n;
}

int default_rar_window(bool sparse) { return sparse ? 5 : 10; }

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> flattened(const ScoreMatrix& m) {
    std::vector<double> flat;
    flat.reserve(m.scores.size() * m.tasks.size());
    for (const auto& row : m.scores) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
}

// Linear-interpolation percentile on a sorted sample, q in [0, 1].
double percentile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// One stratified resample: run indices redrawn with replacement within each
// task column, consuming exactly runs*tasks uniform draws.
ScoreMatrix resample(const ScoreMatrix& m, Rng& rng) {
    ScoreMatrix out = m;
    const int r = m.runs(), t = m.task_count();
    for (int task = 0; task < t; ++task)
        for (int run = 0; run < r; ++run) {
            const auto pick = static_cast<size_t>(rng.uniform_int(static_cast<uint64_t>(r)));
            out.scores[static_cast<size_t>(run)][static_cast<size_t>(task)] =
                m.scores[pick][static_cast<size_t>(task)];
        }
    return out;
}

}  // namespace

double median_score(const ScoreMatrix& m) {
    m.validate();
    std::vector<double> task_means(m.tasks.size(), 0.0);
    for (const auto& row : m.scores)
        for (size_t t = 0; t < row.size(); ++t) task_means[t] += row[t];
    for (auto& v : task_means) v /= m.runs();
    return median_of(std::move(task_means));
}

double iqm(const ScoreMatrix& m) {
    m.validate();
    auto flat = flattened(m);
    std::sort(flat.begin(), flat.end());
    const auto drop = static_cast<size_t>(std::floor(0.25 * static_cast<double>(flat.size())));
    double acc = 0.0;
    size_t kept = 0;
    for (size_t i = drop; i < flat.size() - drop; ++i) {
        acc += flat[i];
        ++kept;
    }
    return acc / static_cast<double>(kept);
}

double grand_mean(const ScoreMatrix& m) {
    m.validate();
    auto flat = flattened(m);
    double acc = 0.0;
    for (double v : flat) acc += v;
    return acc / static_cast<double>(flat.size());
}

double optimality_gap(const ScoreMatrix& m) {
    m.validate();
    auto flat = flattened(m);
    double acc = 0.0;
    for (double v : flat) acc += std::max(0.0, 1.0 - v / 100.0);
    return acc / static_cast<double>(flat.size());
}

ConfidenceInterval stratified_bootstrap_ci(
    const ScoreMatrix& m, const std::function<double(const ScoreMatrix&)>& metric,
    int resamples, uint64_t seed) {
    if (resamples < 2) throw config_error("bootstrap: need at least 2 resamples");
    std::vector<double> values(static_cast<size_t>(resamples));
    Rng base(seed, Stream::bootstrap);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < resamples; ++i) {
        Rng rng = base.substream(static_cast<uint64_t>(i));
        values[static_cast<size_t>(i)] = metric(resample(m, rng));
    }
    std::sort(values.begin(), values.end());
    return {percentile_sorted(values, 0.025), percentile_sorted(values, 0.975)};
}

AggregateReport aggregate_metrics(const ScoreMatrix& m, int resamples, uint64_t seed) {
    m.validate();
    if (m.runs() < 2) throw config_error("aggregate_metrics: need at least 2 runs");
    AggregateReport rep;
    rep.median.value = median_score(m);
    rep.iqm.value = iqm(m);
    rep.mean.value = grand_mean(m);
    rep.optimality_gap.value = optimality_gap(m);
    rep.median.ci = stratified_bootstrap_ci(m, median_score, resamples, seed);
    rep.iqm.ci = stratified_bootstrap_ci(m, iqm, resamples, seed);
    rep.mean.ci = stratified_bootstrap_ci(m, grand_mean, resamples, seed);
    rep.optimality_gap.ci = stratified_bootstrap_ci(m, optimality_gap, resamples, seed);
    return rep;
}

double poi_point(const ScoreMatrix& a, const ScoreMatrix& b) {
    a.validate();
    b.validate();
    if (a.tasks != b.tasks)
        throw config_error("probability_of_improvement: task lists differ");
    double acc = 0.0;
    for (size_t t = 0; t < a.tasks.size(); ++t) {
        double wins = 0.0;
        for (const auto& ra : a.scores)
            for (const auto& rb : b.scores) {
                if (ra[t] > rb[t])
                    wins += 1.0;
                else if (ra[t] == rb[t])
                    wins += 0.5;
            }
        acc += wins / (static_cast<double>(a.runs()) * b.runs());
    }
    return acc / static_cast<double>(a.tasks.size());
}

MetricWithCI probability_of_improvement(const ScoreMatrix& a, const ScoreMatrix& b,
                                        int resamples, uint64_t seed) {
    MetricWithCI out;
    out.value = poi_point(a, b);
    if (resamples < 2) throw config_error("bootstrap: need at least 2 resamples");
    std::vector<double> values(static_cast<size_t>(resamples));
    Rng base(seed, Stream::bootstrap);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < resamples; ++i) {
        Rng rng = base.substream(static_cast<uint64_t>(i));
        ScoreMatrix ra = resample(a, rng);
        ScoreMatrix rb = resample(b, rng);
        values[static_cast<size_t>(i)] = poi_point(ra, rb);
    }
    std::sort(values.begin(), values.end());
    out.ci = {percentile_sorted(values, 0.025), percentile_sorted(values, 0.975)};
    return out;
}

std::vector<double> performance_profile(const ScoreMatrix& m,
                                        const std::vector<double>& thresholds) {
    m.validate();
    if (thresholds.empty()) throw config_error("performance_profile: empty thresholds");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw config_error("performance_profile: thresholds must be ascending");
    auto flat = flattened(m);
    std::vector<double> curve(thresholds.size(), 0.0);
    for (size_t k = 0; k < thresholds.size(); ++k) {
        int above = 0;
        for (double v : flat)
            if (v / 100.0 > thresholds[k]) ++above;
        curve[k] = static_cast<double>(above) / static_cast<double>(flat.size());
    }
    return curve;
}

namespace {

// Same rollout structure as the clean evaluator, with an extra noise stream
// that perturbs either the policy input or its output each step.
double noisy_mean_return(const data::Environment& env, const data::Policy& policy,
                         NoiseMode mode, float sigma, int episodes, uint64_t seed) {
    Rng env_rng(seed, Stream::env);
    Rng noise_rng(seed, Stream::eval);
    const int n = env.state_dim();
    const int m = env.action_dim();
    std::vector<float> noise(static_cast<size_t>(std::max(n, m)));
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto s = env.initial_state(env_rng);
        double ret = 0.0;
        for (int t = 0; t < env.horizon(); ++t) {
            std::vector<float> obs = s;
            if (mode == NoiseMode::observation && sigma > 0.0f) {
                noise_rng.fill_normal(std::span<float>(noise.data(), obs.size()), 0.0f, sigma);
                for (size_t i = 0; i < obs.size(); ++i) obs[i] += noise[i];
            }
            auto a = policy(std::span<const float>(obs));
            if (mode == NoiseMode::action && sigma > 0.0f) {
                noise_rng.fill_normal(std::span<float>(noise.data(), a.size()), 0.0f, sigma);
                for (size_t i = 0; i < a.size(); ++i)
                    a[i] = std::clamp(a[i] + noise[i], -1.0f, 1.0f);
            }
            auto r = env.step(s, a);
            ret += r.reward;
            s = std::move(r.next_state);
            if (r.done) break;
        }
        total += ret;
    }
    return total / episodes;
}

}  // namespace

std::optional<double> robustness_eval(const data::Environment& env,
                                      const data::Policy& policy, NoiseMode mode,
                                      float sigma, int episodes, uint64_t seed,
                                      const data::ScoreAnchors& anchors) {
    if (sigma < 0.0f) throw config_error("robustness_eval: sigma must be non-negative");
    if (episodes < 1) throw config_error("robustness_eval: episodes must be >= 1");
    const double clean_raw = data::mean_return(env, policy, episodes, seed);
    const double noisy_raw = noisy_mean_return(env, policy, mode, sigma, episodes, seed);
    const double clean = normalized_score(clean_raw, anchors.random_return,
                                          anchors.expert_return);
    const double noisy = normalized_score(noisy_raw, anchors.random_return,
                                          anchors.expert_return);
    if (clean == 0.0) return std::nullopt;
    return std::min(noisy / clean, kRobustnessClip);
}

std::vector<ScoreMatrix> load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open scores file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("scores file is empty: " + path);
    // strip an optional UTF-8 BOM and trailing CR
    if (line.size() >= 3 && line[0] == '\xEF') line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "algorithm,task,seed,score")
        throw io_error("scores file header must be 'algorithm,task,seed,score', got '" +
                       line + "'");

    struct Cell {
        std::string task;
        uint64_t seed;
        double score;
    };
    std::map<std::string, std::vector<Cell>> by_alg;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string alg, task, seed_s, score_s;
        if (!std::getline(ss, alg, ',') || !std::getline(ss, task, ',') ||
            !std::getline(ss, seed_s, ',') || !std::getline(ss, score_s))
            throw io_error("scores file line " + std::to_string(line_no) +
                           ": expected 4 comma-separated fields");
        try {
            Cell c{task, std::stoull(seed_s), std::stod(score_s)};
            by_alg[alg].push_back(std::move(c));
        } catch (const std::exception&) {
            throw io_error("scores file line " + std::to_string(line_no) +
                           ": malformed seed or score");
        }
    }
    if (by_alg.empty()) throw io_error("scores file has no data rows: " + path);

    std::vector<ScoreMatrix> mats;
    for (auto& [alg, cells] : by_alg) {
        std::set<std::string> task_set;
        std::set<uint64_t> seed_set;
        for (const auto& c : cells) {
            task_set.insert(c.task);
            seed_set.insert(c.seed);
        }
        ScoreMatrix m;
        m.algorithm = alg;
        m.tasks.assign(task_set.begin(), task_set.end());
        m.seeds.assign(seed_set.begin(), seed_set.end());
        m.scores.assign(m.seeds.size(),
                        std::vector<double>(m.tasks.size(),
                                            std::numeric_limits<double>::quiet_NaN()));
        for (const auto& c : cells) {
            const auto r = static_cast<size_t>(
                std::lower_bound(m.seeds.begin(), m.seeds.end(), c.seed) - m.seeds.begin());
            const auto t = static_cast<size_t>(
                std::lower_bound(m.tasks.begin(), m.tasks.end(), c.task) - m.tasks.begin());
            if (!std::isnan(m.scores[r][t]))
                throw io_error("scores file: duplicate cell for algorithm '" + alg +
                               "', task '" + c.task + "', seed " + std::to_string(c.seed));
            m.scores[r][t] = c.score;
        }
        for (size_t r = 0; r < m.scores.size(); ++r)
            for (size_t t = 0; t < m.scores[r].size(); ++t)
                if (std::isnan(m.scores[r][t]))
                    throw io_error("scores file: missing cell for algorithm '" + alg +
                                   "', task '" + m.tasks[t] + "', seed " +
                                   std::to_string(m.seeds[r]));
        m.validate();
        mats.push_back(std::move(m));
    }
    return mats;
}

void save_scores_csv(const std::string& path, const std::vector<ScoreMatrix>& mats) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write scores file: " + path);
    out << "algorithm,task,seed,score\n";
    for (const auto& m : mats) {
        m.validate();
        for (size_t r = 0; r < m.scores.size(); ++r)
            for (size_t t = 0; t < m.scores[r].size(); ++t) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.10g", m.scores[r][t]);
                out << m.algorithm << ',' << m.tasks[t] << ',' << m.seeds[r] << ',' << buf
                    << '\n';
            }
    }
    if (!out) throw io_error("failed writing scores file: " + path);
}

}  // namespace actoreg::stats
