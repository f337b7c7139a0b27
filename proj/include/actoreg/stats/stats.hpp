#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actoreg/data/env.hpp"

namespace actoreg::stats {

// Normalized scores for one algorithm: rows are runs (identified by seed),
// columns are tasks. Rectangular with every entry present and finite.
struct ScoreMatrix {
    std::string algorithm;
    std::vector<std::string> tasks;           // size T
    std::vector<uint64_t> seeds;              // size R, row labels
    std::vector<std::vector<double>> scores;  // R rows of T entries

    int runs() const { return static_cast<int>(scores.size()); }
    int task_count() const { return static_cast<int>(tasks.size()); }
    void validate() const;
};

// Per-checkpoint mean returns of one training run.
struct EvalSeries {
    std::vector<int64_t> steps;
    std::vector<double> returns;
};

// 100 * (raw - random_ref) / (expert_ref - random_ref)
double normalized_score(double raw, double random_ref, double expert_ref);

// Mean of the final `n` checkpoint returns. The window defaults to 5 on
// sparse-reward task configs and 10 elsewhere.
double rar(const EvalSeries& series, int n);
int default_rar_window(bool sparse);

// Point estimates, exposed individually so tests can oracle them directly.
// median: median over tasks of the per-task run means.
// iqm: mean of the flattened scores after dropping floor(0.25*n) entries
//      from each end of the sorted array.
// grand mean: mean over every run x task entry.
// optimality gap: mean of max(0, 1 - s/100) over every entry.
double median_score(const ScoreMatrix& m);
double iqm(const ScoreMatrix& m);
double grand_mean(const ScoreMatrix& m);
double optimality_gap(const ScoreMatrix& m);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct MetricWithCI {
    double value = 0.0;
    ConfidenceInterval ci;
};

struct AggregateReport {
    MetricWithCI median, iqm, mean, optimality_gap;
};

// Stratified bootstrap over a metric: each resample redraws run indices with
// replacement independently within every task, 95% percentile interval.
// Resample i draws from the bootstrap stream's substream i, so the resamples
// are order-independent and run in parallel deterministically.
ConfidenceInterval stratified_bootstrap_ci(
    const ScoreMatrix& m, const std::function<double(const ScoreMatrix&)>& metric,
    int resamples, uint64_t seed);

AggregateReport aggregate_metrics(const ScoreMatrix& m, int resamples = 2000,
                                  uint64_t seed = 0);

// Mann-Whitney probability that algorithm A improves on B: per task,
// P(a > b) + 0.5 * P(a = b) over all run pairs, averaged over tasks.
// Requires identical task lists.
double poi_point(const ScoreMatrix& a, const ScoreMatrix& b);
MetricWithCI probability_of_improvement(const ScoreMatrix& a, const ScoreMatrix& b,
                                        int resamples = 2000, uint64_t seed = 0);

// For each threshold tau (ascending), the fraction of run x task scores whose
// value / 100 is strictly greater than tau. Non-increasing in tau.
std::vector<double> performance_profile(const ScoreMatrix& m,
                                        const std::vector<double>& thresholds);

// Inference-time perturbation: additive Gaussian noise each step on the
// chosen channel (noisy actions re-clipped to [-1, 1]). Returns the ratio of
// noisy to clean normalized score, clipped above at kRobustnessClip; missing
// when the clean normalized score is zero.
enum class NoiseMode { action, observation };
inline constexpr float kActionNoiseSigma = 0.2f;
inline constexpr float kObservationNoiseSigma = 0.05f;
inline constexpr double kRobustnessClip = 1.1;
std::optional<double> robustness_eval(const data::Environment& env,
                                      const data::Policy& policy, NoiseMode mode,
                                      float sigma, int episodes, uint64_t seed,
                                      const data::ScoreAnchors& anchors);

// scores.csv rows: algorithm,task,seed,score. Loading groups rows into one
// matrix per algorithm (tasks and seeds sorted ascending) and rejects
// missing or duplicate (algorithm, task, seed) cells.
std::vector<ScoreMatrix> load_scores_csv(const std::string& path);
void save_scores_csv(const std::string& path, const std::vector<ScoreMatrix>& mats);

}  // namespace actoreg::stats
