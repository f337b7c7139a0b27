#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actoreg/cli/config.hpp"
#include "actoreg/stats/stats.hpp"

namespace actoreg::cli {

// Share of each dataset held out as the validation split for every run.
inline constexpr double kValidationFraction = 0.05;

// ---------------------------------------------------------------------------
// Child-run execution. Each run owns one seed directory and writes the five
// artifacts: config.toml snapshot, eval.csv, losses.jsonl, diagnostics.jsonl,
// and periodic + final checkpoints. Fully deterministic per (config, seed).

struct RunResult {
    bool ok = false;
    std::string error;    // failure description when !ok
    std::string run_dir;  // seed directory
    std::vector<int64_t> steps;       // evaluation checkpoints
    std::vector<double> normalized;   // normalized score per checkpoint
};

// Trains one seed into `family_dir`/seed_<seed>. Throws on failure; the
// sweep driver catches per child.
RunResult run_single(const RunConfig& cfg, uint64_t seed, const std::string& family_dir);

// Runs every seed of the config under resolve_out_root(cfg.out_dir)/cfg.name
// with at most `jobs` children at once. Throws the first child error after
// all children finish.
std::vector<RunResult> run_all(const RunConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------------------
// Sweep: Cartesian grid over tuning seeds, winner by mean RAR, winner re-run
// on the held-out evaluation seeds. Child runs go through `Runner` so tests
// can substitute synthetic results.

using Runner =
    std::function<RunResult(const RunConfig& cfg, uint64_t seed, const std::string& family_dir)>;
Runner training_runner();  // the real thing: run_single

struct ComboOutcome {
    std::string label;
    std::vector<std::pair<std::string, TomlValue>> overrides;
    std::vector<uint64_t> seeds;
    std::vector<double> seed_rar;        // per tuning seed, aligned with `seeds`
    std::vector<std::string> errors;     // one entry per failed seed, "seed N: why"
    bool ok = false;                     // every tuning seed completed
    double mean_rar = 0.0;               // over tuning seeds, when ok
    double reg_magnitude = 0.0;          // tie-break key: sum |numeric override|
};

struct SweepOutcome {
    std::vector<ComboOutcome> combos;
    int winner = -1;  // index into combos
    std::vector<double> winner_eval_rar;  // per evaluation seed
    double winner_eval_mean = 0.0;
    std::string summary_path;  // sweep_summary.json
};

// Executes the sweep under resolve_out_root(spec.base.out_dir)/<name>/.
// Child failures are recorded and skipped; throws only if every combo fails.
SweepOutcome sweep(const SweepSpec& spec, int jobs = 1, const Runner& runner = training_runner());

// ---------------------------------------------------------------------------
// Report: collects seed directories from completed run families, scores each
// run by RAR over its normalized evaluation series, and writes scores.csv,
// metrics.json, and profiles.csv into `out_dir`.

struct ReportOutcome {
    std::vector<stats::ScoreMatrix> matrices;  // one per algorithm, name-sorted
    std::string scores_csv;
    std::string metrics_json;
    std::string profiles_csv;
};

ReportOutcome report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                     std::optional<int> window_override = std::nullopt);

// ---------------------------------------------------------------------------
// Checkpoint-based utilities.

// Re-runs the actor diagnostics (dead units, feature norms, srank, plasticity
// probe) for a stored actor against a dataset; returns the JSON line.
std::string diagnose_checkpoint(const std::string& checkpoint_path,
                                const std::string& dataset_path);

struct RobustnessQuery {
    std::string checkpoint_path;
    std::string env;  // empty: use the env recorded in the checkpoint
    stats::NoiseMode mode = stats::NoiseMode::action;
    float sigma = stats::kActionNoiseSigma;
    int episodes = 100;
    uint64_t seed = 0;
};

// Degradation ratio of noisy to clean normalized score; nullopt when the
// clean policy scores zero (ratio undefined).
std::optional<double> robustness_check(const RobustnessQuery& query);

// ---------------------------------------------------------------------------
// Dataset generation front end.

struct GenDataRequest {
    std::string env;
    std::string tier = "mixed";
    int64_t size = 20000;
    uint64_t seed = 0;
    std::string out;  // dataset file path
};

std::string gen_data(const GenDataRequest& req);  // returns the written path

}  // namespace actoreg::cli
