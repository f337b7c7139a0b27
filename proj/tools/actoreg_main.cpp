// Batch front end for dataset generation, training runs, hyperparameter
// sweeps, report assembly, and checkpoint inspection. Exit codes are a
// stable contract: 0 success, 2 config error, 3 numeric failure, 4 I/O
// error, 1 anything else.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actoreg/cli/config.hpp"
#include "actoreg/cli/experiment.hpp"
#include "actoreg/common/errors.hpp"
#include "actoreg/stats/stats.hpp"

namespace cli = actoreg::cli;

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) throw actoreg::config_error("--seeds: empty element in list");
        try {
            const long long v = std::stoll(cur);
            if (v < 0) throw actoreg::config_error("--seeds: seed must be >= 0, got " + cur);
            seeds.push_back(static_cast<uint64_t>(v));
        } catch (const std::invalid_argument&) {
            throw actoreg::config_error("--seeds: cannot parse seed '" + cur + "'");
        } catch (const std::out_of_range&) {
            throw actoreg::config_error("--seeds: seed out of range: " + cur);
        }
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else if (c != ' ') cur += c;
    }
    if (!cur.empty()) flush();
    if (seeds.empty()) throw actoreg::config_error("--seeds: at least one seed required");
    return seeds;
}

struct CommonRunFlags {
    std::string config_path;
    std::string seeds_csv;
    std::optional<int64_t> seed;
    std::string out_override;
    int jobs = 1;
};

void apply_run_flags(cli::RunConfig& cfg, const CommonRunFlags& flags) {
    if (flags.seed && !flags.seeds_csv.empty())
        throw actoreg::config_error("--seed and --seeds are mutually exclusive");
    if (flags.seed) {
        if (*flags.seed < 0) throw actoreg::config_error("--seed: must be >= 0");
        cfg.seeds = {static_cast<uint64_t>(*flags.seed)};
    } else if (!flags.seeds_csv.empty()) {
        cfg.seeds = parse_seed_list(flags.seeds_csv);
    }
    if (!flags.out_override.empty()) cfg.out_dir = flags.out_override;
    cfg.validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline actor-critic experiment runner"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate and save an offline dataset");
    cli::GenDataRequest gen_req;
    gen->add_option("--env", gen_req.env, "environment name")->required();
    gen->add_option("--tier", gen_req.tier, "behavior tier: random|medium|expert|mixed");
    gen->add_option("--size", gen_req.size, "number of transitions");
    uint64_t gen_seed = 0;
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_req.out, "output dataset path")->required();

    // run
    auto* run = app.add_subcommand("run", "train one config over its seed list");
    CommonRunFlags run_flags;
    run->add_option("--config", run_flags.config_path, "run config file")->required();
    int64_t run_seed = 0;
    auto* run_seed_opt = run->add_option("--seed", run_seed, "single seed override");
    run->add_option("--seeds", run_flags.seeds_csv, "comma-separated seed override");
    run->add_option("--jobs", run_flags.jobs, "concurrent child runs")->check(CLI::Range(1, 256));
    run->add_option("--out", run_flags.out_override, "output root override");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid search with held-out final evaluation");
    std::string sweep_config;
    int sweep_jobs = 1;
    std::string sweep_out;
    sweep_cmd->add_option("--config", sweep_config, "sweep config file")->required();
    sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent child runs")
        ->check(CLI::Range(1, 256));
    sweep_cmd->add_option("--out", sweep_out, "output root override");

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate completed runs into metrics");
    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    std::optional<int> report_window;
    int report_window_value = 0;
    report_cmd->add_option("dirs", report_dirs, "run family or seed directories")->required();
    report_cmd->add_option("--out", report_out, "report output directory");
    auto* window_opt =
        report_cmd->add_option("--window", report_window_value, "RAR window override");

    // diagnose
    auto* diag_cmd = app.add_subcommand("diagnose", "actor diagnostics from a checkpoint");
    std::string diag_ck, diag_data;
    diag_cmd->add_option("--checkpoint", diag_ck, "checkpoint file")->required();
    diag_cmd->add_option("--data", diag_data, "dataset file")->required();

    // robustness
    auto* rob_cmd = app.add_subcommand("robustness", "noisy-evaluation degradation ratio");
    std::string rob_ck, rob_env, rob_mode = "action";
    float rob_sigma = 0.0f;
    int rob_episodes = 100;
    uint64_t rob_seed = 0;
    rob_cmd->add_option("--checkpoint", rob_ck, "checkpoint file")->required();
    rob_cmd->add_option("--env", rob_env, "environment override");
    rob_cmd->add_option("--mode", rob_mode, "noise target: action|observation")
        ->check(CLI::IsMember({"action", "observation"}));
    auto* sigma_opt = rob_cmd->add_option("--sigma", rob_sigma, "noise stddev");
    rob_cmd->add_option("--episodes", rob_episodes, "evaluation episodes");
    rob_cmd->add_option("--seed", rob_seed, "evaluation seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            gen_req.seed = gen_seed;
            const std::string path = cli::gen_data(gen_req);
            std::cout << "wrote " << path << "\n";
        } else if (run->parsed()) {
            if (*run_seed_opt) run_flags.seed = run_seed;
            cli::RunConfig cfg = cli::load_run_config(run_flags.config_path);
            apply_run_flags(cfg, run_flags);
            const auto results = cli::run_all(cfg, run_flags.jobs);
            for (size_t i = 0; i < results.size(); ++i) {
                const auto& r = results[i];
                std::cout << "seed " << cfg.seeds[i] << ": " << r.run_dir;
                if (!r.normalized.empty())
                    std::cout << "  final normalized score " << r.normalized.back();
                std::cout << "\n";
            }
        } else if (sweep_cmd->parsed()) {
            cli::SweepSpec spec = cli::load_sweep_spec(sweep_config);
            if (!sweep_out.empty()) {
                spec.base.out_dir = sweep_out;
                spec.base_doc.set("run.out", cli::TomlValue::of_string(sweep_out));
            }
            const cli::SweepOutcome outcome = cli::sweep(spec, sweep_jobs);
            const auto& best = outcome.combos[static_cast<size_t>(outcome.winner)];
            std::cout << "winner: " << best.label << "\n"
                      << "tuning mean RAR: " << best.mean_rar << "\n"
                      << "evaluation mean RAR: " << outcome.winner_eval_mean << "\n"
                      << "summary: " << outcome.summary_path << "\n";
        } else if (report_cmd->parsed()) {
            if (*window_opt) report_window = report_window_value;
            const cli::ReportOutcome outcome =
                cli::report(report_dirs, cli::resolve_out_root(report_out), report_window);
            std::cout << "wrote " << outcome.scores_csv << "\n"
                      << "wrote " << outcome.metrics_json << "\n"
                      << "wrote " << outcome.profiles_csv << "\n";
        } else if (diag_cmd->parsed()) {
            std::cout << cli::diagnose_checkpoint(diag_ck, diag_data) << "\n";
        } else if (rob_cmd->parsed()) {
            cli::RobustnessQuery query;
            query.checkpoint_path = rob_ck;
            query.env = rob_env;
            query.mode = rob_mode == "action" ? actoreg::stats::NoiseMode::action
                                              : actoreg::stats::NoiseMode::observation;
            query.sigma = *sigma_opt ? rob_sigma
                                     : (query.mode == actoreg::stats::NoiseMode::action
                                            ? actoreg::stats::kActionNoiseSigma
                                            : actoreg::stats::kObservationNoiseSigma);
            query.episodes = rob_episodes;
            query.seed = rob_seed;
            const std::optional<double> ratio = cli::robustness_check(query);
            std::cout << "{\"mode\":\"" << rob_mode << "\",\"sigma\":" << query.sigma
                      << ",\"ratio\":";
            if (ratio) std::cout << *ratio;
            else std::cout << "null";
            std::cout << "}\n";
        }
    } catch (const actoreg::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const actoreg::numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const actoreg::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
