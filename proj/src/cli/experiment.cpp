#include "actoreg/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "actoreg/data/dataset.hpp"
#include "actoreg/diag/diagnostics.hpp"
#include "actoreg/net/checkpoint.hpp"

namespace actoreg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

data::Policy actor_policy(net::Actor& actor, int state_dim) {
    return [&actor, state_dim](std::span<const float> s) {
        compute::Tensor st = compute::Tensor::from(
            {1, state_dim}, std::vector<float>(s.begin(), s.end()));
        compute::Tensor a = actor.act(st);
        auto d = a.data();
        return std::vector<float>(d.begin(), d.begin() + a.shape()[1]);
    };
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write file: " + path);
    out << text;
    if (!out) throw io_error("write failed: " + path);
}

std::string head_name(net::OutputHead head) {
    switch (head) {
        case net::OutputHead::linear: return "linear";
        case net::OutputHead::tanh_bounded: return "tanh_bounded";
        case net::OutputHead::gaussian: return "gaussian";
    }
    return "linear";
}

net::OutputHead head_from_name(const std::string& name) {
    if (name == "linear") return net::OutputHead::linear;
    if (name == "tanh_bounded") return net::OutputHead::tanh_bounded;
    if (name == "gaussian") return net::OutputHead::gaussian;
    throw io_error("checkpoint: unknown output head '" + name + "'");
}

std::string format_row(int64_t step, double mean_return, double normalized) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g", static_cast<long long>(step),
                  mean_return, normalized);
    return buf;
}

// Meta helpers: checkpoints written here always carry these keys.
const std::string& meta_str(const net::Checkpoint& ck, const std::string& key) {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw io_error("checkpoint: missing meta key '" + key + "'");
    return it->second;
}

int64_t meta_int(const net::Checkpoint& ck, const std::string& key) {
    try {
        return std::stoll(meta_str(ck, key));
    } catch (const std::invalid_argument&) {
        throw io_error("checkpoint: meta key '" + key + "' is not a number");
    }
}

float meta_float(const net::Checkpoint& ck, const std::string& key) {
    try {
        return std::stof(meta_str(ck, key));
    } catch (const std::invalid_argument&) {
        throw io_error("checkpoint: meta key '" + key + "' is not a number");
    }
}

// Rebuilds the stored actor: spec from metadata, weights from the "actor."
// tensor block. The init RNG values are immediately overwritten.
net::Actor actor_from_checkpoint(const net::Checkpoint& ck) {
    net::MlpSpec spec;
    spec.input_dim = static_cast<int>(meta_int(ck, "state_dim"));
    spec.output_dim = static_cast<int>(meta_int(ck, "action_dim"));
    spec.hidden_dim = static_cast<int>(meta_int(ck, "hidden_dim"));
    spec.num_hidden_layers = static_cast<int>(meta_int(ck, "num_hidden_layers"));
    spec.norm_kind = reg::norm_kind_from_name(meta_str(ck, "norm"));
    spec.dropout_rate = meta_float(ck, "dropout_rate");
    spec.group_count = static_cast<int>(meta_int(ck, "group_count"));
    spec.output_head = head_from_name(meta_str(ck, "head"));
    compute::Rng init(0, compute::Stream::init);
    net::Actor actor(spec, init);
    net::restore_module(ck, "actor.", actor.net().named_tensors());
    return actor;
}

std::unique_ptr<alg::Trainer> make_trainer(const RunConfig& cfg, uint64_t seed,
                                           const data::TransitionDataset& ds) {
    if (cfg.algorithm == "rebrac") {
        alg::RebracConfig rb = cfg.rebrac;
        if (rb.critic_loss == alg::CriticLossKind::categorical) {
            // Value support spans the dataset's episode-return range.
            auto [lo, hi] = alg::categorical_value_range(ds);
            rb.v_min = lo;
            rb.v_max = hi;
        }
        return std::make_unique<alg::RebracTrainer>(ds.state_dim, ds.action_dim, rb,
                                                    cfg.regularizer, seed);
    }
    return std::make_unique<alg::IqlTrainer>(ds.state_dim, ds.action_dim, cfg.iql,
                                             cfg.regularizer, seed);
}

void annotate_checkpoint(net::Checkpoint& ck, const RunConfig& cfg, uint64_t seed,
                         const data::TransitionDataset& ds) {
    const bool rb = cfg.algorithm == "rebrac";
    ck.meta["env"] = cfg.env;
    ck.meta["seed"] = std::to_string(seed);
    ck.meta["state_dim"] = std::to_string(ds.state_dim);
    ck.meta["action_dim"] = std::to_string(ds.action_dim);
    ck.meta["hidden_dim"] = std::to_string(rb ? cfg.rebrac.hidden_dim : cfg.iql.hidden_dim);
    ck.meta["num_hidden_layers"] =
        std::to_string(rb ? cfg.rebrac.num_hidden_layers : cfg.iql.num_hidden_layers);
    ck.meta["norm"] = reg::norm_kind_name(cfg.regularizer.norm_kind);
    ck.meta["dropout_rate"] = std::to_string(cfg.regularizer.dropout_rate);
    ck.meta["group_count"] = std::to_string(cfg.regularizer.group_count);
    ck.meta["head"] = head_name(rb ? net::OutputHead::tanh_bounded : net::OutputHead::gaussian);
    ck.meta["actor_lr"] = std::to_string(rb ? cfg.rebrac.actor_lr : cfg.iql.lr);
    ck.meta["plasticity_steps"] = std::to_string(cfg.plasticity_steps);
    ck.meta["max_batch"] = std::to_string(cfg.diag_max_batch);
    ck.meta["anchor_episodes"] = std::to_string(cfg.anchor_episodes);
    ck.meta["anchor_seed"] = std::to_string(cfg.anchor_seed);
    ck.meta["eval_episodes"] = std::to_string(cfg.eval_episodes);
}

// fn is responsible for its own error capture; the pool never rethrows.
void parallel_jobs(int jobs, int n, const std::function<void(int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
        workers.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

json value_to_json(const TomlValue& v) {
    switch (v.kind) {
        case TomlValue::Kind::string: return v.str;
        case TomlValue::Kind::boolean: return v.flag;
        case TomlValue::Kind::number:
            if (v.integer_literal) return static_cast<int64_t>(v.num);
            return v.num;
        case TomlValue::Kind::array: {
            json arr = json::array();
            for (const auto& item : v.items) arr.push_back(value_to_json(item));
            return arr;
        }
    }
    return nullptr;
}

}  // namespace

// ---------------------------------------------------------------------------
// run

RunResult run_single(const RunConfig& cfg, uint64_t seed, const std::string& family_dir) {
    cfg.validate();
    if (!fs::exists(cfg.dataset_path))
        throw io_error("run.dataset: file not found: " + cfg.dataset_path);
    data::TransitionDataset ds = data::load_dataset(cfg.dataset_path);
    if (ds.env_name != cfg.env)
        throw config_error("run.dataset: dataset was generated for env \"" + ds.env_name +
                           "\" but run.env is \"" + cfg.env + "\"");

    RunResult result;
    fs::path dir = fs::path(family_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    result.run_dir = dir.string();

    write_text((dir / "config.toml").string(), run_config_to_toml(cfg, seed));

    auto env = data::make_env(cfg.env);
    const data::ScoreAnchors anchors =
        data::score_anchors(*env, cfg.anchor_episodes, cfg.anchor_seed);
    const data::SplitDataset split = data::split(ds, kValidationFraction, seed);
    auto trainer = make_trainer(cfg, seed, ds);

    std::ofstream eval_csv(dir / "eval.csv", std::ios::binary | std::ios::trunc);
    std::ofstream losses(dir / "losses.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream diagnostics(dir / "diagnostics.jsonl", std::ios::binary | std::ios::trunc);
    if (!eval_csv || !losses || !diagnostics)
        throw io_error("cannot create run artifacts in " + dir.string());
    eval_csv << "step,mean_return,normalized_score\n";

    const compute::AdamConfig probe_adam{
        .lr = cfg.algorithm == "rebrac" ? cfg.rebrac.actor_lr : cfg.iql.lr};

    auto on_eval = [&](int64_t step, net::Actor& actor) {
        auto policy = actor_policy(actor, ds.state_dim);
        const double ret = data::mean_return(*env, policy, cfg.eval_episodes, seed);
        const double norm =
            stats::normalized_score(ret, anchors.random_return, anchors.expert_return);
        eval_csv << format_row(step, ret, norm) << "\n";
        result.steps.push_back(step);
        result.normalized.push_back(norm);

        diag::DiagnosticsReport dr =
            diag::diagnostics_report(actor, ds, split, probe_adam, step, seed,
                                     cfg.plasticity_steps, cfg.diag_max_batch);
        diagnostics << diag::to_json_line(dr) << "\n";

        net::Checkpoint ck;
        trainer->store(ck);
        annotate_checkpoint(ck, cfg, seed, ds);
        net::save_checkpoint((dir / ("checkpoint_" + std::to_string(step) + ".ck")).string(),
                             ck);
    };
    auto on_loss = [&](const alg::LossReport& report) {
        losses << alg::to_json_line(report) << "\n";
    };

    alg::train_run(*trainer, ds, split, cfg.schedule, seed, on_eval, on_loss);

    net::Checkpoint final_ck;
    trainer->store(final_ck);
    annotate_checkpoint(final_ck, cfg, seed, ds);
    net::save_checkpoint((dir / "checkpoint_final.ck").string(), final_ck);

    eval_csv.flush();
    losses.flush();
    diagnostics.flush();
    if (!eval_csv || !losses || !diagnostics)
        throw io_error("failed writing run artifacts in " + dir.string());
    result.ok = true;
    return result;
}

std::vector<RunResult> run_all(const RunConfig& cfg, int jobs) {
    cfg.validate();
    const fs::path family = fs::path(resolve_out_root(cfg.out_dir)) / cfg.name;
    const int n = static_cast<int>(cfg.seeds.size());
    std::vector<RunResult> results(static_cast<size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
    parallel_jobs(jobs, n, [&](int i) {
        try {
            results[static_cast<size_t>(i)] = run_single(cfg, cfg.seeds[static_cast<size_t>(i)],
                                                         family.string());
        } catch (...) {
            errors[static_cast<size_t>(i)] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

Runner training_runner() {
    return [](const RunConfig& cfg, uint64_t seed, const std::string& family_dir) {
        return run_single(cfg, seed, family_dir);
    };
}

// ---------------------------------------------------------------------------
// sweep

namespace {

double override_magnitude(const std::vector<std::pair<std::string, TomlValue>>& overrides) {
    double acc = 0.0;
    for (const auto& [path, v] : overrides)
        if (v.kind == TomlValue::Kind::number) acc += std::fabs(v.num);
    return acc;
}

struct ChildRecord {
    uint64_t seed = 0;
    bool ok = false;
    double rar = 0.0;
    std::string error;
};

// Runs one (config, seed) child and reduces its eval series to a RAR score.
ChildRecord run_child(const Runner& runner, const RunConfig& cfg, uint64_t seed,
                      const std::string& family_dir) {
    ChildRecord rec;
    rec.seed = seed;
    try {
        RunResult r = runner(cfg, seed, family_dir);
        if (!r.ok) throw error(r.error.empty() ? "child run failed" : r.error);
        stats::EvalSeries series{r.steps, r.normalized};
        rec.rar = stats::rar(series, cfg.rar_window);
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.error = "seed " + std::to_string(seed) + ": " + e.what();
    }
    return rec;
}

}  // namespace

SweepOutcome sweep(const SweepSpec& spec, int jobs, const Runner& runner) {
    spec.validate();
    const std::vector<SweepCombo> combos = enumerate_combos(spec);
    const fs::path root = fs::path(resolve_out_root(spec.base.out_dir)) / spec.base.name;
    fs::create_directories(root);

    // Tuning phase: every combo on every tuning seed, one child per job.
    struct Job {
        int combo;
        size_t seed_idx;
    };
    std::vector<Job> queue;
    for (int c = 0; c < static_cast<int>(combos.size()); ++c)
        for (size_t s = 0; s < spec.tuning_seeds.size(); ++s) queue.push_back({c, s});

    auto combo_dir = [&](int c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "combo_%03d", c);
        return (root / buf).string();
    };

    std::vector<std::vector<ChildRecord>> records(combos.size());
    for (auto& r : records) r.resize(spec.tuning_seeds.size());
    parallel_jobs(jobs, static_cast<int>(queue.size()), [&](int i) {
        const Job& job = queue[static_cast<size_t>(i)];
        records[static_cast<size_t>(job.combo)][job.seed_idx] =
            run_child(runner, combos[static_cast<size_t>(job.combo)].cfg,
                      spec.tuning_seeds[job.seed_idx], combo_dir(job.combo));
    });

    SweepOutcome outcome;
    outcome.combos.resize(combos.size());
    for (size_t c = 0; c < combos.size(); ++c) {
        ComboOutcome& co = outcome.combos[c];
        co.label = combos[c].label;
        co.overrides = combos[c].overrides;
        co.seeds = spec.tuning_seeds;
        co.reg_magnitude = override_magnitude(combos[c].overrides);
        co.ok = true;
        double acc = 0.0;
        for (const ChildRecord& rec : records[c]) {
            co.seed_rar.push_back(rec.rar);
            if (!rec.ok) {
                co.ok = false;
                co.errors.push_back(rec.error);
            }
            acc += rec.rar;
        }
        if (co.ok) co.mean_rar = acc / static_cast<double>(records[c].size());
    }

    // Winner: highest mean RAR; ties prefer the smallest regularization
    // magnitude, then the lexicographically first parameter assignment.
    int best = -1;
    for (int c = 0; c < static_cast<int>(outcome.combos.size()); ++c) {
        const ComboOutcome& co = outcome.combos[static_cast<size_t>(c)];
        if (!co.ok) continue;
        if (best < 0) {
            best = c;
            continue;
        }
        const ComboOutcome& cur = outcome.combos[static_cast<size_t>(best)];
        if (co.mean_rar > cur.mean_rar ||
            (co.mean_rar == cur.mean_rar &&
             (co.reg_magnitude < cur.reg_magnitude ||
              (co.reg_magnitude == cur.reg_magnitude && co.label < cur.label))))
            best = c;
    }
    if (best < 0) {
        std::string detail;
        for (const auto& co : outcome.combos)
            for (const auto& e : co.errors) detail += "\n  " + co.label + ": " + e;
        throw error("sweep: all " + std::to_string(outcome.combos.size()) +
                    " combinations failed" + detail);
    }
    outcome.winner = best;

    // Final evaluation of the winner on the held-out seeds.
    const RunConfig& winner_cfg = combos[static_cast<size_t>(best)].cfg;
    const std::string winner_dir = (root / "winner").string();
    std::vector<ChildRecord> eval_records(spec.eval_seeds.size());
    parallel_jobs(jobs, static_cast<int>(spec.eval_seeds.size()), [&](int i) {
        eval_records[static_cast<size_t>(i)] =
            run_child(runner, winner_cfg, spec.eval_seeds[static_cast<size_t>(i)], winner_dir);
    });
    std::vector<std::string> eval_errors;
    double acc = 0.0;
    int ok_count = 0;
    for (const ChildRecord& rec : eval_records) {
        outcome.winner_eval_rar.push_back(rec.rar);
        if (rec.ok) {
            acc += rec.rar;
            ++ok_count;
        } else {
            eval_errors.push_back(rec.error);
        }
    }
    if (ok_count == 0) {
        std::string detail;
        for (const auto& e : eval_errors) detail += "\n  " + e;
        throw error("sweep: every final-evaluation run of the winner failed" + detail);
    }
    outcome.winner_eval_mean = acc / ok_count;

    // Machine-readable log: combos, per-child records with their phase, and
    // the two seed pools, so the disjointness protocol can be audited.
    json summary;
    summary["name"] = spec.base.name;
    summary["algorithm"] = spec.base.algorithm;
    summary["env"] = spec.base.env;
    json axes = json::array();
    for (const auto& axis : spec.axes) {
        json values = json::array();
        for (const auto& v : axis.values) values.push_back(value_to_json(v));
        axes.push_back({{"path", axis.path}, {"values", values}});
    }
    summary["axes"] = axes;
    summary["tuning_seeds"] = spec.tuning_seeds;
    summary["eval_seeds"] = spec.eval_seeds;
    json combo_list = json::array();
    for (size_t c = 0; c < outcome.combos.size(); ++c) {
        const ComboOutcome& co = outcome.combos[c];
        json overrides;
        for (const auto& [path, v] : co.overrides) overrides[path] = value_to_json(v);
        json runs = json::array();
        for (const ChildRecord& rec : records[c]) {
            json r = {{"seed", rec.seed}, {"phase", "tuning"}, {"ok", rec.ok}};
            if (rec.ok) r["rar"] = rec.rar;
            else r["error"] = rec.error;
            runs.push_back(r);
        }
        combo_list.push_back({{"index", c},
                              {"label", co.label},
                              {"overrides", overrides},
                              {"ok", co.ok},
                              {"mean_rar", co.mean_rar},
                              {"runs", runs}});
    }
    summary["combos"] = combo_list;
    json winner;
    winner["index"] = best;
    winner["label"] = outcome.combos[static_cast<size_t>(best)].label;
    json eval_runs = json::array();
    for (const ChildRecord& rec : eval_records) {
        json r = {{"seed", rec.seed}, {"phase", "eval"}, {"ok", rec.ok}};
        if (rec.ok) r["rar"] = rec.rar;
        else r["error"] = rec.error;
        eval_runs.push_back(r);
    }
    winner["runs"] = eval_runs;
    winner["eval_mean_rar"] = outcome.winner_eval_mean;
    summary["winner"] = winner;

    outcome.summary_path = (root / "sweep_summary.json").string();
    write_text(outcome.summary_path, summary.dump(2) + "\n");
    return outcome;
}

// ---------------------------------------------------------------------------
// report

namespace {

struct SeedRun {
    std::string algorithm;
    std::string task;
    uint64_t seed = 0;
    double score = 0.0;
};

std::vector<double> read_eval_normalized(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("missing eval series: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("missing eval series: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "step,mean_return,normalized_score")
        throw io_error("bad eval series header in " + path);
    std::vector<double> normalized;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t c1 = line.find(',');
        const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos) throw io_error("bad eval series row in " + path);
        try {
            normalized.push_back(std::stod(line.substr(c2 + 1)));
        } catch (const std::invalid_argument&) {
            throw io_error("bad eval series row in " + path);
        }
    }
    if (normalized.empty()) throw io_error("missing eval series: " + path + " has no rows");
    return normalized;
}

// A completed seed directory holds both the snapshot and the eval series.
bool is_seed_dir(const fs::path& dir) {
    return fs::exists(dir / "config.toml");
}

SeedRun load_seed_run(const fs::path& dir, std::optional<int> window_override) {
    RunConfig cfg;
    try {
        cfg = load_run_config((dir / "config.toml").string());
    } catch (const error& e) {
        throw config_error("report: " + dir.string() + ": " + e.what());
    }
    SeedRun run;
    run.algorithm = cfg.algorithm;
    run.task = cfg.env;
    run.seed = cfg.seeds.at(0);
    std::vector<double> series;
    try {
        series = read_eval_normalized((dir / "eval.csv").string());
    } catch (const io_error& e) {
        throw io_error("report: " + dir.string() + ": " + e.what());
    }
    const int window = window_override.value_or(cfg.rar_window);
    try {
        run.score = stats::rar(stats::EvalSeries{{}, series}, window);
    } catch (const config_error& e) {
        throw config_error("report: " + dir.string() + ": " + e.what());
    }
    return run;
}

json metric_json(const stats::MetricWithCI& m) {
    return {{"value", m.value}, {"ci", {m.ci.lo, m.ci.hi}}};
}

json point_metric_json(double v) {
    return {{"value", v}, {"ci", {v, v}}};
}

}  // namespace

ReportOutcome report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                     std::optional<int> window_override) {
    if (run_dirs.empty()) throw config_error("report: at least one run directory required");
    if (window_override && *window_override < 1)
        throw config_error("report: window must be >= 1");

    std::vector<SeedRun> runs;
    for (const std::string& dir_name : run_dirs) {
        const fs::path dir(dir_name);
        if (!fs::is_directory(dir))
            throw io_error("report: " + dir_name + ": not a directory");
        std::vector<fs::path> seed_dirs;
        if (is_seed_dir(dir)) {
            seed_dirs.push_back(dir);
        } else {
            for (const auto& entry : fs::directory_iterator(dir))
                if (entry.is_directory() && is_seed_dir(entry.path()))
                    seed_dirs.push_back(entry.path());
            std::sort(seed_dirs.begin(), seed_dirs.end());
        }
        if (seed_dirs.empty())
            throw io_error("report: " + dir_name + ": no completed runs (missing eval series)");
        for (const auto& sd : seed_dirs) runs.push_back(load_seed_run(sd, window_override));
    }

    // algorithm -> task -> seed -> score
    std::map<std::string, std::map<std::string, std::map<uint64_t, double>>> grouped;
    for (const SeedRun& run : runs) {
        auto& cell = grouped[run.algorithm][run.task];
        if (cell.count(run.seed))
            throw config_error("report: duplicate run for " + run.algorithm + "/" + run.task +
                               "/seed " + std::to_string(run.seed));
        cell[run.seed] = run.score;
    }

    ReportOutcome outcome;
    for (const auto& [algo, tasks] : grouped) {
        // The seed set must be shared by every task so that run indices line
        // up across the matrix rows.
        std::set<uint64_t> seed_set;
        for (const auto& [task, cells] : tasks)
            for (const auto& [seed, score] : cells) seed_set.insert(seed);
        stats::ScoreMatrix m;
        m.algorithm = algo;
        for (const auto& [task, cells] : tasks) m.tasks.push_back(task);
        std::vector<uint64_t> seed_order(seed_set.begin(), seed_set.end());
        for (uint64_t s : seed_order) m.seeds.push_back(s);
        m.scores.assign(seed_order.size(), std::vector<double>(m.tasks.size(), 0.0));
        for (size_t t = 0; t < m.tasks.size(); ++t) {
            const auto& cells = tasks.at(m.tasks[t]);
            for (size_t r = 0; r < seed_order.size(); ++r) {
                auto it = cells.find(seed_order[r]);
                if (it == cells.end())
                    throw config_error("report: " + algo + "/" + m.tasks[t] +
                                       ": missing seed " + std::to_string(seed_order[r]));
                m.scores[r][t] = it->second;
            }
        }
        m.validate();
        outcome.matrices.push_back(std::move(m));
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    outcome.scores_csv = (out / "scores.csv").string();
    stats::save_scores_csv(outcome.scores_csv, outcome.matrices);

    json metrics;
    for (const stats::ScoreMatrix& m : outcome.matrices) {
        json entry;
        if (m.runs() >= 2) {
            stats::AggregateReport rep = stats::aggregate_metrics(m);
            entry["median"] = metric_json(rep.median);
            entry["iqm"] = metric_json(rep.iqm);
            entry["mean"] = metric_json(rep.mean);
            entry["optimality_gap"] = metric_json(rep.optimality_gap);
        } else {
            // Single run: point metrics, intervals collapse onto the value.
            entry["median"] = point_metric_json(stats::median_score(m));
            entry["iqm"] = point_metric_json(stats::iqm(m));
            entry["mean"] = point_metric_json(stats::grand_mean(m));
            entry["optimality_gap"] = point_metric_json(stats::optimality_gap(m));
        }
        entry["runs"] = m.runs();
        entry["tasks"] = m.tasks;
        metrics["algorithms"][m.algorithm] = entry;
    }
    if (outcome.matrices.size() == 2 &&
        outcome.matrices[0].tasks == outcome.matrices[1].tasks &&
        outcome.matrices[0].runs() >= 2 && outcome.matrices[1].runs() >= 2) {
        const stats::ScoreMatrix& a = outcome.matrices[0];
        const stats::ScoreMatrix& b = outcome.matrices[1];
        stats::MetricWithCI ab = stats::probability_of_improvement(a, b);
        stats::MetricWithCI ba = stats::probability_of_improvement(b, a);
        metrics["probability_of_improvement"][a.algorithm + "_vs_" + b.algorithm] =
            metric_json(ab);
        metrics["probability_of_improvement"][b.algorithm + "_vs_" + a.algorithm] =
            metric_json(ba);
    }
    outcome.metrics_json = (out / "metrics.json").string();
    write_text(outcome.metrics_json, metrics.dump(2) + "\n");

    // Shared threshold grid for the profile curves, normalized-score units.
    std::vector<double> thresholds;
    for (int i = 0; i <= 30; ++i) thresholds.push_back(0.05 * i);
    std::ostringstream profile_out;
    profile_out << "algorithm,tau,fraction\n";
    for (const stats::ScoreMatrix& m : outcome.matrices) {
        std::vector<double> curve = stats::performance_profile(m, thresholds);
        for (size_t i = 0; i < thresholds.size(); ++i) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g\n", m.algorithm.c_str(),
                          thresholds[i], curve[i]);
            profile_out << buf;
        }
    }
    outcome.profiles_csv = (out / "profiles.csv").string();
    write_text(outcome.profiles_csv, profile_out.str());
    return outcome;
}

// ---------------------------------------------------------------------------
// diagnose / robustness / gen-data

std::string diagnose_checkpoint(const std::string& checkpoint_path,
                                const std::string& dataset_path) {
    net::Checkpoint ck = net::load_checkpoint(checkpoint_path);
    net::Actor actor = actor_from_checkpoint(ck);
    data::TransitionDataset ds = data::load_dataset(dataset_path);
    if (ds.env_name != meta_str(ck, "env"))
        throw config_error("diagnose: dataset env \"" + ds.env_name +
                           "\" does not match checkpoint env \"" + meta_str(ck, "env") + "\"");
    const uint64_t seed = static_cast<uint64_t>(meta_int(ck, "seed"));
    const data::SplitDataset split = data::split(ds, kValidationFraction, seed);
    const compute::AdamConfig adam{.lr = meta_float(ck, "actor_lr")};
    diag::DiagnosticsReport report = diag::diagnostics_report(
        actor, ds, split, adam, meta_int(ck, "step"), seed,
        static_cast<int>(meta_int(ck, "plasticity_steps")), meta_int(ck, "max_batch"));
    return diag::to_json_line(report);
}

std::optional<double> robustness_check(const RobustnessQuery& query) {
    net::Checkpoint ck = net::load_checkpoint(query.checkpoint_path);
    net::Actor actor = actor_from_checkpoint(ck);
    const std::string env_name = query.env.empty() ? meta_str(ck, "env") : query.env;
    auto env = data::make_env(env_name);
    const data::ScoreAnchors anchors = data::score_anchors(
        *env, static_cast<int>(meta_int(ck, "anchor_episodes")),
        static_cast<uint64_t>(meta_int(ck, "anchor_seed")));
    auto policy = actor_policy(actor, env->state_dim());
    return stats::robustness_eval(*env, policy, query.mode, query.sigma, query.episodes,
                                  query.seed, anchors);
}

std::string gen_data(const GenDataRequest& req) {
    if (req.out.empty()) throw config_error("gen-data: output path required");
    if (req.size < 1) throw config_error("gen-data: size must be >= 1");
    auto env = data::make_env(req.env);
    const data::Tier tier = data::tier_from_name(req.tier);
    data::TransitionDataset ds = data::generate_dataset(*env, tier, req.size, req.seed);
    const fs::path out(req.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    data::save_dataset(req.out, ds);
    return req.out;
}

}  // namespace actoreg::cli
