#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "actoreg/alg/trainers.hpp"
#include "actoreg/common/errors.hpp"
#include "actoreg/reg/regularizers.hpp"

namespace actoreg::cli {

// ---------------------------------------------------------------------------
// Minimal TOML-style config reader: [section] headers, key = value lines,
// strings, numbers, booleans, and flat arrays. Keys may be quoted, which is
// how sweep axes name dotted parameter paths. Every error message carries the
// full section.key path so scripts can surface the offending field.

struct TomlValue {
    enum class Kind { string, number, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    double num = 0.0;
    bool integer_literal = false;  // number was written without '.' or exponent
    bool flag = false;
    std::vector<TomlValue> items;  // array elements, scalars only

    static TomlValue of_string(std::string s);
    static TomlValue of_number(double v, bool integer_literal);
    static TomlValue of_bool(bool v);

    // Literal text as it would appear in a config file (strings quoted).
    std::string display() const;
};

// Flat document: entries keyed by "section.key" in file order. Duplicate
// paths are a config error at parse time.
struct TomlDoc {
    std::vector<std::pair<std::string, TomlValue>> entries;

    const TomlValue* find(const std::string& path) const;
    // Replace the value at `path`, or append the entry if absent.
    void set(const std::string& path, TomlValue value);
    // All entries whose path starts with `prefix` (used for [sweep.axes]).
    std::vector<std::pair<std::string, TomlValue>> section(const std::string& prefix) const;
};

TomlDoc parse_toml(const std::string& text);      // throws config_error
TomlDoc load_toml_file(const std::string& path);  // throws io_error / config_error

// Typed, consuming view over a TomlDoc. Each getter marks its path as read;
// `reject_unknown` then names any path the schema never asked for.
class ConfigReader {
  public:
    explicit ConfigReader(const TomlDoc& doc);

    std::optional<std::string> str(const std::string& path);
    std::optional<bool> boolean(const std::string& path);
    std::optional<double> num(const std::string& path);          // int or float literal
    std::optional<int64_t> integer(const std::string& path);     // int literal only
    std::optional<std::vector<int64_t>> int_array(const std::string& path);
    std::optional<std::vector<double>> num_array(const std::string& path);

    // Marks every entry under `prefix` consumed and returns them in order.
    std::vector<std::pair<std::string, TomlValue>> take_section(const std::string& prefix);

    void reject_unknown() const;  // throws config_error on the first unread path

  private:
    const TomlValue* take(const std::string& path);
    const TomlDoc& doc_;
    std::vector<bool> read_;
};

// ---------------------------------------------------------------------------
// Resolved experiment configuration. Defaults follow the evaluation protocol:
// sparse-domain tasks (goal reward only) evaluate 100 episodes per checkpoint
// with a RAR window of 5 and discount 0.999; dense tasks use 10 / 10 / 0.99.

bool sparse_domain(const std::string& env_name);

struct RunConfig {
    std::string algorithm;  // "rebrac" | "iql"
    std::string env;
    std::string dataset_path;
    std::string name = "run";  // run-family directory component
    std::string out_dir = "runs";
    std::vector<uint64_t> seeds{0};

    alg::TrainRunConfig schedule;
    int eval_episodes = 10;
    int rar_window = 10;
    int anchor_episodes = 100;
    uint64_t anchor_seed = 9999;

    alg::RebracConfig rebrac;
    alg::IqlConfig iql;
    reg::RegularizerConfig regularizer;

    int plasticity_steps = 100;
    int64_t diag_max_batch = 4096;

    void validate() const;  // throws config_error with field paths
};

// Schema mapping with domain defaults applied for keys left unset.
RunConfig run_config_from_toml(const TomlDoc& doc);
RunConfig load_run_config(const std::string& path);

// Full snapshot with every field explicit; `pinned_seed`, when given,
// replaces the seed list so the snapshot re-runs one child exactly.
std::string run_config_to_toml(const RunConfig& cfg,
                               std::optional<uint64_t> pinned_seed = std::nullopt);

// ---------------------------------------------------------------------------
// Hyperparameter sweep: named axes over config paths, a Cartesian grid, and
// the two disjoint seed pools of the tuning protocol.

struct SweepAxis {
    std::string path;               // e.g. "regularizer.weight_decay_omega"
    std::vector<TomlValue> values;  // nonempty, scalar entries
};

struct SweepSpec {
    TomlDoc base_doc;  // run config document with the sweep sections removed
    RunConfig base;
    std::vector<SweepAxis> axes;
    std::vector<uint64_t> tuning_seeds{0, 1, 2, 3, 4};
    std::vector<uint64_t> eval_seeds{100, 101, 102, 103, 104, 105, 106, 107, 108, 109};

    void validate() const;  // axes nonempty, seed pools disjoint and nonempty
};

SweepSpec sweep_spec_from_toml(const TomlDoc& doc);
SweepSpec load_sweep_spec(const std::string& path);

// One grid point: the axis assignments plus the fully resolved child config.
struct SweepCombo {
    std::vector<std::pair<std::string, TomlValue>> overrides;  // axis order
    RunConfig cfg;
    std::string label;  // "path=value,..." canonical form
};

// Cartesian product in declared axis order; every combo's config is built
// and validated here, before any training starts.
std::vector<SweepCombo> enumerate_combos(const SweepSpec& spec);

// Output root resolution: a relative `out` lands under $ACTOREG_OUT_ROOT
// when that is set; absolute paths are used as given.
std::string resolve_out_root(const std::string& out);

}  // namespace actoreg::cli
