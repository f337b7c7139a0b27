#include "actoreg/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "actoreg/data/env.hpp"
#include "actoreg/stats/stats.hpp"

namespace actoreg::cli {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw config_error("config line " + std::to_string(line) + ": " + msg);
}

// Cut the line at the first '#' that sits outside a quoted string.
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
        } else if (c == '"') {
            in_str = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

// Reads a quoted string starting at s[pos] == '"'; returns the unescaped
// contents and leaves pos one past the closing quote.
std::string read_quoted(const std::string& s, size_t& pos, int line) {
    std::string out;
    for (size_t i = pos + 1; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\') {
            if (i + 1 >= s.size()) fail(line, "dangling escape in string");
            char e = s[++i];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(line, std::string("unsupported escape '\\") + e + "'");
            }
        } else if (c == '"') {
            pos = i + 1;
            return out;
        } else {
            out += c;
        }
    }
    fail(line, "unterminated string");
}

TomlValue parse_scalar(const std::string& text, int line) {
    if (!text.empty() && text[0] == '"') {
        size_t pos = 0;
        std::string s = read_quoted(text, pos, line);
        if (trim(text.substr(pos)) != "") fail(line, "trailing characters after string");
        return TomlValue::of_string(std::move(s));
    }
    if (text == "true") return TomlValue::of_bool(true);
    if (text == "false") return TomlValue::of_bool(false);
    const char* b = text.data();
    const char* e = b + text.size();
    int64_t iv = 0;
    auto ir = std::from_chars(b, e, iv);
    if (ir.ec == std::errc() && ir.ptr == e)
        return TomlValue::of_number(static_cast<double>(iv), true);
    double dv = 0.0;
    auto dr = std::from_chars(b, e, dv);
    if (dr.ec == std::errc() && dr.ptr == e) {
        if (!std::isfinite(dv)) fail(line, "non-finite number '" + text + "'");
        return TomlValue::of_number(dv, false);
    }
    fail(line, "cannot parse value '" + text + "'");
}

// Splits "[a, b, c]" on top-level commas, respecting quoted strings.
TomlValue parse_value(const std::string& text, int line) {
    if (text.empty()) fail(line, "missing value");
    if (text[0] != '[') return parse_scalar(text, line);
    if (text.back() != ']') fail(line, "unterminated array");
    std::string inner = text.substr(1, text.size() - 2);
    TomlValue arr;
    arr.kind = TomlValue::Kind::array;
    std::string cur;
    bool in_str = false;
    auto flush = [&] {
        std::string item = trim(cur);
        if (item.empty()) fail(line, "empty array element");
        if (!item.empty() && item[0] == '[') fail(line, "nested arrays are not supported");
        arr.items.push_back(parse_scalar(item, line));
        cur.clear();
    };
    for (size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (in_str) {
            cur += c;
            if (c == '\\' && i + 1 < inner.size()) cur += inner[++i];
            else if (c == '"') in_str = false;
        } else if (c == '"') {
            cur += c;
            in_str = true;
        } else if (c == ',') {
            flush();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) flush();  // no trailing element after a final comma is fine
    return arr;
}

// Shortest decimal form that parses back to the identical float.
std::string format_float(float v) {
    char buf[64];
    for (int prec = 1; prec <= 9; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, static_cast<double>(v));
        if (std::strtof(buf, nullptr) == v) break;
    }
    std::string s = buf;
    // Keep numbers recognizable as floats where they carry fraction digits;
    // integer-looking floats are fine, the schema reads both.
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// TomlValue / TomlDoc

TomlValue TomlValue::of_string(std::string s) {
    TomlValue v;
    v.kind = Kind::string;
    v.str = std::move(s);
    return v;
}

TomlValue TomlValue::of_number(double value, bool integer_literal) {
    TomlValue v;
    v.kind = Kind::number;
    v.num = value;
    v.integer_literal = integer_literal;
    return v;
}

TomlValue TomlValue::of_bool(bool value) {
    TomlValue v;
    v.kind = Kind::boolean;
    v.flag = value;
    return v;
}

std::string TomlValue::display() const {
    switch (kind) {
        case Kind::string: {
            std::string out = "\"";
            for (char c : str) {
                if (c == '"' || c == '\\') out += '\\';
                out += c;
            }
            return out + "\"";
        }
        case Kind::boolean:
            return flag ? "true" : "false";
        case Kind::number: {
            if (integer_literal) return std::to_string(static_cast<int64_t>(num));
            char buf[64];
            for (int prec = 1; prec <= 17; ++prec) {
                std::snprintf(buf, sizeof(buf), "%.*g", prec, num);
                if (std::strtod(buf, nullptr) == num) break;
            }
            return buf;
        }
        case Kind::array: {
            std::string out = "[";
            for (size_t i = 0; i < items.size(); ++i) {
                if (i) out += ", ";
                out += items[i].display();
            }
            return out + "]";
        }
    }
    return "";
}

const TomlValue* TomlDoc::find(const std::string& path) const {
    for (const auto& [p, v] : entries)
        if (p == path) return &v;
    return nullptr;
}

void TomlDoc::set(const std::string& path, TomlValue value) {
    for (auto& [p, v] : entries) {
        if (p == path) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(path, std::move(value));
}

std::vector<std::pair<std::string, TomlValue>> TomlDoc::section(
    const std::string& prefix) const {
    std::vector<std::pair<std::string, TomlValue>> out;
    const std::string p = prefix + ".";
    for (const auto& e : entries)
        if (e.first.starts_with(p)) out.push_back(e);
    return out;
}

TomlDoc parse_toml(const std::string& text) {
    TomlDoc doc;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(line_no, "empty section name");
            for (char c : section)
                if (!bare_key_char(c)) fail(line_no, "bad section name '" + section + "'");
            continue;
        }
        std::string key;
        size_t pos = 0;
        if (line[0] == '"') {
            key = read_quoted(line, pos, line_no);
            if (key.empty()) fail(line_no, "empty key");
        } else {
            while (pos < line.size() && bare_key_char(line[pos])) ++pos;
            key = line.substr(0, pos);
            if (key.empty()) fail(line_no, "expected a key");
        }
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size() || line[pos] != '=') fail(line_no, "expected '=' after key '" + key + "'");
        std::string value_text = trim(line.substr(pos + 1));
        TomlValue value = parse_value(value_text, line_no);
        std::string path = section.empty() ? key : section + "." + key;
        if (doc.find(path)) fail(line_no, "duplicate key '" + path + "'");
        doc.entries.emplace_back(std::move(path), std::move(value));
    }
    return doc;
}

TomlDoc load_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_toml(buf.str());
}

// ---------------------------------------------------------------------------
// ConfigReader

ConfigReader::ConfigReader(const TomlDoc& doc) : doc_(doc), read_(doc.entries.size(), false) {}

const TomlValue* ConfigReader::take(const std::string& path) {
    for (size_t i = 0; i < doc_.entries.size(); ++i) {
        if (doc_.entries[i].first == path) {
            read_[i] = true;
            return &doc_.entries[i].second;
        }
    }
    return nullptr;
}

std::optional<std::string> ConfigReader::str(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::string)
        throw config_error(path + ": expected a string, got " + v->display());
    return v->str;
}

std::optional<bool> ConfigReader::boolean(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::boolean)
        throw config_error(path + ": expected true or false, got " + v->display());
    return v->flag;
}

std::optional<double> ConfigReader::num(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::number)
        throw config_error(path + ": expected a number, got " + v->display());
    return v->num;
}

std::optional<int64_t> ConfigReader::integer(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::number || !v->integer_literal)
        throw config_error(path + ": expected an integer, got " + v->display());
    return static_cast<int64_t>(v->num);
}

std::optional<std::vector<int64_t>> ConfigReader::int_array(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::array)
        throw config_error(path + ": expected an array, got " + v->display());
    std::vector<int64_t> out;
    for (const auto& item : v->items) {
        if (item.kind != TomlValue::Kind::number || !item.integer_literal)
            throw config_error(path + ": expected integer elements, got " + item.display());
        out.push_back(static_cast<int64_t>(item.num));
    }
    return out;
}

std::optional<std::vector<double>> ConfigReader::num_array(const std::string& path) {
    const TomlValue* v = take(path);
    if (!v) return std::nullopt;
    if (v->kind != TomlValue::Kind::array)
        throw config_error(path + ": expected an array, got " + v->display());
    std::vector<double> out;
    for (const auto& item : v->items) {
        if (item.kind != TomlValue::Kind::number)
            throw config_error(path + ": expected numeric elements, got " + item.display());
        out.push_back(item.num);
    }
    return out;
}

std::vector<std::pair<std::string, TomlValue>> ConfigReader::take_section(
    const std::string& prefix) {
    std::vector<std::pair<std::string, TomlValue>> out;
    const std::string p = prefix + ".";
    for (size_t i = 0; i < doc_.entries.size(); ++i) {
        if (doc_.entries[i].first.starts_with(p)) {
            read_[i] = true;
            out.push_back(doc_.entries[i]);
        }
    }
    return out;
}

void ConfigReader::reject_unknown() const {
    for (size_t i = 0; i < doc_.entries.size(); ++i)
        if (!read_[i]) throw config_error("unknown key '" + doc_.entries[i].first + "'");
}

// ---------------------------------------------------------------------------
// RunConfig schema

bool sparse_domain(const std::string& env_name) {
    return env_name.find("maze") != std::string::npos;
}

namespace {

float float_field(ConfigReader& r, const std::string& path, float fallback) {
    auto v = r.num(path);
    if (!v) return fallback;
    if (!std::isfinite(*v)) throw config_error(path + ": must be finite");
    return static_cast<float>(*v);
}

int int_field(ConfigReader& r, const std::string& path, int fallback) {
    auto v = r.integer(path);
    if (!v) return fallback;
    if (*v < INT32_MIN || *v > INT32_MAX) throw config_error(path + ": out of range");
    return static_cast<int>(*v);
}

int64_t int64_field(ConfigReader& r, const std::string& path, int64_t fallback) {
    auto v = r.integer(path);
    return v ? *v : fallback;
}

uint64_t seed_field(ConfigReader& r, const std::string& path, uint64_t fallback) {
    auto v = r.integer(path);
    if (!v) return fallback;
    if (*v < 0) throw config_error(path + ": seed must be >= 0");
    return static_cast<uint64_t>(*v);
}

std::vector<uint64_t> seed_list(ConfigReader& r, const std::string& path,
                                std::vector<uint64_t> fallback) {
    auto raw = r.int_array(path);
    if (!raw) return fallback;
    if (raw->empty()) throw config_error(path + ": at least one seed required");
    std::vector<uint64_t> out;
    for (int64_t s : *raw) {
        if (s < 0) throw config_error(path + ": seed must be >= 0, got " + std::to_string(s));
        out.push_back(static_cast<uint64_t>(s));
    }
    std::set<uint64_t> uniq(out.begin(), out.end());
    if (uniq.size() != out.size()) throw config_error(path + ": duplicate seed");
    return out;
}

void check_name_component(const std::string& path, const std::string& name) {
    if (name.empty()) throw config_error(path + ": must not be empty");
    if (name == "." || name == "..")
        throw config_error(path + ": '" + name + "' is not a valid directory name");
    for (char c : name)
        if (c == '/' || c == '\\')
            throw config_error(path + ": must be a single directory name, got '" + name + "'");
}

}  // namespace

void RunConfig::validate() const {
    if (algorithm != "rebrac" && algorithm != "iql")
        throw config_error("run.algorithm: expected \"rebrac\" or \"iql\", got \"" + algorithm +
                           "\"");
    if (env.empty()) throw config_error("run.env: must not be empty");
    if (dataset_path.empty()) throw config_error("run.dataset: must not be empty");
    check_name_component("run.name", name);
    if (out_dir.empty()) throw config_error("run.out: must not be empty");
    if (seeds.empty()) throw config_error("run.seeds: at least one seed required");
    std::set<uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) throw config_error("run.seeds: duplicate seed");
    if (schedule.steps < 1) throw config_error("run.steps: must be >= 1");
    if (schedule.eval_interval < 1) throw config_error("run.eval_interval: must be >= 1");
    if (schedule.loss_log_interval < 1)
        throw config_error("run.loss_log_interval: must be >= 1");
    schedule.validate();
    if (eval_episodes < 1) throw config_error("run.eval_episodes: must be >= 1");
    if (rar_window < 1) throw config_error("run.rar_window: must be >= 1");
    if (anchor_episodes < 1) throw config_error("run.anchor_episodes: must be >= 1");
    if (plasticity_steps < 1) throw config_error("diagnostics.plasticity_steps: must be >= 1");
    if (diag_max_batch < 1) throw config_error("diagnostics.max_batch: must be >= 1");
    rebrac.validate();
    iql.validate();
    try {
        regularizer.validate();
    } catch (const config_error& e) {
        throw config_error(std::string("regularizer: ") + e.what());
    }
}

RunConfig run_config_from_toml(const TomlDoc& doc) {
    ConfigReader r(doc);
    RunConfig c;

    auto alg_name = r.str("run.algorithm");
    if (!alg_name) throw config_error("run.algorithm: required");
    c.algorithm = *alg_name;
    if (c.algorithm != "rebrac" && c.algorithm != "iql")
        throw config_error("run.algorithm: expected \"rebrac\" or \"iql\", got \"" +
                           c.algorithm + "\"");

    auto env_name = r.str("run.env");
    if (!env_name) throw config_error("run.env: required");
    c.env = *env_name;
    auto known = data::env_names();
    if (std::find(known.begin(), known.end(), c.env) == known.end()) {
        std::string list;
        for (size_t i = 0; i < known.size(); ++i) list += (i ? ", " : "") + known[i];
        throw config_error("run.env: unknown environment \"" + c.env + "\" (known: " + list +
                           ")");
    }
    const bool sparse = sparse_domain(c.env);

    auto dataset = r.str("run.dataset");
    if (!dataset) throw config_error("run.dataset: required");
    c.dataset_path = *dataset;

    c.name = r.str("run.name").value_or("run");
    c.out_dir = r.str("run.out").value_or("runs");
    c.seeds = seed_list(r, "run.seeds", {0});

    c.schedule.steps = int64_field(r, "run.steps", 50000);
    c.schedule.eval_interval = int64_field(r, "run.eval_interval", 2500);
    c.schedule.loss_log_interval = int64_field(r, "run.loss_log_interval", 100);
    c.eval_episodes = int_field(r, "run.eval_episodes", sparse ? 100 : 10);
    c.rar_window = int_field(r, "run.rar_window", stats::default_rar_window(sparse));
    c.anchor_episodes = int_field(r, "run.anchor_episodes", 100);
    c.anchor_seed = seed_field(r, "run.anchor_seed", 9999);

    alg::RebracConfig& rb = c.rebrac;
    rb.discount = sparse ? 0.999f : rb.discount;
    rb.actor_bc_coef = float_field(r, "rebrac.actor_bc_coef", rb.actor_bc_coef);
    rb.critic_bc_coef = float_field(r, "rebrac.critic_bc_coef", rb.critic_bc_coef);
    rb.policy_noise = float_field(r, "rebrac.policy_noise", rb.policy_noise);
    rb.noise_clip = float_field(r, "rebrac.noise_clip", rb.noise_clip);
    rb.policy_update_delay = int_field(r, "rebrac.policy_update_delay", rb.policy_update_delay);
    rb.discount = float_field(r, "rebrac.discount", rb.discount);
    rb.polyak = float_field(r, "rebrac.polyak", rb.polyak);
    rb.batch_size = int_field(r, "rebrac.batch_size", rb.batch_size);
    rb.actor_lr = float_field(r, "rebrac.actor_lr", rb.actor_lr);
    rb.critic_lr = float_field(r, "rebrac.critic_lr", rb.critic_lr);
    if (auto v = r.boolean("rebrac.normalize_q")) rb.normalize_q = *v;
    if (auto v = r.str("rebrac.critic_loss")) {
        if (*v == "mse") rb.critic_loss = alg::CriticLossKind::mse;
        else if (*v == "categorical") rb.critic_loss = alg::CriticLossKind::categorical;
        else
            throw config_error("rebrac.critic_loss: expected \"mse\" or \"categorical\", got \"" +
                               *v + "\"");
    }
    rb.bins = int_field(r, "rebrac.bins", rb.bins);
    rb.hidden_dim = int_field(r, "rebrac.hidden_dim", rb.hidden_dim);
    rb.num_hidden_layers = int_field(r, "rebrac.num_hidden_layers", rb.num_hidden_layers);

    alg::IqlConfig& iq = c.iql;
    iq.discount = sparse ? 0.999f : iq.discount;
    iq.expectile = float_field(r, "iql.expectile", iq.expectile);
    iq.temperature = float_field(r, "iql.temperature", iq.temperature);
    iq.adv_clip = float_field(r, "iql.adv_clip", iq.adv_clip);
    iq.discount = float_field(r, "iql.discount", iq.discount);
    iq.polyak = float_field(r, "iql.polyak", iq.polyak);
    iq.batch_size = int_field(r, "iql.batch_size", iq.batch_size);
    iq.lr = float_field(r, "iql.lr", iq.lr);
    if (auto v = r.boolean("iql.cosine_lr")) iq.cosine_lr = *v;
    iq.lr_decay_steps = int64_field(r, "iql.lr_decay_steps", c.schedule.steps);
    iq.hidden_dim = int_field(r, "iql.hidden_dim", iq.hidden_dim);
    iq.num_hidden_layers = int_field(r, "iql.num_hidden_layers", iq.num_hidden_layers);

    reg::RegularizerConfig& rg = c.regularizer;
    rg.weight_decay_omega = float_field(r, "regularizer.weight_decay_omega", 0.0f);
    rg.weight_decay_alpha = float_field(r, "regularizer.weight_decay_alpha", 0.0f);
    rg.dropout_rate = float_field(r, "regularizer.dropout_rate", 0.0f);
    if (auto v = r.str("regularizer.norm")) {
        try {
            rg.norm_kind = reg::norm_kind_from_name(*v);
        } catch (const config_error& e) {
            throw config_error(std::string("regularizer.norm: ") + e.what());
        }
    }
    rg.group_count = int_field(r, "regularizer.group_count", rg.group_count);
    rg.input_noise = float_field(r, "regularizer.input_noise", 0.0f);
    rg.objective_noise = float_field(r, "regularizer.objective_noise", 0.0f);
    rg.gradient_noise = float_field(r, "regularizer.gradient_noise", 0.0f);
    rg.gradient_noise_decay =
        float_field(r, "regularizer.gradient_noise_decay", rg.gradient_noise_decay);

    c.plasticity_steps = int_field(r, "diagnostics.plasticity_steps", 100);
    c.diag_max_batch = int64_field(r, "diagnostics.max_batch", 4096);

    r.reject_unknown();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_toml(load_toml_file(path));
}

std::string run_config_to_toml(const RunConfig& cfg, std::optional<uint64_t> pinned_seed) {
    std::ostringstream out;
    out << "[run]\n";
    out << "algorithm = \"" << cfg.algorithm << "\"\n";
    out << "env = \"" << cfg.env << "\"\n";
    out << "dataset = " << TomlValue::of_string(cfg.dataset_path).display() << "\n";
    out << "name = " << TomlValue::of_string(cfg.name).display() << "\n";
    out << "out = " << TomlValue::of_string(cfg.out_dir).display() << "\n";
    out << "seeds = [";
    if (pinned_seed) {
        out << *pinned_seed;
    } else {
        for (size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? ", " : "") << cfg.seeds[i];
    }
    out << "]\n";
    out << "steps = " << cfg.schedule.steps << "\n";
    out << "eval_interval = " << cfg.schedule.eval_interval << "\n";
    out << "loss_log_interval = " << cfg.schedule.loss_log_interval << "\n";
    out << "eval_episodes = " << cfg.eval_episodes << "\n";
    out << "rar_window = " << cfg.rar_window << "\n";
    out << "anchor_episodes = " << cfg.anchor_episodes << "\n";
    out << "anchor_seed = " << cfg.anchor_seed << "\n";

    out << "\n[rebrac]\n";
    const alg::RebracConfig& rb = cfg.rebrac;
    out << "actor_bc_coef = " << format_float(rb.actor_bc_coef) << "\n";
    out << "critic_bc_coef = " << format_float(rb.critic_bc_coef) << "\n";
    out << "policy_noise = " << format_float(rb.policy_noise) << "\n";
    out << "noise_clip = " << format_float(rb.noise_clip) << "\n";
    out << "policy_update_delay = " << rb.policy_update_delay << "\n";
    out << "discount = " << format_float(rb.discount) << "\n";
    out << "polyak = " << format_float(rb.polyak) << "\n";
    out << "batch_size = " << rb.batch_size << "\n";
    out << "actor_lr = " << format_float(rb.actor_lr) << "\n";
    out << "critic_lr = " << format_float(rb.critic_lr) << "\n";
    out << "normalize_q = " << (rb.normalize_q ? "true" : "false") << "\n";
    out << "critic_loss = \""
        << (rb.critic_loss == alg::CriticLossKind::mse ? "mse" : "categorical") << "\"\n";
    out << "bins = " << rb.bins << "\n";
    out << "hidden_dim = " << rb.hidden_dim << "\n";
    out << "num_hidden_layers = " << rb.num_hidden_layers << "\n";

    out << "\n[iql]\n";
    const alg::IqlConfig& iq = cfg.iql;
    out << "expectile = " << format_float(iq.expectile) << "\n";
    out << "temperature = " << format_float(iq.temperature) << "\n";
    out << "adv_clip = " << format_float(iq.adv_clip) << "\n";
    out << "discount = " << format_float(iq.discount) << "\n";
    out << "polyak = " << format_float(iq.polyak) << "\n";
    out << "batch_size = " << iq.batch_size << "\n";
    out << "lr = " << format_float(iq.lr) << "\n";
    out << "cosine_lr = " << (iq.cosine_lr ? "true" : "false") << "\n";
    out << "lr_decay_steps = " << iq.lr_decay_steps << "\n";
    out << "hidden_dim = " << iq.hidden_dim << "\n";
    out << "num_hidden_layers = " << iq.num_hidden_layers << "\n";

    out << "\n[regularizer]\n";
    const reg::RegularizerConfig& rg = cfg.regularizer;
    out << "weight_decay_omega = " << format_float(rg.weight_decay_omega) << "\n";
    out << "weight_decay_alpha = " << format_float(rg.weight_decay_alpha) << "\n";
    out << "dropout_rate = " << format_float(rg.dropout_rate) << "\n";
    out << "norm = \"" << reg::norm_kind_name(rg.norm_kind) << "\"\n";
    out << "group_count = " << rg.group_count << "\n";
    out << "input_noise = " << format_float(rg.input_noise) << "\n";
    out << "objective_noise = " << format_float(rg.objective_noise) << "\n";
    out << "gradient_noise = " << format_float(rg.gradient_noise) << "\n";
    out << "gradient_noise_decay = " << format_float(rg.gradient_noise_decay) << "\n";

    out << "\n[diagnostics]\n";
    out << "plasticity_steps = " << cfg.plasticity_steps << "\n";
    out << "max_batch = " << cfg.diag_max_batch << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// SweepSpec

void SweepSpec::validate() const {
    if (axes.empty()) throw config_error("sweep.axes: at least one axis required");
    for (const auto& axis : axes) {
        if (axis.values.empty())
            throw config_error("sweep.axes." + axis.path + ": value list must not be empty");
        for (const auto& v : axis.values)
            if (v.kind == TomlValue::Kind::array)
                throw config_error("sweep.axes." + axis.path + ": elements must be scalars");
    }
    if (tuning_seeds.empty()) throw config_error("sweep.tuning_seeds: must not be empty");
    if (eval_seeds.empty()) throw config_error("sweep.eval_seeds: must not be empty");
    std::set<uint64_t> tuning(tuning_seeds.begin(), tuning_seeds.end());
    if (tuning.size() != tuning_seeds.size())
        throw config_error("sweep.tuning_seeds: duplicate seed");
    std::set<uint64_t> eval(eval_seeds.begin(), eval_seeds.end());
    if (eval.size() != eval_seeds.size()) throw config_error("sweep.eval_seeds: duplicate seed");
    for (uint64_t s : eval_seeds)
        if (tuning.count(s))
            throw config_error("sweep.eval_seeds: seed " + std::to_string(s) +
                               " also appears in sweep.tuning_seeds");
}

SweepSpec sweep_spec_from_toml(const TomlDoc& doc) {
    SweepSpec spec;
    // Pull the sweep entries out; whatever remains is the base run config.
    TomlDoc sweep_only;
    for (const auto& e : doc.entries) {
        if (e.first == "sweep.tuning_seeds" || e.first == "sweep.eval_seeds" ||
            e.first.starts_with("sweep.axes."))
            sweep_only.entries.push_back(e);
        else if (e.first.starts_with("sweep."))
            throw config_error("unknown key '" + e.first + "'");
        else
            spec.base_doc.entries.push_back(e);
    }

    ConfigReader r(sweep_only);
    spec.tuning_seeds = seed_list(r, "sweep.tuning_seeds", {0, 1, 2, 3, 4});
    spec.eval_seeds =
        seed_list(r, "sweep.eval_seeds", {100, 101, 102, 103, 104, 105, 106, 107, 108, 109});
    for (auto& [path, value] : r.take_section("sweep.axes")) {
        SweepAxis axis;
        axis.path = path.substr(std::string("sweep.axes.").size());
        if (value.kind != TomlValue::Kind::array)
            throw config_error(path + ": expected an array of values, got " + value.display());
        axis.values = value.items;
        spec.axes.push_back(std::move(axis));
    }
    r.reject_unknown();

    spec.base = run_config_from_toml(spec.base_doc);
    spec.validate();
    return spec;
}

SweepSpec load_sweep_spec(const std::string& path) {
    return sweep_spec_from_toml(load_toml_file(path));
}

std::vector<SweepCombo> enumerate_combos(const SweepSpec& spec) {
    spec.validate();
    std::vector<SweepCombo> combos;
    std::vector<size_t> idx(spec.axes.size(), 0);
    while (true) {
        SweepCombo combo;
        TomlDoc doc = spec.base_doc;
        for (size_t a = 0; a < spec.axes.size(); ++a) {
            const auto& axis = spec.axes[a];
            const TomlValue& v = axis.values[idx[a]];
            combo.overrides.emplace_back(axis.path, v);
            doc.set(axis.path, v);
            if (a) combo.label += ",";
            combo.label += axis.path + "=" + v.display();
        }
        // Builds and validates the child config now, before any training.
        combo.cfg = run_config_from_toml(doc);
        combos.push_back(std::move(combo));

        // Odometer: last axis fastest, so combos come out in lexicographic
        // order of the declared parameter list.
        size_t a = spec.axes.size();
        while (a > 0) {
            --a;
            if (++idx[a] < spec.axes[a].values.size()) break;
            idx[a] = 0;
            if (a == 0) return combos;
        }
        if (spec.axes.empty()) return combos;
    }
}

std::string resolve_out_root(const std::string& out) {
    std::filesystem::path p(out);
    if (p.is_absolute()) return out;
    if (const char* root = std::getenv("ACTOREG_OUT_ROOT"); root && *root)
        return (std::filesystem::path(root) / p).string();
    return out;
}

}  // namespace actoreg::cli
