#include "actoreg/diag/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "actoreg/common/errors.hpp"
#include "actoreg/net/checkpoint.hpp"

namespace actoreg::diag {

using compute::NoGradGuard;
using compute::Rng;
using compute::Stream;

namespace {

Tensor eval_features(net::Actor& actor, const Tensor& states) {
    if (states.shape().size() != 2 || states.shape()[0] < 1)
        throw shape_error("diagnostics: state batch must be [m,n] with m >= 1");
    NoGradGuard guard;
    return actor.forward(states, reg::Mode::eval).penultimate;
}

std::optional<double> guarded_ratio(double val, double train) {
    if (train == 0.0) return std::nullopt;
    return val / train;
}

}  // namespace

double dead_neuron_fraction(net::Actor& actor, const Tensor& states) {
    auto feats = eval_features(actor, states);
    const int m = feats.shape()[0], h = feats.shape()[1];
    int dead = 0;
    for (int j = 0; j < h; ++j) {
        bool alive = false;
        for (int i = 0; i < m && !alive; ++i)
            alive = feats.data()[static_cast<size_t>(i) * h + j] != 0.0f;
        if (!alive) ++dead;
    }
    return static_cast<double>(dead) / h;
}

double feature_norm(net::Actor& actor, const Tensor& states) {
    auto feats = eval_features(actor, states);
    const int m = feats.shape()[0], h = feats.shape()[1];
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        double sq = 0.0;
        for (int j = 0; j < h; ++j) {
            const double v = feats.data()[static_cast<size_t>(i) * h + j];
            sq += v * v;
        }
        total += std::sqrt(sq);
    }
    return total / m;
}

std::vector<double> singular_values(std::vector<double> mat, int rows, int cols) {
    if (rows < 1 || cols < 1 || mat.size() != static_cast<size_t>(rows) * cols)
        throw shape_error("singular_values: bad matrix dimensions");
    // One-sided Jacobi orthogonalizes columns; work on the transpose when
    // that is the smaller side (singular values are shared).
    if (cols > rows) {
        std::vector<double> t(mat.size());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                t[static_cast<size_t>(j) * rows + i] = mat[static_cast<size_t>(i) * cols + j];
        mat.swap(t);
        std::swap(rows, cols);
    }
    auto col = [&](int j) { return mat.begin() + static_cast<int64_t>(j) * rows; };
    // Column-major access: store columns contiguously for cache behavior.
    {
        std::vector<double> cm(mat.size());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                cm[static_cast<size_t>(j) * rows + i] = mat[static_cast<size_t>(i) * cols + j];
        mat.swap(cm);
    }
    constexpr int kMaxSweeps = 60;
    constexpr double kTol = 1e-14;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < cols - 1; ++p) {
            for (int q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                auto cp = col(p);
                auto cq = col(q);
                for (int i = 0; i < rows; ++i) {
                    app += cp[i] * cp[i];
                    aqq += cq[i] * cq[i];
                    apq += cp[i] * cq[i];
                }
                if (std::fabs(apq) <= kTol * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, zeta) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < rows; ++i) {
                    const double vp = cp[i], vq = cq[i];
                    cp[i] = c * vp - s * vq;
                    cq[i] = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sigma(static_cast<size_t>(cols));
    for (int j = 0; j < cols; ++j) {
        double sq = 0.0;
        auto cj = col(j);
        for (int i = 0; i < rows; ++i) sq += cj[i] * cj[i];
        sigma[static_cast<size_t>(j)] = std::sqrt(sq);
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    return sigma;
}

int srank(const std::vector<double>& mat, int rows, int cols, double delta) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw config_error("srank: delta must lie in (0, 1]");
    auto sigma = singular_values(mat, rows, cols);
    double total = 0.0;
    for (double s : sigma) total += s;
    if (total == 0.0) return 0;
    double acc = 0.0;
    for (size_t k = 0; k < sigma.size(); ++k) {
        acc += sigma[k];
        if (acc / total >= delta) return static_cast<int>(k) + 1;
    }
    return static_cast<int>(sigma.size());
}

int srank(const Tensor& features, double delta) {
    if (features.shape().size() != 2)
        throw shape_error("srank: features must be a [m,n] matrix");
    const int m = features.shape()[0], n = features.shape()[1];
    std::vector<double> mat(static_cast<size_t>(m) * n);
    for (int64_t i = 0; i < features.numel(); ++i)
        mat[static_cast<size_t>(i)] = features.data()[static_cast<size_t>(i)];
    return srank(mat, m, n, delta);
}

double plasticity_loss(net::Actor& actor, const Tensor& states, const Tensor& actions,
                       const compute::AdamConfig& adam, int steps) {
    if (steps < 0) throw config_error("plasticity_loss: steps must be >= 0");
    if (states.shape()[0] != actions.shape()[0])
        throw shape_error("plasticity_loss: states and actions disagree on batch size");

    // Probe a clone so the production actor stays bit-identical.
    Rng scratch(0, Stream::diagnostics);
    net::Actor clone(actor.spec(), scratch);
    {
        auto src = actor.net().named_tensors();
        auto dst = clone.net().named_tensors();
        for (size_t i = 0; i < src.size(); ++i) {
            auto s = src[i].second.data();
            auto d = dst[i].second.mutable_data();
            std::copy(s.begin(), s.end(), d.begin());
        }
    }
    // Deterministic probe: eval-mode forwards (no dropout, frozen norm
    // statistics) while the weights themselves take the gradient steps.
    auto bc_loss = [&]() {
        auto out = clone.forward(states, reg::Mode::eval);
        return compute::mean(compute::square(compute::sub(out.output, actions)));
    };
    compute::Adam opt(clone.net().parameters(), adam);
    for (int t = 0; t < steps; ++t) {
        opt.zero_grad();
        auto loss = bc_loss();
        compute::backward(loss);
        opt.step();
    }
    NoGradGuard guard;
    return bc_loss().item();
}

std::pair<Tensor, Tensor> gather_rows(const data::TransitionDataset& ds,
                                      const std::vector<int64_t>& indices) {
    if (indices.empty()) throw config_error("gather_rows: empty index list");
    const int n = ds.state_dim, m = ds.action_dim;
    const auto count = static_cast<int>(indices.size());
    Tensor s = Tensor::zeros({count, n});
    Tensor a = Tensor::zeros({count, m});
    auto sd = s.mutable_data();
    auto ad = a.mutable_data();
    for (int r = 0; r < count; ++r) {
        const auto i = indices[static_cast<size_t>(r)];
        if (i < 0 || i >= ds.size)
            throw contract_error("gather_rows: index out of range");
        std::copy_n(ds.states.begin() + i * n, n, sd.begin() + static_cast<int64_t>(r) * n);
        std::copy_n(ds.actions.begin() + i * m, m, ad.begin() + static_cast<int64_t>(r) * m);
    }
    return {s, a};
}

namespace {

std::vector<int64_t> capped_subsample(const std::vector<int64_t>& idx, int64_t cap,
                                      Rng& rng) {
    if (static_cast<int64_t>(idx.size()) <= cap) return idx;
    std::vector<int64_t> pool = idx;
    for (int64_t i = 0; i < cap; ++i) {  // partial Fisher-Yates: first `cap` slots
        const auto j = i + static_cast<int64_t>(
                               rng.uniform_int(static_cast<uint64_t>(pool.size() - i)));
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(cap));
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

DiagnosticsReport diagnostics_report(net::Actor& actor, const data::TransitionDataset& ds,
                                     const data::SplitDataset& split,
                                     const compute::AdamConfig& adam, int64_t step,
                                     uint64_t seed, int plasticity_steps,
                                     int64_t max_batch) {
    if (split.train.empty() || split.validation.empty())
        throw config_error("diagnostics_report: both splits must be nonempty");
    Rng rng(seed, Stream::diagnostics);
    const auto train_idx = capped_subsample(split.train, max_batch, rng);
    const auto val_idx = capped_subsample(split.validation, max_batch, rng);
    auto [train_s, train_a] = gather_rows(ds, train_idx);
    auto [val_s, val_a] = gather_rows(ds, val_idx);
    (void)train_a;

    DiagnosticsReport r;
    r.step = step;
    r.dead_fraction_train = dead_neuron_fraction(actor, train_s);
    r.dead_fraction_val = dead_neuron_fraction(actor, val_s);
    r.feature_norm_train = feature_norm(actor, train_s);
    r.feature_norm_val = feature_norm(actor, val_s);
    {
        NoGradGuard guard;
        r.srank_train = srank(actor.forward(train_s, reg::Mode::eval).penultimate);
        r.srank_val = srank(actor.forward(val_s, reg::Mode::eval).penultimate);
    }
    r.plasticity_loss = plasticity_loss(actor, val_s, val_a, adam, plasticity_steps);
    r.dead_ratio = guarded_ratio(r.dead_fraction_val, r.dead_fraction_train);
    r.feature_norm_ratio = guarded_ratio(r.feature_norm_val, r.feature_norm_train);
    r.srank_ratio = guarded_ratio(static_cast<double>(r.srank_val),
                                  static_cast<double>(r.srank_train));
    return r;
}

std::string to_json_line(const DiagnosticsReport& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["dead_fraction_train"] = r.dead_fraction_train;
    j["dead_fraction_val"] = r.dead_fraction_val;
    j["feature_norm_train"] = r.feature_norm_train;
    j["feature_norm_val"] = r.feature_norm_val;
    j["srank_train"] = r.srank_train;
    j["srank_val"] = r.srank_val;
    j["plasticity_loss"] = r.plasticity_loss;
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    j["dead_ratio"] = opt(r.dead_ratio);
    j["feature_norm_ratio"] = opt(r.feature_norm_ratio);
    j["srank_ratio"] = opt(r.srank_ratio);
    return j.dump();
}

void append_line(const std::string& path, const std::string& line) {
    std::ofstream os(path, std::ios::app);
    if (!os) throw io_error("cannot append to '" + path + "'");
    os << line << "\n";
}

}  // namespace actoreg::diag
