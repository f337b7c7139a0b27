// Acceptance gate: one check per shipped guarantee, each printed as a
// PASS/FAIL line with its runtime. Exit code is the number of failures.
//
// Every check carries its own independent oracle: double-precision reference
// forwards for gradient checks, Eigen SVD for spectral estimates and srank,
// direct enumeration for the evaluation statistics, and hand-built networks
// for the diagnostic probes. Tolerances are pinned next to each check.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <omp.h>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "actoreg/alg/trainers.hpp"
#include "actoreg/cli/config.hpp"
#include "actoreg/cli/experiment.hpp"
#include "actoreg/common/errors.hpp"
#include "actoreg/compute/rng.hpp"
#include "actoreg/compute/tensor.hpp"
#include "actoreg/data/dataset.hpp"
#include "actoreg/data/env.hpp"
#include "actoreg/diag/diagnostics.hpp"
#include "actoreg/net/actor_critic.hpp"
#include "actoreg/reg/regularizers.hpp"
#include "actoreg/stats/stats.hpp"
#include "oracles/ref_math.hpp"

namespace ac = actoreg::compute;
namespace alg = actoreg::alg;
namespace cli = actoreg::cli;
namespace data = actoreg::data;
namespace diag = actoreg::diag;
namespace net = actoreg::net;
namespace reg = actoreg::reg;
namespace stats = actoreg::stats;
namespace fs = std::filesystem;
using oracle::dvec;

namespace {

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

struct Check {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += why;
    }
    void require(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ------------------------------------------------------------------ helpers

std::vector<float> rand_vec(ac::Rng& rng, size_t n, float lo, float hi) {
    std::vector<float> v(n);
    rng.fill_uniform(v, lo, hi);
    return v;
}

double eigen_top_sigma(const std::vector<double>& m, int r, int c) {
    Eigen::MatrixXd e(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) e(i, j) = m[static_cast<size_t>(i) * c + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
    return svd.singularValues()(0);
}

int eigen_srank(const std::vector<double>& m, int r, int c, double delta) {
    Eigen::MatrixXd e(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) e(i, j) = m[static_cast<size_t>(i) * c + j];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
    const auto& sv = svd.singularValues();
    double total = 0.0;
    for (int i = 0; i < sv.size(); ++i) total += sv(i);
    if (total <= 0.0) return 0;
    double acc = 0.0;
    for (int i = 0; i < sv.size(); ++i) {
        acc += sv(i);
        if (acc >= delta * total) return i + 1;
    }
    return static_cast<int>(sv.size());
}

data::Policy policy_of(net::Actor& a, int state_dim) {
    return [&a, state_dim](std::span<const float> s) {
        ac::Tensor x = ac::Tensor::from({1, state_dim}, std::vector<float>(s.begin(), s.end()));
        auto d = a.act(x).data();
        return std::vector<float>(d.begin(), d.end());
    };
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// =======================================================================
// [1] Gradient oracle: random MLP configurations, autodiff vs central
//     finite differences of an independent double-precision forward.
// =======================================================================

// Double-precision re-implementation of the eval-mode MLP forward. Constants
// (spectral u/v, feature-norm running stats, loss coefficients) are captured
// from the production network; trainable parameters and the input arrive
// packed in Mlp::parameters() order with the input appended last.
struct RefForward {
    int in = 0, out = 0, hidden = 0, layers = 0, groups = 1, m = 0;
    reg::NormKind norm = reg::NormKind::none;
    net::OutputHead head = net::OutputHead::linear;
    std::vector<dvec> sn_u, sn_v;          // per layer, spectral only
    std::vector<dvec> run_mean, run_var;   // per layer, feature only
    dvec c_out;                            // [m*out] loss coefficients
    dvec c_std;                            // [out], gaussian head only

    bool affine_norm() const {
        return norm == reg::NormKind::layer || norm == reg::NormKind::feature ||
               norm == reg::NormKind::group;
    }
    int layer_in(int l) const { return l == 0 ? in : hidden; }

    size_t packed_size() const {
        size_t n = 0;
        for (int l = 0; l < layers; ++l) n += static_cast<size_t>(layer_in(l)) * hidden + hidden;
        n += static_cast<size_t>(hidden) * out + out;      // output layer
        if (affine_norm()) n += static_cast<size_t>(layers) * 2 * hidden;
        if (head == net::OutputHead::gaussian) n += out;
        n += static_cast<size_t>(m) * in;                  // probe input
        return n;
    }

    // Runs the forward; when margin is given, records the smallest |pre| over
    // every ReLU preactivation so callers can reject kink-adjacent probes.
    double operator()(const dvec& p, double* margin = nullptr) const {
        size_t off = 0;
        auto take = [&](size_t n) {
            const double* q = p.data() + off;
            off += n;
            return q;
        };
        std::vector<const double*> w(static_cast<size_t>(layers)), b(static_cast<size_t>(layers));
        for (int l = 0; l < layers; ++l) {
            w[static_cast<size_t>(l)] = take(static_cast<size_t>(layer_in(l)) * hidden);
            b[static_cast<size_t>(l)] = take(static_cast<size_t>(hidden));
        }
        const double* wo = take(static_cast<size_t>(hidden) * out);
        const double* bo = take(static_cast<size_t>(out));
        std::vector<const double*> ga(static_cast<size_t>(layers)), be(static_cast<size_t>(layers));
        if (affine_norm())
            for (int l = 0; l < layers; ++l) {
                ga[static_cast<size_t>(l)] = take(static_cast<size_t>(hidden));
                be[static_cast<size_t>(l)] = take(static_cast<size_t>(hidden));
            }
        const double* ls = head == net::OutputHead::gaussian ? take(static_cast<size_t>(out))
                                                             : nullptr;
        const double* x = take(static_cast<size_t>(m) * in);

        dvec h(x, x + static_cast<size_t>(m) * in);
        int cur = in;
        for (int l = 0; l < layers; ++l) {
            dvec wl(w[static_cast<size_t>(l)],
                    w[static_cast<size_t>(l)] + static_cast<size_t>(cur) * hidden);
            if (norm == reg::NormKind::spectral) {
                // sigma_hat = u W v with the captured power-iteration state.
                const dvec& u = sn_u[static_cast<size_t>(l)];
                const dvec& v = sn_v[static_cast<size_t>(l)];
                double sigma = 0.0;
                for (int i = 0; i < cur; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < hidden; ++j)
                        acc += wl[static_cast<size_t>(i) * hidden + j] * v[static_cast<size_t>(j)];
                    sigma += u[static_cast<size_t>(i)] * acc;
                }
                sigma = std::max(sigma, 1e-12);
                for (double& e : wl) e /= sigma;
            }
            dvec pre = oracle::matmul(h, wl, m, cur, hidden);
            for (int r = 0; r < m; ++r)
                for (int j = 0; j < hidden; ++j) {
                    double& e = pre[static_cast<size_t>(r) * hidden + j];
                    e += b[static_cast<size_t>(l)][j];
                    if (margin) *margin = std::min(*margin, std::fabs(e));
                    e = std::max(e, 0.0);
                }
            h = std::move(pre);
            switch (norm) {
                case reg::NormKind::layer:
                case reg::NormKind::group: {
                    dvec g(ga[static_cast<size_t>(l)], ga[static_cast<size_t>(l)] + hidden);
                    dvec bt(be[static_cast<size_t>(l)], be[static_cast<size_t>(l)] + hidden);
                    h = oracle::group_norm_rows(h, g, bt, m, hidden,
                                                norm == reg::NormKind::layer ? 1 : groups, 1e-5);
                    break;
                }
                case reg::NormKind::feature: {
                    const dvec& rm = run_mean[static_cast<size_t>(l)];
                    const dvec& rv = run_var[static_cast<size_t>(l)];
                    for (int r = 0; r < m; ++r)
                        for (int j = 0; j < hidden; ++j) {
                            double& e = h[static_cast<size_t>(r) * hidden + j];
                            e = (e - rm[static_cast<size_t>(j)]) /
                                    std::sqrt(rv[static_cast<size_t>(j)] + 1e-5) *
                                    ga[static_cast<size_t>(l)][j] +
                                be[static_cast<size_t>(l)][j];
                        }
                    break;
                }
                default: break;  // none / spectral: no layer after the ReLU
            }
            cur = hidden;
        }
        dvec y = oracle::matmul(h, dvec(wo, wo + static_cast<size_t>(hidden) * out), m, hidden,
                                out);
        double loss = 0.0;
        for (int r = 0; r < m; ++r)
            for (int j = 0; j < out; ++j) {
                double e = y[static_cast<size_t>(r) * out + j] + bo[j];
                if (head == net::OutputHead::tanh_bounded) e = std::tanh(e);
                loss += c_out[static_cast<size_t>(r) * out + j] * e;
            }
        if (head == net::OutputHead::gaussian)
            for (int j = 0; j < out; ++j)
                loss += c_std[static_cast<size_t>(j)] * std::clamp(ls[j], -5.0, 2.0);
        return loss;
    }
};

Check criterion_gradients() {
    Check ck;
    const int kConfigs = 200;
    const double kRel = 1e-4, kAbsFloor = 1e-6;
    double worst = 0.0;
    int checked = 0;

    for (int idx = 0; idx < kConfigs && ck.pass; ++idx) {
        const int combo = idx % 10;  // 5 norm kinds x dropout {off, on}

        // A zero-init bias downstream of a fully-dead (or width-1 normed)
        // layer pins a preactivation exactly on the ReLU kink for every
        // input, which no finite-difference scheme can probe. Such draws are
        // redrawn: dims and init get a fresh seed, inputs get several tries,
        // and the config only counts once a kink-free probe exists.
        std::optional<net::Mlp> mlp;
        RefForward ref;
        std::vector<float> xv;
        dvec packed;
        bool found = false;
        for (uint64_t redraw = 0; redraw < 10 && !found; ++redraw) {
            const uint64_t salt = static_cast<uint64_t>(idx) + 100000 * redraw;
            ac::Rng dims(4000 + salt, ac::Stream::init);
            ref = RefForward{};
            ref.norm = static_cast<reg::NormKind>(combo / 2);
            ref.layers = 1 + static_cast<int>(dims.next_u64() % 3);
            ref.groups = 4;
            ref.hidden = ref.norm == reg::NormKind::group
                             ? 4 * (1 + static_cast<int>(dims.next_u64() % 8))
                             : 1 + static_cast<int>(dims.next_u64() % 32);
            ref.in = 1 + static_cast<int>(dims.next_u64() % 8);
            ref.out = 1 + static_cast<int>(dims.next_u64() % 6);
            ref.m = 1 + static_cast<int>(dims.next_u64() % 5);
            ref.head = static_cast<net::OutputHead>(idx % 3);

            net::MlpSpec spec;
            spec.input_dim = ref.in;
            spec.output_dim = ref.out;
            spec.hidden_dim = ref.hidden;
            spec.num_hidden_layers = ref.layers;
            spec.norm_kind = ref.norm;
            spec.dropout_rate = combo % 2 == 1 ? 0.15f : 0.0f;
            spec.output_head = ref.head;
            spec.group_count = ref.groups;

            ac::Rng init(5000 + salt, ac::Stream::init);
            mlp.emplace(spec, init);

            if (ref.norm == reg::NormKind::feature) {
                // Move the running stats off their identity start so the
                // eval path sees non-trivial constants.
                ac::Rng wrng(6000 + salt, ac::Stream::batch);
                ac::Tensor warm = ac::Tensor::from(
                    {6, ref.in}, rand_vec(wrng, 6 * static_cast<size_t>(ref.in), -1.5f, 1.5f));
                ac::Rng drng(6000 + salt, ac::Stream::dropout);
                (void)mlp->forward(warm, reg::Mode::train, &drng);
            }
            for (auto& [name, t] : mlp->named_tensors()) {
                auto d = t.data();
                if (name.ends_with("sn_u")) ref.sn_u.emplace_back(d.begin(), d.end());
                if (name.ends_with("sn_v")) ref.sn_v.emplace_back(d.begin(), d.end());
                if (name.ends_with("running_mean")) ref.run_mean.emplace_back(d.begin(), d.end());
                if (name.ends_with("running_var")) ref.run_var.emplace_back(d.begin(), d.end());
            }

            ac::Rng xrng(7000 + salt, ac::Stream::batch);
            dvec packed_params;
            for (auto& t : mlp->parameters()) {
                auto d = t.data();
                packed_params.insert(packed_params.end(), d.begin(), d.end());
            }
            ref.c_out = dvec(static_cast<size_t>(ref.m) * ref.out);
            for (auto& c : ref.c_out)
                c = -1.0 + 2.0 * static_cast<double>(xrng.next_u64() % 1000) / 999.0;
            if (ref.head == net::OutputHead::gaussian) {
                ref.c_std = dvec(static_cast<size_t>(ref.out));
                for (auto& c : ref.c_std)
                    c = -1.0 + 2.0 * static_cast<double>(xrng.next_u64() % 1000) / 999.0;
            }
            for (int attempt = 0; attempt < 8 && !found; ++attempt) {
                xv = rand_vec(xrng, static_cast<size_t>(ref.m) * ref.in, -1.5f, 1.5f);
                packed = packed_params;
                for (float v : xv) packed.push_back(static_cast<double>(v));
                double margin = 1e30;
                (void)ref(packed, &margin);
                found = margin > 1e-3;
            }
        }
        ck.require(found, fmt("config %d: no kink-free probe found after redraws", idx));
        if (!found) break;
        auto params = mlp->parameters();
        ck.require(packed.size() == ref.packed_size(),
                   fmt("config %d: packed %zu values, layout expects %zu", idx, packed.size(),
                       ref.packed_size()));

        // Autodiff side on the same probe.
        ac::Tensor x = ac::Tensor::from({ref.m, ref.in}, xv, true);
        net::MlpOut o = mlp->forward(x, reg::Mode::eval);
        std::vector<float> cf(ref.c_out.begin(), ref.c_out.end());
        ac::Tensor loss = ac::sum(ac::mul(o.output, ac::Tensor::from({ref.m, ref.out}, cf)));
        if (ref.head == net::OutputHead::gaussian) {
            std::vector<float> cs(ref.c_std.begin(), ref.c_std.end());
            loss = ac::add(loss,
                           ac::sum(ac::mul(o.log_std, ac::Tensor::from({1, ref.out}, cs))));
        }
        ac::backward(loss);

        const double want = ref(packed);
        ck.require(std::fabs(loss.item() - want) <=
                       std::max(1e-5, 1e-4 * std::max(std::fabs(want), 1.0)),
                   fmt("config %d: forward %.8g vs reference %.8g", idx, loss.item(), want));

        const dvec fd = oracle::finite_diff(ref, packed);
        size_t off = 0;
        auto compare = [&](std::span<const float> g, const char* what) {
            for (size_t i = 0; i < g.size(); ++i, ++off) {
                const double a = g[i], b = fd[off];
                const double scale = std::max(std::fabs(a), std::fabs(b));
                const double err = std::fabs(a - b);
                if (scale > kAbsFloor) worst = std::max(worst, err / std::max(scale, 1.0e-300));
                ++checked;
                if (err > std::max(kAbsFloor, kRel * scale))
                    ck.fail(fmt("config %d %s[%zu]: ad=%.8g fd=%.8g", idx, what, i, a, b));
            }
        };
        for (size_t pi = 0; pi < params.size() && ck.pass; ++pi) {
            auto g = params[pi].grad();
            compare(g, fmt("param%zu", pi).c_str());
        }
        if (ck.pass) compare(x.grad(), "input");
    }
    if (ck.pass)
        ck.detail = fmt("%d configs, %d gradients, max rel err %.2e", kConfigs, checked, worst);
    return ck;
}

// =======================================================================
// [2] Regularizer analytic suite.
// =======================================================================

Check criterion_regularizers() {
    Check ck;

    // Elastic net against the closed form omega*(alpha*sum|w| + (1-alpha)*w^2),
    // gradient omega*(alpha*sign(w) + 2*(1-alpha)*w) with sign(0) = 0.
    {
        const std::vector<float> v1 = {1.0f, -2.0f, 0.0f, 3.0f}, v2 = {0.5f};
        const float omega = 0.7f;
        for (float alpha : {0.0f, 0.5f, 1.0f}) {
            std::vector<ac::Tensor> ws = {ac::Tensor::from({2, 2}, v1, true),
                                          ac::Tensor::from({1, 1}, v2, true)};
            ac::Tensor p = reg::elastic_net_penalty(ws, omega, alpha);
            double l1 = 0.0, l2 = 0.0;
            for (float w : v1) l1 += std::fabs(w), l2 += static_cast<double>(w) * w;
            for (float w : v2) l1 += std::fabs(w), l2 += static_cast<double>(w) * w;
            const double want = omega * (alpha * l1 + (1.0 - alpha) * l2);
            ck.require(std::fabs(p.item() - want) < 1e-5,
                       fmt("elastic net value alpha=%.1f: %.8g vs %.8g", alpha, p.item(), want));
            ac::backward(p);
            for (auto& w : ws) {
                auto g = w.grad();
                auto d = w.data();
                for (size_t i = 0; i < g.size(); ++i) {
                    const double sgn = d[i] > 0.0f ? 1.0 : (d[i] < 0.0f ? -1.0 : 0.0);
                    const double want_g =
                        omega * (alpha * sgn + 2.0 * (1.0 - alpha) * static_cast<double>(d[i]));
                    ck.require(std::fabs(g[i] - want_g) < 1e-5,
                               fmt("elastic net grad alpha=%.1f w=%g: %.8g vs %.8g", alpha, d[i],
                                   g[i], want_g));
                }
            }
        }
    }

    // Inverted dropout is unbiased: the mean over 1e5 masks of a unit input
    // stays within +-2%, and eval mode is the exact identity.
    {
        const size_t n = 100000;
        for (float rate : {0.2f, 0.5f}) {
            ac::Tensor x = ac::Tensor::full({1, static_cast<int>(n)}, 1.0f);
            ac::Rng rng(11, ac::Stream::dropout);
            ac::Tensor y = reg::dropout_forward(x, rate, &rng, reg::Mode::train);
            const double mean = oracle::kahan_sum(y.data().data(), n) / static_cast<double>(n);
            ck.require(std::fabs(mean - 1.0) < 0.02,
                       fmt("dropout rate %.1f: mean %.4f off unit by >2%%", rate, mean));
            ac::Tensor ye = reg::dropout_forward(x, rate, nullptr, reg::Mode::eval);
            ck.require(std::memcmp(ye.data().data(), x.data().data(), n * sizeof(float)) == 0,
                       "dropout eval mode is not the identity");
        }
    }

    // Layer-norm output moments per row: |mean| < 1e-5 and |var - 1| < 1e-3.
    {
        const int m = 32, n = 64;
        ac::Rng rng(12, ac::Stream::batch);
        std::vector<float> xv(static_cast<size_t>(m) * n);
        rng.fill_normal(xv, 1.0f, 2.0f);  // shifted and scaled
        ac::Tensor x = ac::Tensor::from({m, n}, xv);
        ac::Tensor y = reg::layer_norm(x, ac::Tensor::full({n}, 1.0f), ac::Tensor::zeros({n}));
        auto d = y.data();
        for (int r = 0; r < m; ++r) {
            double mu = 0.0;
            for (int j = 0; j < n; ++j) mu += d[static_cast<size_t>(r) * n + j];
            mu /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                const double e = d[static_cast<size_t>(r) * n + j] - mu;
                var += e * e;
            }
            var /= n;
            ck.require(std::fabs(mu) < 1e-5, fmt("layer norm row %d mean %.2e", r, mu));
            ck.require(std::fabs(var - 1.0) < 1e-3, fmt("layer norm row %d var %.6f", r, var));
        }
    }

    // Spectral estimate vs dense SVD on 100 random matrices up to 16x16:
    // |sigma_hat - sigma_svd| < 1e-3, sigma_hat observed from the returned
    // scaled weight.
    {
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            ac::Rng rng(300 + static_cast<uint64_t>(t), ac::Stream::init);
            const int r = 1 + static_cast<int>(rng.next_u64() % 16);
            const int c = 1 + static_cast<int>(rng.next_u64() % 16);
            std::vector<float> wv = rand_vec(rng, static_cast<size_t>(r) * c, -1.0f, 1.0f);
            ac::Tensor w = ac::Tensor::from({r, c}, wv);
            reg::SpectralState st(r, c, rng);
            ac::Tensor wn = reg::spectral_normalize(w, st, 3000, true);
            size_t imax = 0;
            for (size_t i = 0; i < wv.size(); ++i)
                if (std::fabs(wv[i]) > std::fabs(wv[imax])) imax = i;
            const double sigma_hat =
                static_cast<double>(wv[imax]) / static_cast<double>(wn.data()[imax]);
            const double sigma_svd = eigen_top_sigma(dvec(wv.begin(), wv.end()), r, c);
            worst = std::max(worst, std::fabs(sigma_hat - sigma_svd));
            ck.require(std::fabs(sigma_hat - sigma_svd) < 1e-3,
                       fmt("spectral %dx%d: sigma_hat %.6f vs svd %.6f", r, c, sigma_hat,
                           sigma_svd));
        }
        if (ck.pass) ck.detail = fmt("spectral max |err| %.2e", worst);
    }

    // Gradient-noise schedule nu/(1+t)^gamma, exact at t = 0 and t = 99.
    {
        ck.require(reg::gradient_noise_scale(0.1, 0, 0.55) == 0.1,
                   "noise schedule at t=0 is not nu");
        const double at99 = reg::gradient_noise_scale(0.1, 99, 0.55);
        ck.require(at99 == 0.1 / std::pow(100.0, 0.55), "noise schedule at t=99 mismatch");
        ck.require(std::fabs(at99 - 0.007943) < 1e-6,
                   fmt("noise schedule at t=99: %.6f, expected ~0.007943", at99));
        ck.require(reg::gradient_noise_scale(0.3, 7, 0.25) == 0.3 / std::pow(8.0, 0.25),
                   "noise schedule generic point mismatch");
    }
    return ck;
}

// =======================================================================
// [3] Statistics oracle: direct enumeration on all-integer matrices.
// =======================================================================

stats::ScoreMatrix make_matrix(std::vector<std::vector<double>> scores) {
    stats::ScoreMatrix m;
    m.algorithm = "a";
    const size_t t = scores.empty() ? 0 : scores[0].size();
    for (size_t i = 0; i < t; ++i) m.tasks.push_back("task" + std::to_string(i));
    for (size_t r = 0; r < scores.size(); ++r) m.seeds.push_back(r + 1);
    m.scores = std::move(scores);
    return m;
}

double enum_median(const stats::ScoreMatrix& m) {
    std::vector<double> task_means;
    for (size_t t = 0; t < m.tasks.size(); ++t) {
        double acc = 0.0;
        for (const auto& row : m.scores) acc += row[t];
        task_means.push_back(acc / static_cast<double>(m.scores.size()));
    }
    std::sort(task_means.begin(), task_means.end());
    const size_t n = task_means.size();
    return n % 2 == 1 ? task_means[n / 2] : 0.5 * (task_means[n / 2 - 1] + task_means[n / 2]);
}

double enum_iqm(const stats::ScoreMatrix& m) {
    std::vector<double> flat;
    for (const auto& row : m.scores) flat.insert(flat.end(), row.begin(), row.end());
    std::sort(flat.begin(), flat.end());
    const size_t drop = static_cast<size_t>(std::floor(0.25 * static_cast<double>(flat.size())));
    double acc = 0.0;
    size_t kept = 0;
    for (size_t i = drop; i + drop < flat.size(); ++i, ++kept) acc += flat[i];
    return acc / static_cast<double>(kept);
}

double enum_mean(const stats::ScoreMatrix& m) {
    double acc = 0.0;
    size_t n = 0;
    for (const auto& row : m.scores)
        for (double v : row) acc += v, ++n;
    return acc / static_cast<double>(n);
}

double enum_gap(const stats::ScoreMatrix& m) {
    double acc = 0.0;
    size_t n = 0;
    for (const auto& row : m.scores)
        for (double v : row) acc += std::max(0.0, 1.0 - v / 100.0), ++n;
    return acc / static_cast<double>(n);
}

double enum_poi(const stats::ScoreMatrix& a, const stats::ScoreMatrix& b) {
    double acc = 0.0;
    for (size_t t = 0; t < a.tasks.size(); ++t) {
        double wins = 0.0;
        int pairs = 0;
        for (const auto& ra : a.scores)
            for (const auto& rb : b.scores) {
                if (ra[t] > rb[t]) wins += 1.0;
                else if (ra[t] == rb[t]) wins += 0.5;
                ++pairs;
            }
        acc += wins / pairs;
    }
    return acc / static_cast<double>(a.tasks.size());
}

Check criterion_statistics() {
    Check ck;
    ac::Rng rng(21, ac::Stream::eval);

    for (int t = 0; t < 100 && ck.pass; ++t) {
        std::vector<std::vector<double>> sa(6, std::vector<double>(5));
        std::vector<std::vector<double>> sb(6, std::vector<double>(5));
        for (auto& row : sa)
            for (auto& v : row) v = static_cast<double>(rng.next_u64() % 201);
        for (auto& row : sb)
            for (auto& v : row) v = static_cast<double>(rng.next_u64() % 201);
        const auto a = make_matrix(sa), b = make_matrix(sb);

        ck.require(stats::median_score(a) == enum_median(a), fmt("case %d: median", t));
        ck.require(stats::iqm(a) == enum_iqm(a), fmt("case %d: iqm", t));
        ck.require(stats::grand_mean(a) == enum_mean(a), fmt("case %d: mean", t));
        ck.require(stats::optimality_gap(a) == enum_gap(a), fmt("case %d: gap", t));
        ck.require(stats::poi_point(a, b) == enum_poi(a, b), fmt("case %d: poi", t));
        const std::vector<double> taus = {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
        const auto prof = stats::performance_profile(a, taus);
        for (size_t i = 0; i < taus.size(); ++i) {
            int above = 0, total = 0;
            for (const auto& row : a.scores)
                for (double v : row) {
                    if (v / 100.0 > taus[i]) ++above;
                    ++total;
                }
            ck.require(prof[i] == static_cast<double>(above) / total,
                       fmt("case %d: profile tau=%.2f", t, taus[i]));
        }
    }

    // Worked examples. Raw scores are on the 0-100 scale; the quoted gap
    // values live in the post-division units.
    const auto m18 = make_matrix({{1}, {2}, {3}, {4}, {5}, {6}, {7}, {8}});
    ck.require(stats::iqm(m18) == 4.5, "iqm of 1..8 is not 4.5");
    const auto half = make_matrix({{50.0}, {150.0}});
    ck.require(stats::optimality_gap(half) == 0.25, "gap of {50,150} is not 0.25");

    // PoI symmetry without ties: strict per-task dominance gives exact
    // fractions, interleaved odd/even scores stay within double rounding.
    {
        const auto A = make_matrix({{100, 50}, {100, 50}});
        const auto B = make_matrix({{50, 100}, {50, 100}});
        ck.require(stats::poi_point(A, B) == 0.5 && stats::poi_point(B, A) == 0.5,
                   "split dominance PoI is not 1/2");
        ck.require(stats::poi_point(A, B) + stats::poi_point(B, A) == 1.0,
                   "dominance PoI does not sum to 1");
        for (int t = 0; t < 20; ++t) {
            std::vector<std::vector<double>> sa(6, std::vector<double>(5));
            std::vector<std::vector<double>> sb(6, std::vector<double>(5));
            for (auto& row : sa)
                for (auto& v : row) v = static_cast<double>(2 * (rng.next_u64() % 100) + 1);
            for (auto& row : sb)
                for (auto& v : row) v = static_cast<double>(2 * (rng.next_u64() % 100));
            const auto A2 = make_matrix(sa), B2 = make_matrix(sb);
            const double s = stats::poi_point(A2, B2) + stats::poi_point(B2, A2);
            ck.require(std::fabs(s - 1.0) < 1e-12,
                       fmt("tie-free PoI case %d sums to %.17g", t, s));
        }
    }
    if (ck.pass) ck.detail = "100 integer matrices + worked examples, exact equality";
    return ck;
}

// =======================================================================
// [4] Diagnostics oracle.
// =======================================================================

Check criterion_diagnostics() {
    Check ck;

    // srank vs dense SVD on 50 random matrices.
    for (int t = 0; t < 50; ++t) {
        ac::Rng rng(500 + static_cast<uint64_t>(t), ac::Stream::diagnostics);
        const int r = 2 + static_cast<int>(rng.next_u64() % 30);
        const int c = 2 + static_cast<int>(rng.next_u64() % 24);
        std::vector<float> mv = rand_vec(rng, static_cast<size_t>(r) * c, -2.0f, 2.0f);
        const dvec md(mv.begin(), mv.end());
        const double delta = t % 2 == 0 ? 0.99 : 0.9;
        ck.require(diag::srank(md, r, c, delta) == eigen_srank(md, r, c, delta),
                   fmt("srank %dx%d delta=%.2f mismatch", r, c, delta));
    }

    // Hand-built actor: zero first-layer weights and bias [-100,1,-100,1]
    // make units 0 and 2 dead on every input, so the dead fraction is 1/2
    // and every penultimate row is [0,1,0,1] with L2 norm sqrt(2).
    {
        net::MlpSpec spec;
        spec.input_dim = 3;
        spec.output_dim = 2;
        spec.hidden_dim = 4;
        spec.num_hidden_layers = 1;
        spec.output_head = net::OutputHead::tanh_bounded;
        ac::Rng rng(31, ac::Stream::init);
        net::Actor actor(spec, rng);
        for (auto& [name, t] : actor.net().named_tensors()) {
            if (name == "h0.w") std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0f);
            if (name == "h0.b") {
                auto d = t.mutable_data();
                d[0] = -100.0f, d[1] = 1.0f, d[2] = -100.0f, d[3] = 1.0f;
            }
        }
        ac::Rng xr(32, ac::Stream::batch);
        ac::Tensor states = ac::Tensor::from({16, 3}, rand_vec(xr, 48, -1.0f, 1.0f));
        ck.require(diag::dead_neuron_fraction(actor, states) == 0.5,
                   "hand case: dead fraction is not 1/2");
        ck.require(std::fabs(diag::feature_norm(actor, states) - std::sqrt(2.0)) < 1e-6,
                   "hand case: feature norm is not sqrt(2)");
    }

    // Plasticity probe: the default runs exactly 100 steps (same result as
    // steps=100, different from 99) and leaves the probed actor bit-identical.
    {
        net::MlpSpec spec;
        spec.input_dim = 4;
        spec.output_dim = 2;
        spec.hidden_dim = 16;
        spec.num_hidden_layers = 2;
        spec.output_head = net::OutputHead::tanh_bounded;
        ac::Rng rng(33, ac::Stream::init);
        net::Actor actor(spec, rng);
        ac::Rng xr(34, ac::Stream::batch);
        ac::Tensor s = ac::Tensor::from({64, 4}, rand_vec(xr, 256, -1.0f, 1.0f));
        ac::Tensor a = ac::Tensor::from({64, 2}, rand_vec(xr, 128, -0.9f, 0.9f));

        std::vector<std::vector<float>> before;
        for (auto& [name, t] : actor.net().named_tensors())
            before.emplace_back(t.data().begin(), t.data().end());

        ac::AdamConfig adam;
        adam.lr = 1e-2f;
        const double by_default = diag::plasticity_loss(actor, s, a, adam);
        const double at100 = diag::plasticity_loss(actor, s, a, adam, 100);
        const double at99 = diag::plasticity_loss(actor, s, a, adam, 99);
        ck.require(by_default == at100, "plasticity default differs from steps=100");
        ck.require(by_default != at99, "plasticity at 99 steps matches 100 (probe inert?)");

        size_t i = 0;
        for (auto& [name, t] : actor.net().named_tensors()) {
            auto d = t.data();
            ck.require(before[i].size() == d.size() &&
                           std::memcmp(before[i].data(), d.data(),
                                       d.size() * sizeof(float)) == 0,
                       fmt("plasticity probe mutated '%s'", name.c_str()));
            ++i;
        }
    }
    if (ck.pass) ck.detail = "50 srank matrices, hand cases, probe isolation";
    return ck;
}

// =======================================================================
// [5] Learning smoke: both trainers reach normalized score >= 90 on the
//     dense point-goal expert dataset, 3/3 seeds, under 10 min/algorithm.
// =======================================================================

struct SmokeOutcome {
    std::vector<double> finals;
    double secs = 0.0;
};

SmokeOutcome smoke_train(const std::string& algo, const data::TransitionDataset& ds,
                         const data::Environment& env, const data::ScoreAnchors& anchors,
                         int64_t steps, const std::vector<uint64_t>& seeds,
                         reg::RegularizerConfig rc = {}) {
    SmokeOutcome out;
    const double t0 = now_s();
    for (uint64_t seed : seeds) {
        auto split = data::split(ds, 0.05, seed);
        std::unique_ptr<alg::Trainer> tr;
        if (algo == "rebrac") {
            alg::RebracConfig c;
            c.hidden_dim = 64;
            c.batch_size = 128;
            c.actor_bc_coef = 1.0f;
            tr = std::make_unique<alg::RebracTrainer>(env.state_dim(), env.action_dim(), c, rc,
                                                      seed);
        } else {
            alg::IqlConfig c;
            c.hidden_dim = 64;
            c.batch_size = 128;
            c.lr = 1e-3f;
            c.lr_decay_steps = steps;
            tr = std::make_unique<alg::IqlTrainer>(env.state_dim(), env.action_dim(), c, rc,
                                                   seed);
        }
        alg::TrainRunConfig run;
        run.steps = steps;
        run.eval_interval = steps;  // single final evaluation
        run.loss_log_interval = steps;
        double final_norm = 0.0;
        alg::train_run(*tr, ds, split, run, seed, [&](int64_t, net::Actor& a) {
            const double r =
                data::mean_return(env, policy_of(a, env.state_dim()), 20, seed);
            final_norm = stats::normalized_score(r, anchors.random_return,
                                                 anchors.expert_return);
        });
        out.finals.push_back(final_norm);
    }
    out.secs = now_s() - t0;
    return out;
}

Check criterion_smoke() {
    Check ck;
    auto env = data::make_env("point-dense");
    auto ds = data::generate_dataset(*env, data::Tier::expert, 20000, 7);
    auto anchors = data::score_anchors(*env, 50, 9999);
    const std::vector<uint64_t> seeds = {0, 1, 2};

    for (const std::string algo : {"rebrac", "iql"}) {
        const auto r = smoke_train(algo, ds, *env, anchors, 50000, seeds);
        std::string scores;
        for (double f : r.finals) {
            if (!scores.empty()) scores += "/";
            scores += fmt("%.1f", f);
            ck.require(f >= 90.0, fmt("%s below 90: %.1f", algo.c_str(), f));
        }
        ck.require(r.secs < 600.0, fmt("%s took %.0fs (>10min)", algo.c_str(), r.secs));
        if (!ck.detail.empty()) ck.detail += "; ";
        ck.detail += fmt("%s %s in %.0fs", algo.c_str(), scores.c_str(), r.secs);
    }
    return ck;
}

// =======================================================================
// [6] LayerNorm eliminates dead neurons on both splits at the final
//     checkpoint; the unregularized run keeps a strictly positive fraction.
// =======================================================================

struct DeadFractions {
    double train = 0.0, val = 0.0;
};

DeadFractions train_and_measure_dead(const data::TransitionDataset& ds,
                                     const data::Environment& env, reg::NormKind norm,
                                     uint64_t seed, int64_t steps) {
    auto split = data::split(ds, 0.05, seed);
    alg::RebracConfig c;
    c.hidden_dim = 32;
    c.batch_size = 128;
    c.actor_bc_coef = 1.0f;
    reg::RegularizerConfig rc;
    rc.norm_kind = norm;
    alg::RebracTrainer tr(env.state_dim(), env.action_dim(), c, rc, seed);
    alg::TrainRunConfig run;
    run.steps = steps;
    run.eval_interval = steps;
    run.loss_log_interval = steps;
    alg::train_run(tr, ds, split, run, seed);

    auto probe = [&](const std::vector<int64_t>& idx) {
        std::vector<int64_t> capped(idx.begin(),
                                    idx.begin() + std::min<size_t>(idx.size(), 4096));
        return diag::dead_neuron_fraction(tr.actor(), diag::gather_rows(ds, capped).first);
    };
    return {probe(split.train), probe(split.validation)};
}

Check criterion_dead_neurons() {
    Check ck;
    auto env = data::make_env("point-dense");
    auto ds = data::generate_dataset(*env, data::Tier::expert, 20000, 7);
    const uint64_t seed = 0;
    const int64_t steps = 10000;

    const auto base = train_and_measure_dead(ds, *env, reg::NormKind::none, seed, steps);
    const auto ln = train_and_measure_dead(ds, *env, reg::NormKind::layer, seed, steps);

    ck.require(ln.train == 0.0 && ln.val == 0.0,
               fmt("layer-norm run has dead units: train %.4f val %.4f", ln.train, ln.val));
    ck.require(base.train > 0.0 || base.val > 0.0,
               "unregularized run has no dead units on either split");
    if (ck.pass)
        ck.detail = fmt("baseline dead %.4f/%.4f, layer norm 0/0", base.train, base.val);
    return ck;
}

// =======================================================================
// [7] Narrow-coverage high-action-dim task: some regularized sweep-grid
//     configuration beats the unregularized baseline's mean RAR, 5 seeds.
// =======================================================================

double mean_rar_over_seeds(const data::TransitionDataset& ds, const data::Environment& env,
                           const data::ScoreAnchors& anchors, const reg::RegularizerConfig& rc,
                           int64_t steps, int evals, int window) {
    double acc = 0.0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        auto split = data::split(ds, 0.05, seed);
        alg::RebracConfig c;
        c.hidden_dim = 64;
        c.batch_size = 128;
        c.actor_bc_coef = 1.0f;
        alg::RebracTrainer tr(env.state_dim(), env.action_dim(), c, rc, seed);
        alg::TrainRunConfig run;
        run.steps = steps;
        run.eval_interval = steps / evals;
        run.loss_log_interval = steps;
        stats::EvalSeries series;
        alg::train_run(tr, ds, split, run, seed, [&](int64_t step, net::Actor& a) {
            const double r = data::mean_return(env, policy_of(a, env.state_dim()), 10, seed);
            series.steps.push_back(step);
            series.returns.push_back(stats::normalized_score(r, anchors.random_return,
                                                             anchors.expert_return));
        });
        acc += stats::rar(series, window);
    }
    return acc / 5.0;
}

Check criterion_regularization_wins() {
    Check ck;
    auto env = data::make_env("point-wide");
    auto ds = data::generate_dataset(*env, data::Tier::expert, 4000, 7);
    auto anchors = data::score_anchors(*env, 50, 9999);
    const int64_t steps = 10000;
    const int evals = 10, window = 10;

    reg::RegularizerConfig none;
    const double base = mean_rar_over_seeds(ds, *env, anchors, none, steps, evals, window);

    // Candidates drawn from the declared tuning grids.
    std::vector<std::pair<std::string, reg::RegularizerConfig>> cands;
    {
        reg::RegularizerConfig ln;
        ln.norm_kind = reg::NormKind::layer;
        cands.emplace_back("layer_norm", ln);
        reg::RegularizerConfig dr;
        dr.dropout_rate = 0.1f;
        cands.emplace_back("dropout_0.1", dr);
    }
    double best = -1e300;
    std::string best_name;
    for (auto& [name, rc] : cands) {
        const double r = mean_rar_over_seeds(ds, *env, anchors, rc, steps, evals, window);
        if (r > best) best = r, best_name = name;
    }
    ck.require(best > base, fmt("no regularized config beat the baseline (base %.2f, best %.2f)",
                                base, best));
    if (ck.pass)
        ck.detail = fmt("baseline mean RAR %.2f, best %s %.2f", base, best_name.c_str(), best);
    return ck;
}

// =======================================================================
// [8] Protocol conformance: split sizes, RAR windows, robustness defaults,
//     tuning grids, seed disjointness. Config-level only.
// =======================================================================

cli::RunConfig config_from(const std::string& body) {
    return cli::run_config_from_toml(cli::parse_toml(body));
}

Check criterion_protocol() {
    Check ck;

    // Validation split is exactly floor(n * 0.05), disjoint and complete.
    for (int64_t n : {20000ll, 400ll, 101ll, 40ll}) {
        const auto sp = data::split(n, 0.05, 9);
        ck.require(static_cast<int64_t>(sp.validation.size()) ==
                       static_cast<int64_t>(std::floor(0.05 * static_cast<double>(n))),
                   fmt("split n=%lld: validation size %zu", static_cast<long long>(n),
                       sp.validation.size()));
        ck.require(sp.train.size() + sp.validation.size() == static_cast<size_t>(n),
                   fmt("split n=%lld: sizes do not partition", static_cast<long long>(n)));
        std::vector<int64_t> all(sp.train.begin(), sp.train.end());
        all.insert(all.end(), sp.validation.begin(), sp.validation.end());
        std::sort(all.begin(), all.end());
        bool complete = true;
        for (int64_t i = 0; i < n; ++i) complete = complete && all[static_cast<size_t>(i)] == i;
        ck.require(complete, fmt("split n=%lld: not a partition", static_cast<long long>(n)));
    }
    ck.require(cli::kValidationFraction == 0.05, "validation fraction is not 5%");

    // RAR window defaults: 5 on sparse-reward configs, 10 elsewhere.
    ck.require(stats::default_rar_window(true) == 5 && stats::default_rar_window(false) == 10,
               "RAR window defaults are not {5, 10}");
    const auto dense = config_from("[run]\nalgorithm=\"rebrac\"\nenv=\"point-dense\"\ndataset=\"d\"\n");
    const auto maze = config_from("[run]\nalgorithm=\"rebrac\"\nenv=\"point-maze\"\ndataset=\"d\"\n");
    ck.require(dense.rar_window == 10 && maze.rar_window == 5,
               "config-level RAR defaults are not {10 dense, 5 maze}");

    // Robustness defaults.
    ck.require(stats::kActionNoiseSigma == 0.2f, "action noise sigma is not 0.2");
    ck.require(stats::kObservationNoiseSigma == 0.05f, "observation noise sigma is not 0.05");
    ck.require(stats::kRobustnessClip == 1.1, "robustness ratio ceiling is not 1.1");
    {
        cli::RobustnessQuery q;
        ck.require(q.mode == stats::NoiseMode::action && q.sigma == stats::kActionNoiseSigma,
                   "robustness query defaults are not action/0.2");
    }

    // Declared tuning grids are accepted wholesale by the sweep layer.
    auto sweep_accepts = [&](const std::string& axis, const std::string& values, size_t want) {
        const std::string body =
            "[run]\nalgorithm=\"rebrac\"\nenv=\"point-dense\"\ndataset=\"d\"\n"
            "[sweep.axes]\n\"" + axis + "\" = " + values + "\n";
        const auto spec = cli::sweep_spec_from_toml(cli::parse_toml(body));
        const auto combos = cli::enumerate_combos(spec);
        ck.require(combos.size() == want,
                   fmt("grid %s: %zu combos, expected %zu", axis.c_str(), combos.size(), want));
    };
    sweep_accepts("regularizer.weight_decay_omega", "[0.00001, 0.0001, 0.001, 0.01, 0.1]", 5);
    sweep_accepts("regularizer.dropout_rate", "[0.1, 0.2, 0.3, 0.5, 0.75, 0.9]", 6);
    sweep_accepts("regularizer.dropout_rate", "[0.1, 0.2, 0.3, 0.5]", 4);
    sweep_accepts("regularizer.input_noise", "[0.003, 0.01, 0.03, 0.1, 0.3]", 5);
    sweep_accepts("regularizer.objective_noise", "[0.003, 0.01, 0.03, 0.1, 0.3]", 5);
    sweep_accepts("regularizer.gradient_noise", "[0.003, 0.01, 0.03, 0.1, 0.3]", 5);
    try {
        const std::string body =
            "[run]\nalgorithm=\"rebrac\"\nenv=\"point-dense\"\ndataset=\"d\"\n"
            "[sweep.axes]\n\"regularizer.weight_decay_omega\" = [-0.1]\n";
        (void)cli::enumerate_combos(cli::sweep_spec_from_toml(cli::parse_toml(body)));
        ck.fail("negative weight-decay grid value was accepted");
    } catch (const actoreg::config_error&) {}

    // Tuning and evaluation seeds: defaults disjoint, overlap rejected.
    {
        const std::string body =
            "[run]\nalgorithm=\"rebrac\"\nenv=\"point-dense\"\ndataset=\"d\"\n"
            "[sweep.axes]\n\"regularizer.dropout_rate\" = [0.1]\n";
        const auto spec = cli::sweep_spec_from_toml(cli::parse_toml(body));
        ck.require(spec.tuning_seeds == std::vector<uint64_t>({0, 1, 2, 3, 4}),
                   "default tuning seeds are not 0..4");
        ck.require(spec.eval_seeds ==
                       std::vector<uint64_t>({100, 101, 102, 103, 104, 105, 106, 107, 108, 109}),
                   "default evaluation seeds are not 100..109");
        for (uint64_t s : spec.tuning_seeds)
            ck.require(std::find(spec.eval_seeds.begin(), spec.eval_seeds.end(), s) ==
                           spec.eval_seeds.end(),
                       "default seed sets overlap");
        try {
            const std::string bad = body + "[sweep]\ntuning_seeds = [0, 1]\neval_seeds = [1, 2]\n";
            (void)cli::sweep_spec_from_toml(cli::parse_toml(bad));
            ck.fail("overlapping tuning/eval seeds were accepted");
        } catch (const actoreg::config_error&) {}
    }
    if (ck.pass) ck.detail = "splits, windows, noise defaults, grids, seed disjointness";
    return ck;
}

// =======================================================================
// [9] Reproducibility: identical config + seed gives byte-identical
//     eval series and final checkpoint.
// =======================================================================

Check criterion_reproducibility() {
    Check ck;
    const fs::path root = fs::temp_directory_path() / "actoreg_acceptance_repro";
    fs::remove_all(root);
    fs::create_directories(root);

    auto env = data::make_env("point-dense");
    const auto ds = data::generate_dataset(*env, data::Tier::expert, 2000, 5);
    const fs::path dsp = root / "data.bin";
    data::save_dataset(dsp.string(), ds);

    const std::string body =
        "[run]\nalgorithm = \"rebrac\"\nenv = \"point-dense\"\ndataset = \"" + dsp.string() +
        "\"\nname = \"repro\"\nout = \"" + (root / "out").string() +
        "\"\nsteps = 200\neval_interval = 100\nloss_log_interval = 50\neval_episodes = 3\n"
        "anchor_episodes = 5\n"
        "[rebrac]\nhidden_dim = 16\nbatch_size = 32\nactor_bc_coef = 1.0\n"
        "[diagnostics]\nplasticity_steps = 5\n";
    auto cfg = config_from(body);

    const auto r1 = cli::run_single(cfg, 3, (root / "a").string());
    const auto r2 = cli::run_single(cfg, 3, (root / "b").string());
    ck.require(r1.ok && r2.ok, "repeated runs did not both succeed");

    for (const char* f : {"eval.csv", "checkpoint_final.ck"}) {
        const auto b1 = read_file(fs::path(r1.run_dir) / f);
        const auto b2 = read_file(fs::path(r2.run_dir) / f);
        ck.require(!b1.empty() && b1 == b2, fmt("%s differs between identical runs", f));
    }
    fs::remove_all(root);
    if (ck.pass) ck.detail = "eval.csv and final checkpoint byte-identical";
    return ck;
}

}  // namespace

int main(int argc, char** argv) {
    omp_set_num_threads(1);  // runtime bounds below are single-core promises

    // Optional arguments select a subset of checks by 1-based index.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    struct Entry {
        const char* name;
        Check (*fn)();
        double budget_s;  // 0 = no bound
    };
    const Entry entries[] = {
        {"mlp gradient oracle", criterion_gradients, 60.0},
        {"regularizer analytic suite", criterion_regularizers, 60.0},
        {"evaluation statistics oracle", criterion_statistics, 60.0},
        {"actor diagnostics oracle", criterion_diagnostics, 0.0},
        {"learning smoke (both trainers >= 90, 3/3 seeds)", criterion_smoke, 0.0},
        {"layer norm eliminates dead neurons", criterion_dead_neurons, 0.0},
        {"regularization beats baseline on narrow wide-action data",
         criterion_regularization_wins, 0.0},
        {"protocol conformance", criterion_protocol, 0.0},
        {"run reproducibility", criterion_reproducibility, 0.0},
    };

    int failures = 0;
    int n = 0;
    int ran = 0;
    for (const auto& e : entries) {
        ++n;
        if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
        ++ran;
        Check ck;
        const double t0 = now_s();
        try {
            ck = e.fn();
        } catch (const std::exception& ex) {
            ck.pass = false;
            ck.detail = std::string("exception: ") + ex.what();
        }
        const double dt = now_s() - t0;
        if (e.budget_s > 0.0 && dt >= e.budget_s) {
            ck.pass = false;
            ck.detail += fmt("%sran %.1fs, budget %.0fs", ck.detail.empty() ? "" : "; ", dt,
                             e.budget_s);
        }
        std::printf("[%d] %-55s %s (%6.1fs)%s%s\n", n, e.name, ck.pass ? "PASS" : "FAIL", dt,
                    ck.detail.empty() ? "" : "  ", ck.detail.c_str());
        std::fflush(stdout);
        if (!ck.pass) ++failures;
    }
    std::printf("acceptance: %d/%d passed\n", ran - failures, ran);
    return failures;
}
