#include "actoreg/compute/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "actoreg/compute/kernels.hpp"

namespace actoreg::compute {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<bool> g_finite_checks{false};

std::shared_ptr<Node> make_node(Shape shape, std::string op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.resize(static_cast<size_t>(numel_of(n->shape)));
    n->op = std::move(op);
    return n;
}

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!t_grad_enabled) return false;
    for (const Tensor* t : inputs)
        if (t->node()->requires_grad) return true;
    return false;
}

void attach(const std::shared_ptr<Node>& out, std::vector<std::shared_ptr<Node>> parents,
            std::function<void(Node&)> fn) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(fn);
}

// Broadcast classification for the right operand of binary ops.
enum class BKind { same, scalar, row };

BKind bkind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return BKind::same;
    if (b.numel() == 1) return BKind::scalar;
    if (a.rank() == 2) {
        const int n = a.dim(1);
        if ((b.rank() == 1 && b.dim(0) == n) ||
            (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == n))
            return BKind::row;
    }
    throw shape_error(std::string(op) + ": operands do not conform, " + shape_str(a.shape()) +
                      " vs " + shape_str(b.shape()));
}

size_t bindex(BKind k, size_t i, size_t ncols) {
    switch (k) {
        case BKind::same: return i;
        case BKind::scalar: return 0;
        case BKind::row: return i % ncols;
    }
    return i;
}

// Accumulates per-element contributions f(i) into the (possibly broadcast)
// gradient buffer of b. Deterministic: same -> elementwise, scalar -> blocked
// double reduction, row -> per-column serial sums parallelized over columns.
template <class F>
void accumulate_broadcast(BKind k, Node& b, size_t n_total, size_t ncols, const F& f) {
    b.ensure_grad();
    switch (k) {
        case BKind::same:
            kernels::parallel_for(n_total, [&](size_t i) { b.grad[i] += f(i); });
            break;
        case BKind::scalar: {
            std::vector<float> tmp(n_total);
            kernels::parallel_for(n_total, [&](size_t i) { tmp[i] = f(i); });
            b.grad[0] += static_cast<float>(kernels::reduce_sum(tmp.data(), n_total));
            break;
        }
        case BKind::row: {
            const size_t rows = n_total / ncols;
            kernels::parallel_for(ncols, [&](size_t j) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) acc += static_cast<double>(f(r * ncols + j));
                b.grad[j] += static_cast<float>(acc);
            });
            break;
        }
    }
}

Tensor finish(std::shared_ptr<Node> n) {
    Tensor t = Tensor::wrap(std::move(n));
    if (finite_checks()) check_finite(t, t.op());
    return t;
}

}  // namespace

int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw shape_error("negative dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape), "leaf");
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::full(Shape shape, float v) {
    auto n = make_node(std::move(shape), "leaf");
    std::fill(n->value.begin(), n->value.end(), v);
    return wrap(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<float> data, bool requires_grad) {
    if (numel_of(shape) != static_cast<int64_t>(data.size()))
        throw shape_error("data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_str(shape));
    auto n = make_node(std::move(shape), "leaf");
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return wrap(std::move(n));
}

Tensor Tensor::scalar(float v) { return from({1}, {v}); }

int Tensor::rows() const {
    if (rank() != 2) throw shape_error("rows(): tensor is not 2-D: " + shape_str(shape()));
    return dim(0);
}

int Tensor::cols() const {
    if (rank() != 2) throw shape_error("cols(): tensor is not 2-D: " + shape_str(shape()));
    return dim(1);
}

float Tensor::item() const {
    if (numel() != 1)
        throw contract_error("item(): tensor has " + std::to_string(numel()) + " elements");
    return n_->value[0];
}

std::span<const float> Tensor::grad() const {
    n_->ensure_grad();
    return n_->grad;
}

std::span<float> Tensor::mutable_grad() {
    n_->ensure_grad();
    return n_->grad;
}

void Tensor::zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
    auto n = make_node(n_->shape, "leaf");
    n->value = n_->value;
    return wrap(std::move(n));
}

Tensor Tensor::clone() const { return detach(); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool finite_checks() { return g_finite_checks.load(std::memory_order_relaxed); }
void set_finite_checks(bool on) { g_finite_checks.store(on, std::memory_order_relaxed); }

void check_finite(const Tensor& t, const std::string& op_name) {
    for (float v : t.data())
        if (!std::isfinite(v))
            throw numeric_error("non-finite value produced by op '" + op_name + "'");
}

// --- binary elementwise ---

namespace {

template <class Fwd, class BwdA, class BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, BwdA bwd_a,
                 BwdB bwd_b) {
    const BKind k = bkind(a, b, name);
    const size_t n_total = static_cast<size_t>(a.numel());
    const size_t ncols = (k == BKind::row) ? static_cast<size_t>(a.dim(a.rank() - 1)) : 0;
    auto out = make_node(a.shape(), name);
    {
        const float* pa = a.data().data();
        const float* pb = b.data().data();
        float* po = out->value.data();
        kernels::parallel_for(n_total, [&](size_t i) { po[i] = fwd(pa[i], pb[bindex(k, i, ncols)]); });
    }
    if (recording({&a, &b})) {
        auto an = a.node();
        auto bn = b.node();
        auto on = out.get();
        attach(out, {an, bn}, [an, bn, k, n_total, ncols, bwd_a, bwd_b](Node& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                const float* g = o.grad.data();
                const float* pa = an->value.data();
                const float* pb = bn->value.data();
                float* ga = an->grad.data();
                kernels::parallel_for(n_total, [&](size_t i) {
                    ga[i] += bwd_a(g[i], pa[i], pb[bindex(k, i, ncols)]);
                });
            }
            if (bn->requires_grad) {
                const float* g = o.grad.data();
                const float* pa = an->value.data();
                const float* pb = bn->value.data();
                accumulate_broadcast(k, *bn, n_total, ncols, [&](size_t i) {
                    return bwd_b(g[i], pa[i], pb[bindex(k, i, ncols)]);
                });
            }
        });
        (void)on;
    }
    return finish(std::move(out));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](float x, float y) { return x + y; },
        [](float g, float, float) { return g; }, [](float g, float, float) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](float x, float y) { return x - y; },
        [](float g, float, float) { return g; }, [](float g, float, float) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](float x, float y) { return x * y; },
        [](float g, float, float y) { return g * y; },
        [](float g, float x, float) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](float x, float y) { return x / y; },
        [](float g, float, float y) { return g / y; },
        [](float g, float x, float y) { return -g * x / (y * y); });
}

// --- scalar-constant ops ---

namespace {

template <class Fwd, class Bwd>
Tensor unary_like(const char* name, const Tensor& x, Fwd fwd, Bwd bwd, bool always_check = false) {
    auto out = make_node(x.shape(), name);
    const size_t n = static_cast<size_t>(x.numel());
    {
        const float* px = x.data().data();
        float* po = out->value.data();
        kernels::parallel_for(n, [&](size_t i) { po[i] = fwd(px[i]); });
    }
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn, n, bwd](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float* g = o.grad.data();
            const float* px = xn->value.data();
            const float* py = o.value.data();
            float* gx = xn->grad.data();
            kernels::parallel_for(n, [&](size_t i) { gx[i] += bwd(g[i], px[i], py[i]); });
        });
    }
    Tensor t = Tensor::wrap(std::move(out));
    if (always_check || finite_checks()) check_finite(t, t.op());
    return t;
}

}  // namespace

Tensor add(const Tensor& a, float c) {
    return unary_like(
        "add_scalar", a, [c](float x) { return x + c; },
        [](float g, float, float) { return g; });
}

Tensor mul(const Tensor& a, float c) {
    return unary_like(
        "mul_scalar", a, [c](float x) { return x * c; },
        [c](float g, float, float) { return g * c; });
}

Tensor relu(const Tensor& x) {
    return unary_like(
        "relu", x, [](float v) { return v > 0.0f ? v : 0.0f; },
        [](float g, float v, float) { return v > 0.0f ? g : 0.0f; });
}

Tensor tanh(const Tensor& x) {
    return unary_like(
        "tanh", x, [](float v) { return std::tanh(v); },
        [](float g, float, float y) { return g * (1.0f - y * y); });
}

Tensor exp(const Tensor& x) {
    return unary_like(
        "exp", x, [](float v) { return std::exp(v); },
        [](float g, float, float y) { return g * y; }, /*always_check=*/true);
}

Tensor log(const Tensor& x) {
    return unary_like(
        "log", x, [](float v) { return std::log(v); },
        [](float g, float v, float) { return g / v; }, /*always_check=*/true);
}

Tensor sqrt(const Tensor& x) {
    return unary_like(
        "sqrt", x, [](float v) { return std::sqrt(v); },
        [](float g, float, float y) { return y > 0.0f ? g * 0.5f / y : 0.0f; });
}

Tensor abs(const Tensor& x) {
    return unary_like(
        "abs", x, [](float v) { return std::fabs(v); },
        [](float g, float v, float) { return v > 0.0f ? g : (v < 0.0f ? -g : 0.0f); });
}

Tensor neg(const Tensor& x) {
    return unary_like(
        "neg", x, [](float v) { return -v; }, [](float g, float, float) { return -g; });
}

Tensor square(const Tensor& x) {
    return unary_like(
        "square", x, [](float v) { return v * v; },
        [](float g, float v, float) { return 2.0f * g * v; });
}

Tensor clamp(const Tensor& x, float lo, float hi) {
    return unary_like(
        "clamp", x, [lo, hi](float v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](float g, float v, float) { return (v >= lo && v <= hi) ? g : 0.0f; });
}

// --- matmul ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw shape_error("matmul: operands must be 2-D, got " + shape_str(a.shape()) + " and " +
                          shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw shape_error("matmul: inner dimensions differ, " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    auto out = make_node({m, n}, "matmul");
    kernels::matmul_nn(a.data().data(), b.data().data(), out->value.data(), m, k, n, false);
    if (recording({&a, &b})) {
        auto an = a.node();
        auto bn = b.node();
        attach(out, {an, bn}, [an, bn, m, k, n](Node& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                // dA += dY * B^T
                kernels::matmul_nt(o.grad.data(), bn->value.data(), an->grad.data(), m, n, k,
                                   true);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                // dB += A^T * dY
                kernels::matmul_tn(an->value.data(), o.grad.data(), bn->grad.data(), k, m, n,
                                   true);
            }
        });
    }
    return finish(std::move(out));
}

// --- reductions ---

Tensor sum(const Tensor& x) {
    auto out = make_node({1}, "sum");
    out->value[0] =
        static_cast<float>(kernels::reduce_sum(x.data().data(), static_cast<size_t>(x.numel())));
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float g = o.grad[0];
            float* gx = xn->grad.data();
            kernels::parallel_for(xn->value.size(), [&](size_t i) { gx[i] += g; });
        });
    }
    return finish(std::move(out));
}

Tensor mean(const Tensor& x) {
    const size_t n = static_cast<size_t>(x.numel());
    if (n == 0) throw shape_error("mean: empty tensor");
    auto out = make_node({1}, "mean");
    out->value[0] = static_cast<float>(kernels::reduce_sum(x.data().data(), n) /
                                       static_cast<double>(n));
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn, n](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float g = o.grad[0] / static_cast<float>(n);
            float* gx = xn->grad.data();
            kernels::parallel_for(n, [&](size_t i) { gx[i] += g; });
        });
    }
    return finish(std::move(out));
}

Tensor var(const Tensor& x) {
    const size_t n = static_cast<size_t>(x.numel());
    if (n == 0) throw shape_error("var: empty tensor");
    const double mu = kernels::reduce_sum(x.data().data(), n) / static_cast<double>(n);
    auto out = make_node({1}, "var");
    out->value[0] = static_cast<float>(kernels::reduce_sum_sq_dev(x.data().data(), n, mu) /
                                       static_cast<double>(n));
    if (recording({&x})) {
        auto xn = x.node();
        const float muf = static_cast<float>(mu);
        attach(out, {xn}, [xn, n, muf](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float g = o.grad[0] * 2.0f / static_cast<float>(n);
            const float* px = xn->value.data();
            float* gx = xn->grad.data();
            kernels::parallel_for(n, [&](size_t i) { gx[i] += g * (px[i] - muf); });
        });
    }
    return finish(std::move(out));
}

Tensor sum_rows(const Tensor& x) {
    const int m = x.rows(), n = x.cols();
    auto out = make_node({m, 1}, "sum_rows");
    const float* px = x.data().data();
    float* po = out->value.data();
    kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += static_cast<double>(px[r * static_cast<size_t>(n) + j]);
        po[r] = static_cast<float>(acc);
    });
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn, m, n](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float* g = o.grad.data();
            float* gx = xn->grad.data();
            kernels::parallel_for(static_cast<size_t>(m) * n,
                                  [&](size_t i) { gx[i] += g[i / static_cast<size_t>(n)]; });
        });
    }
    return finish(std::move(out));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    const int m = a.rows(), p = a.cols(), q = b.cols();
    if (b.rows() != m)
        throw shape_error("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    auto out = make_node({m, p + q}, "concat_cols");
    const float* pa = a.data().data();
    const float* pb = b.data().data();
    float* po = out->value.data();
    kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
        std::copy_n(pa + r * static_cast<size_t>(p), p, po + r * static_cast<size_t>(p + q));
        std::copy_n(pb + r * static_cast<size_t>(q), q, po + r * static_cast<size_t>(p + q) + p);
    });
    if (recording({&a, &b})) {
        auto an = a.node();
        auto bn = b.node();
        attach(out, {an, bn}, [an, bn, m, p, q](Node& o) {
            const float* g = o.grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                float* ga = an->grad.data();
                kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
                    for (int j = 0; j < p; ++j)
                        ga[r * static_cast<size_t>(p) + j] +=
                            g[r * static_cast<size_t>(p + q) + j];
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                float* gb = bn->grad.data();
                kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
                    for (int j = 0; j < q; ++j)
                        gb[r * static_cast<size_t>(q) + j] +=
                            g[r * static_cast<size_t>(p + q) + p + j];
                });
            }
        });
    }
    return finish(std::move(out));
}

// --- fused group/layer norm ---

Tensor group_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                       float eps) {
    const int m = x.rows(), n = x.cols();
    if (groups < 1 || n % groups != 0)
        throw config_error("group_norm: feature dim " + std::to_string(n) +
                           " not divisible by group count " + std::to_string(groups));
    if (gamma.numel() != n || beta.numel() != n)
        throw shape_error("group_norm: gamma/beta must have " + std::to_string(n) + " elements");
    const int w = n / groups;

    auto out = make_node({m, n}, "group_norm");
    // Saved for backward: normalized values and inverse stddev per segment.
    auto xhat = std::make_shared<std::vector<float>>(static_cast<size_t>(m) * n);
    auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(m) * groups);

    {
        const float* px = x.data().data();
        const float* pg = gamma.data().data();
        const float* pb = beta.data().data();
        float* po = out->value.data();
        float* ph = xhat->data();
        float* ps = inv_std->data();
        kernels::parallel_for(static_cast<size_t>(m) * groups, [&](size_t seg) {
            const size_t r = seg / static_cast<size_t>(groups);
            const size_t g = seg % static_cast<size_t>(groups);
            const size_t base = r * static_cast<size_t>(n) + g * static_cast<size_t>(w);
            double mu = 0.0;
            for (int j = 0; j < w; ++j) mu += static_cast<double>(px[base + j]);
            mu /= w;
            double v = 0.0;
            for (int j = 0; j < w; ++j) {
                const double d = static_cast<double>(px[base + j]) - mu;
                v += d * d;
            }
            v /= w;
            const double s = 1.0 / std::sqrt(v + static_cast<double>(eps));
            ps[seg] = static_cast<float>(s);
            for (int j = 0; j < w; ++j) {
                const float h = static_cast<float>((static_cast<double>(px[base + j]) - mu) * s);
                ph[base + j] = h;
                const size_t col = g * static_cast<size_t>(w) + j;
                po[base + j] = h * pg[col] + pb[col];
            }
        });
    }

    if (recording({&x, &gamma, &beta})) {
        auto xn = x.node();
        auto gn = gamma.node();
        auto bn = beta.node();
        attach(out, {xn, gn, bn}, [xn, gn, bn, xhat, inv_std, m, n, groups, w](Node& o) {
            const float* g = o.grad.data();
            const float* ph = xhat->data();
            const float* ps = inv_std->data();
            const float* pg = gn->value.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                float* gx = xn->grad.data();
                kernels::parallel_for(static_cast<size_t>(m) * groups, [&](size_t seg) {
                    const size_t r = seg / static_cast<size_t>(groups);
                    const size_t grp = seg % static_cast<size_t>(groups);
                    const size_t base = r * static_cast<size_t>(n) + grp * static_cast<size_t>(w);
                    double mean_dy = 0.0, mean_dyh = 0.0;
                    for (int j = 0; j < w; ++j) {
                        const size_t col = grp * static_cast<size_t>(w) + j;
                        const double dy = static_cast<double>(g[base + j]) * pg[col];
                        mean_dy += dy;
                        mean_dyh += dy * ph[base + j];
                    }
                    mean_dy /= w;
                    mean_dyh /= w;
                    const double s = ps[seg];
                    for (int j = 0; j < w; ++j) {
                        const size_t col = grp * static_cast<size_t>(w) + j;
                        const double dy = static_cast<double>(g[base + j]) * pg[col];
                        gx[base + j] += static_cast<float>(
                            s * (dy - mean_dy - static_cast<double>(ph[base + j]) * mean_dyh));
                    }
                });
            }
            if (gn->requires_grad) {
                gn->ensure_grad();
                float* gg = gn->grad.data();
                kernels::parallel_for(static_cast<size_t>(n), [&](size_t col) {
                    double acc = 0.0;
                    for (int r = 0; r < m; ++r) {
                        const size_t i = static_cast<size_t>(r) * n + col;
                        acc += static_cast<double>(g[i]) * ph[i];
                    }
                    gg[col] += static_cast<float>(acc);
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                float* gb = bn->grad.data();
                kernels::parallel_for(static_cast<size_t>(n), [&](size_t col) {
                    double acc = 0.0;
                    for (int r = 0; r < m; ++r)
                        acc += static_cast<double>(g[static_cast<size_t>(r) * n + col]);
                    gb[col] += static_cast<float>(acc);
                });
            }
        });
    }
    return finish(std::move(out));
}

// --- softmax family ---

namespace {

void softmax_forward(const float* px, float* po, int m, int n, bool log_form) {
    kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
        const float* row = px + r * static_cast<size_t>(n);
        float* orow = po + r * static_cast<size_t>(n);
        float mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
        if (log_form) {
            const double lz = std::log(z);
            for (int j = 0; j < n; ++j)
                orow[j] = static_cast<float>(static_cast<double>(row[j]) - mx - lz);
        } else {
            for (int j = 0; j < n; ++j)
                orow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / z);
        }
    });
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
    const int m = x.rows(), n = x.cols();
    auto out = make_node({m, n}, "softmax_rows");
    softmax_forward(x.data().data(), out->value.data(), m, n, false);
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn, m, n](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float* g = o.grad.data();
            const float* y = o.value.data();
            float* gx = xn->grad.data();
            kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
                const size_t base = r * static_cast<size_t>(n);
                double dot = 0.0;
                for (int j = 0; j < n; ++j)
                    dot += static_cast<double>(g[base + j]) * y[base + j];
                for (int j = 0; j < n; ++j)
                    gx[base + j] += static_cast<float>(
                        y[base + j] * (static_cast<double>(g[base + j]) - dot));
            });
        });
    }
    return finish(std::move(out));
}

Tensor log_softmax_rows(const Tensor& x) {
    const int m = x.rows(), n = x.cols();
    auto out = make_node({m, n}, "log_softmax_rows");
    softmax_forward(x.data().data(), out->value.data(), m, n, true);
    if (recording({&x})) {
        auto xn = x.node();
        attach(out, {xn}, [xn, m, n](Node& o) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const float* g = o.grad.data();
            const float* ly = o.value.data();
            float* gx = xn->grad.data();
            kernels::parallel_for(static_cast<size_t>(m), [&](size_t r) {
                const size_t base = r * static_cast<size_t>(n);
                double gsum = 0.0;
                for (int j = 0; j < n; ++j) gsum += static_cast<double>(g[base + j]);
                for (int j = 0; j < n; ++j)
                    gx[base + j] += static_cast<float>(static_cast<double>(g[base + j]) -
                                                       std::exp(static_cast<double>(ly[base + j])) *
                                                           gsum);
            });
        });
    }
    return finish(std::move(out));
}

Tensor expectile_loss(const Tensor& residual, float tau) {
    if (tau <= 0.0f || tau >= 1.0f)
        throw config_error("expectile_loss: tau must be in (0,1), got " + std::to_string(tau));
    const size_t n = static_cast<size_t>(residual.numel());
    if (n == 0) throw shape_error("expectile_loss: empty tensor");
    auto out = make_node({1}, "expectile_loss");
    const float* pu = residual.data().data();
    {
        std::vector<float> tmp(n);
        kernels::parallel_for(n, [&](size_t i) {
            const float u = pu[i];
            const float w = u >= 0.0f ? tau : 1.0f - tau;
            tmp[i] = w * u * u;
        });
        out->value[0] =
            static_cast<float>(kernels::reduce_sum(tmp.data(), n) / static_cast<double>(n));
    }
    if (recording({&residual})) {
        auto un = residual.node();
        attach(out, {un}, [un, n, tau](Node& o) {
            if (!un->requires_grad) return;
            un->ensure_grad();
            const float g = o.grad[0] / static_cast<float>(n);
            const float* pu = un->value.data();
            float* gu = un->grad.data();
            kernels::parallel_for(n, [&](size_t i) {
                const float u = pu[i];
                const float w = u >= 0.0f ? tau : 1.0f - tau;
                gu[i] += g * 2.0f * w * u;
            });
        });
    }
    return finish(std::move(out));
}

// --- backward ---

void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw contract_error("backward: loss must be scalar, got shape " +
                             shape_str(loss.shape()));
    Node* root = loss.node().get();

    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace actoreg::compute
