#include "actoreg/net/mlp.hpp"

#include <cmath>
#include <cstdio>

namespace actoreg::net {

namespace cc = actoreg::compute;

void MlpSpec::validate() const {
    if (input_dim < 1) throw config_error("mlp: input_dim must be >= 1");
    if (output_dim < 1) throw config_error("mlp: output_dim must be >= 1");
    if (hidden_dim < 1) throw config_error("mlp: hidden_dim must be >= 1");
    if (num_hidden_layers < 1) throw config_error("mlp: num_hidden_layers must be >= 1");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
        throw config_error("mlp: dropout_rate must be in [0,1), got " +
                           std::to_string(dropout_rate));
    if (norm_kind == NormKind::group && hidden_dim % group_count != 0)
        throw config_error("mlp: hidden_dim " + std::to_string(hidden_dim) +
                           " not divisible by group_count " + std::to_string(group_count));
    if (log_std_min >= log_std_max) throw config_error("mlp: log_std_min must be < log_std_max");
}

std::vector<float> orthogonal_init(int rows, int cols, double gain, Rng& rng) {
    const int r = std::max(rows, cols), c = std::min(rows, cols);

    std::vector<float> noise(static_cast<size_t>(r) * c);
    rng.fill_normal(noise);
    std::vector<double> a(noise.begin(), noise.end());

    // Householder QR of a; reflectors stored column by column.
    std::vector<std::vector<double>> vs(static_cast<size_t>(c));
    for (int k = 0; k < c; ++k) {
        double norm_x = 0.0;
        for (int i = k; i < r; ++i) norm_x += a[static_cast<size_t>(i) * c + k] *
                                              a[static_cast<size_t>(i) * c + k];
        norm_x = std::sqrt(norm_x);
        if (norm_x < 1e-300) continue;
        const double akk = a[static_cast<size_t>(k) * c + k];
        const double alpha = akk >= 0.0 ? -norm_x : norm_x;
        std::vector<double> v(static_cast<size_t>(r - k));
        v[0] = akk - alpha;
        for (int i = k + 1; i < r; ++i) v[static_cast<size_t>(i - k)] =
            a[static_cast<size_t>(i) * c + k];
        double vn = 0.0;
        for (double x : v) vn += x * x;
        vn = std::sqrt(vn);
        if (vn < 1e-300) continue;
        for (double& x : v) x /= vn;
        for (int j = k; j < c; ++j) {
            double dot = 0.0;
            for (int i = k; i < r; ++i) dot += v[static_cast<size_t>(i - k)] *
                                               a[static_cast<size_t>(i) * c + j];
            for (int i = k; i < r; ++i) a[static_cast<size_t>(i) * c + j] -=
                2.0 * dot * v[static_cast<size_t>(i - k)];
        }
        vs[static_cast<size_t>(k)] = std::move(v);
    }

    // Q = H_0 ... H_{c-1} applied to the first c columns of the identity.
    std::vector<double> q(static_cast<size_t>(r) * c, 0.0);
    for (int j = 0; j < c; ++j) q[static_cast<size_t>(j) * c + j] = 1.0;
    for (int k = c - 1; k >= 0; --k) {
        const auto& v = vs[static_cast<size_t>(k)];
        if (v.empty()) continue;
        for (int j = 0; j < c; ++j) {
            double dot = 0.0;
            for (int i = k; i < r; ++i) dot += v[static_cast<size_t>(i - k)] *
                                               q[static_cast<size_t>(i) * c + j];
            for (int i = k; i < r; ++i) q[static_cast<size_t>(i) * c + j] -=
                2.0 * dot * v[static_cast<size_t>(i - k)];
        }
    }
    // Fix column signs so the factorization is unique (R diagonal positive).
    for (int j = 0; j < c; ++j)
        if (a[static_cast<size_t>(j) * c + j] < 0.0)
            for (int i = 0; i < r; ++i) q[static_cast<size_t>(i) * c + j] = -q[static_cast<size_t>(i) * c + j];

    std::vector<float> out(static_cast<size_t>(rows) * cols);
    if (rows >= cols) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                out[static_cast<size_t>(i) * cols + j] =
                    static_cast<float>(gain * q[static_cast<size_t>(i) * c + j]);
    } else {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                out[static_cast<size_t>(i) * cols + j] =
                    static_cast<float>(gain * q[static_cast<size_t>(j) * c + i]);
    }
    return out;
}

namespace {

bool has_norm_layer(NormKind k) {
    return k == NormKind::layer || k == NormKind::feature || k == NormKind::group;
}

std::string fmt_rate(float rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", static_cast<double>(rate));
    return buf;
}

}  // namespace

Mlp::Mlp(MlpSpec spec, Rng& init_rng) : spec_(spec) {
    spec_.validate();
    const double hidden_gain = std::sqrt(2.0);  // ReLU-preserving scale
    int in = spec_.input_dim;
    for (int l = 0; l < spec_.num_hidden_layers; ++l) {
        w_.push_back(Tensor::from({in, spec_.hidden_dim},
                                  orthogonal_init(in, spec_.hidden_dim, hidden_gain, init_rng),
                                  true));
        b_.push_back(Tensor::zeros({spec_.hidden_dim}, true));
        if (has_norm_layer(spec_.norm_kind)) {
            gamma_.push_back(Tensor::full({spec_.hidden_dim}, 1.0f));
            gamma_.back().set_requires_grad(true);
            beta_.push_back(Tensor::zeros({spec_.hidden_dim}, true));
        }
        if (spec_.norm_kind == NormKind::feature)
            feature_state_.emplace_back(spec_.hidden_dim);
        if (spec_.norm_kind == NormKind::spectral)
            spectral_state_.emplace_back(in, spec_.hidden_dim, init_rng);
        in = spec_.hidden_dim;
    }
    w_.push_back(Tensor::from({in, spec_.output_dim},
                              orthogonal_init(in, spec_.output_dim, 1.0, init_rng), true));
    b_.push_back(Tensor::zeros({spec_.output_dim}, true));
    if (spec_.output_head == OutputHead::gaussian)
        log_std_ = Tensor::zeros({1, spec_.output_dim}, true);
}

MlpOut Mlp::forward(const Tensor& x, Mode mode, Rng* dropout_rng) {
    if (x.rank() != 2 || x.cols() != spec_.input_dim)
        throw shape_error("mlp: input is " + cc::shape_str(x.shape()) + ", expected [m," +
                          std::to_string(spec_.input_dim) + "]");
    MlpOut out;
    Tensor h = x;
    for (int l = 0; l < spec_.num_hidden_layers; ++l) {
        Tensor w = w_[static_cast<size_t>(l)];
        if (spec_.norm_kind == NormKind::spectral)
            w = reg::spectral_normalize(w, spectral_state_[static_cast<size_t>(l)], 1,
                                        mode == Mode::train);
        h = cc::relu(cc::add(cc::matmul(h, w), b_[static_cast<size_t>(l)]));
        if (l == spec_.num_hidden_layers - 1) out.penultimate = h;
        switch (spec_.norm_kind) {
            case NormKind::layer:
                h = reg::layer_norm(h, gamma_[static_cast<size_t>(l)],
                                    beta_[static_cast<size_t>(l)]);
                break;
            case NormKind::group:
                h = reg::group_norm(h, gamma_[static_cast<size_t>(l)],
                                    beta_[static_cast<size_t>(l)], spec_.group_count);
                break;
            case NormKind::feature:
                h = reg::feature_norm(h, gamma_[static_cast<size_t>(l)],
                                      beta_[static_cast<size_t>(l)],
                                      feature_state_[static_cast<size_t>(l)], mode);
                break;
            default: break;
        }
        h = reg::dropout_forward(h, spec_.dropout_rate, dropout_rng, mode);
    }
    Tensor y = cc::add(cc::matmul(h, w_.back()), b_.back());
    switch (spec_.output_head) {
        case OutputHead::linear: out.output = y; break;
        case OutputHead::tanh_bounded: out.output = cc::tanh(y); break;
        case OutputHead::gaussian:
            out.output = y;
            out.log_std = cc::clamp(log_std_, spec_.log_std_min, spec_.log_std_max);
            break;
    }
    return out;
}

std::vector<Tensor> Mlp::parameters() {
    std::vector<Tensor> ps;
    for (size_t l = 0; l < w_.size(); ++l) {
        ps.push_back(w_[l]);
        ps.push_back(b_[l]);
    }
    for (size_t l = 0; l < gamma_.size(); ++l) {
        ps.push_back(gamma_[l]);
        ps.push_back(beta_[l]);
    }
    if (log_std_.defined()) ps.push_back(log_std_);
    return ps;
}

std::vector<Tensor> Mlp::weight_matrices() const { return w_; }

std::vector<std::pair<std::string, Tensor>> Mlp::named_tensors() {
    std::vector<std::pair<std::string, Tensor>> named;
    for (int l = 0; l < spec_.num_hidden_layers; ++l) {
        const std::string p = "h" + std::to_string(l) + ".";
        named.emplace_back(p + "w", w_[static_cast<size_t>(l)]);
        named.emplace_back(p + "b", b_[static_cast<size_t>(l)]);
        if (has_norm_layer(spec_.norm_kind)) {
            named.emplace_back(p + "gamma", gamma_[static_cast<size_t>(l)]);
            named.emplace_back(p + "beta", beta_[static_cast<size_t>(l)]);
        }
        if (spec_.norm_kind == NormKind::feature) {
            named.emplace_back(p + "running_mean",
                               feature_state_[static_cast<size_t>(l)].running_mean);
            named.emplace_back(p + "running_var",
                               feature_state_[static_cast<size_t>(l)].running_var);
        }
        if (spec_.norm_kind == NormKind::spectral) {
            named.emplace_back(p + "sn_u", spectral_state_[static_cast<size_t>(l)].u);
            named.emplace_back(p + "sn_v", spectral_state_[static_cast<size_t>(l)].v);
        }
    }
    named.emplace_back("out.w", w_.back());
    named.emplace_back("out.b", b_.back());
    if (log_std_.defined()) named.emplace_back("log_std", log_std_);
    return named;
}

std::vector<std::string> Mlp::describe_layers() const {
    std::vector<std::string> tokens;
    int in = spec_.input_dim;
    for (int l = 0; l < spec_.num_hidden_layers; ++l) {
        const std::string dims =
            "(" + std::to_string(in) + "->" + std::to_string(spec_.hidden_dim) + ")";
        tokens.push_back(spec_.norm_kind == NormKind::spectral ? "spectral_linear" + dims
                                                               : "linear" + dims);
        tokens.push_back("relu");
        switch (spec_.norm_kind) {
            case NormKind::layer: tokens.push_back("layer_norm"); break;
            case NormKind::feature: tokens.push_back("feature_norm"); break;
            case NormKind::group:
                tokens.push_back("group_norm(" + std::to_string(spec_.group_count) + ")");
                break;
            default: break;
        }
        if (spec_.dropout_rate > 0.0f)
            tokens.push_back("dropout(" + fmt_rate(spec_.dropout_rate) + ")");
        in = spec_.hidden_dim;
    }
    tokens.push_back("linear(" + std::to_string(in) + "->" + std::to_string(spec_.output_dim) +
                     ")");
    if (spec_.output_head == OutputHead::tanh_bounded) tokens.push_back("tanh");
    if (spec_.output_head == OutputHead::gaussian) tokens.push_back("gaussian_head");
    return tokens;
}

}  // namespace actoreg::net
