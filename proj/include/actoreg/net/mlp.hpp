#pragma once

#include <string>
#include <utility>
#include <vector>

#include "actoreg/compute/rng.hpp"
#include "actoreg/compute/tensor.hpp"
#include "actoreg/reg/regularizers.hpp"

namespace actoreg::net {

using compute::Rng;
using compute::Shape;
using compute::Tensor;
using reg::Mode;
using reg::NormKind;

enum class OutputHead { linear, tanh_bounded, gaussian };

struct MlpSpec {
    int input_dim = 0;
    int output_dim = 0;
    int hidden_dim = 256;
    int num_hidden_layers = 2;
    NormKind norm_kind = NormKind::none;
    float dropout_rate = 0.0f;
    OutputHead output_head = OutputHead::linear;
    int group_count = 8;  // group norm only
    float log_std_min = -5.0f;  // gaussian head clamp
    float log_std_max = 2.0f;

    void validate() const;  // throws config_error
};

struct MlpOut {
    Tensor output;       // head output; the mean for a gaussian head
    Tensor log_std;      // gaussian head only: clamped log-stds, [1, output_dim]
    Tensor penultimate;  // post-activation, pre-norm/pre-dropout last hidden features
};

// Row-major float32 in double-precision init. Orthonormal columns when
// rows >= cols, orthonormal rows otherwise; scaled by gain.
std::vector<float> orthogonal_init(int rows, int cols, double gain, Rng& rng);

// Fully connected network with the regularizer insertion rule applied to
// every hidden block: linear -> activation -> norm -> dropout. Norms and
// dropout never touch the output layer; spectral normalization
// reparameterizes the hidden weight matrices instead of adding a layer.
class Mlp {
  public:
    Mlp(MlpSpec spec, Rng& init_rng);

    MlpOut forward(const Tensor& x, Mode mode, Rng* dropout_rng = nullptr);

    const MlpSpec& spec() const { return spec_; }
    std::vector<Tensor> parameters();             // trainable tensors
    std::vector<Tensor> weight_matrices() const;  // all weights, biases excluded
    // Parameters plus persistent buffers (running stats, power-iteration
    // vectors) in a fixed serialization order.
    std::vector<std::pair<std::string, Tensor>> named_tensors();
    // One token per structural element, in forward order, e.g.
    // "linear(4->64)", "relu", "layer_norm", "dropout(0.1)".
    std::vector<std::string> describe_layers() const;

  private:
    MlpSpec spec_;
    std::vector<Tensor> w_, b_;          // hidden layers then output layer
    std::vector<Tensor> gamma_, beta_;   // affine per hidden norm layer
    std::vector<reg::FeatureNormState> feature_state_;
    std::vector<reg::SpectralState> spectral_state_;
    Tensor log_std_;  // gaussian head parameter, [1, output_dim]
};

}  // namespace actoreg::net
