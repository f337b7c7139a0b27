#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "actoreg/common/errors.hpp"

namespace actoreg::compute {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& s);
std::string shape_str(const Shape& s);

// One recorded primitive op. Gradient buffers live on the node; parent links
// make the tape a DAG that backward() walks in reverse topological order.
struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // sized on first accumulation
    bool requires_grad = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad();
};

// Value-semantics handle to a tape node. Row-major float32 storage.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float v);
    static Tensor from(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float v);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return n_->numel(); }
    int rows() const;  // 2-D helpers
    int cols() const;

    std::span<const float> data() const { return n_->value; }
    std::span<float> mutable_data() { return n_->value; }
    float item() const;

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool v) { n_->requires_grad = v; }
    std::span<const float> grad() const;
    std::span<float> mutable_grad();
    void zero_grad();

    Tensor detach() const;  // value copy, no history, no grad
    Tensor clone() const;   // deep copy of values, no history

    const std::string& op() const { return n_->op; }
    const std::shared_ptr<Node>& node() const { return n_; }

    static Tensor wrap(std::shared_ptr<Node> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

  private:
    std::shared_ptr<Node> n_;
};

// Tape recording control. Ops record backward closures only while enabled.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// When on, every op validates its output for non-finite values and throws
// numeric_error naming the op. Off by default in the training hot path;
// exp/log always validate.
bool finite_checks();
void set_finite_checks(bool on);
void check_finite(const Tensor& t, const std::string& op_name);

// --- ops ---
// Elementwise binary ops broadcast the right operand when it is a scalar
// (1 element) or a row vector [n] / [1,n] against [m,n].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, float c);
Tensor mul(const Tensor& a, float c);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor clamp(const Tensor& x, float lo, float hi);

Tensor sum(const Tensor& x);   // -> [1]
Tensor mean(const Tensor& x);  // -> [1]
Tensor var(const Tensor& x);   // population variance -> [1]
Tensor sum_rows(const Tensor& x);  // [m,n] -> [m,1]

Tensor concat_cols(const Tensor& a, const Tensor& b);

// Per-row normalization within `groups` contiguous feature groups, then
// gamma/beta affine. groups == 1 is layer norm.
Tensor group_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                       float eps);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);

// mean over elements of |tau - 1{u<0}| * u^2
Tensor expectile_loss(const Tensor& residual, float tau);

// Accumulates d(loss)/d(node) into every reachable node's grad buffer.
// loss must be scalar; each node is visited exactly once.
void backward(const Tensor& loss);

}  // namespace actoreg::compute
