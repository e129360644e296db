#ifndef SGRAF_AUTODIFF_HPP_
#define SGRAF_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "sgraf/tensor.hpp"

namespace sgraf {

// Reverse-mode differentiation over a dynamically built expression graph.
// Values are write-once; gradients accumulate on leaves until cleared.

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool grad_ready = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    Tensor& ensure_grad() {
        if (!grad_ready) {
            grad = Tensor::zeros(value.shape());
            grad_ready = true;
        }
        return grad;
    }
};

class Var {
public:
    Var() = default;

    static Var leaf(Tensor value, bool requires_grad) {
        Var v;
        v.node_ = std::make_shared<Node>();
        v.node_->value = std::move(value);
        v.node_->requires_grad = requires_grad;
        return v;
    }
    static Var constant(Tensor value) { return leaf(std::move(value), false); }
    static Var scalar(double x) { return constant(Tensor::scalar(x)); }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    // Mutable access for leaves (optimizer updates, finite-difference probes).
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return node_ && node_->grad_ready; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void zero_grad() {
        if (node_ && node_->grad_ready) node_->grad.fill(0.0);
    }

    const Shape& shape() const { return node_->value.shape(); }
    std::size_t rank() const { return node_->value.rank(); }
    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
    friend Var make_op(Tensor out, std::vector<Var> inputs, std::function<void(Node&)> backward);
};

// Propagates gradients from a scalar root to every requires_grad leaf.
// Repeated calls accumulate into leaf gradients.
void backward(const Var& root);

// Tracks how close activation inputs came to non-differentiable points
// during a forward pass, so the finite-difference checker can mark samples
// that straddle a kink as non-comparable.
struct KinkTrace {
    static void enable();
    static void disable();
    static bool active();
    static void reset();
    static void note(double margin);
    static double min_margin();
};

// -- elementwise and structural ops ------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
// mat [r x c] + vec [c], broadcast over rows
Var add_rowwise(const Var& mat, const Var& vec);
// any shape + rank-0 scalar, broadcast
Var add_scalar_var(const Var& a, const Var& s);
Var square(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
// a / s with scalar Var s (caller guarantees s != 0)
Var div_by_scalar(const Var& a, const Var& s);

// -- linear algebra -----------------------------------------------------

// Handles [r x k]*[k x c], [r x k]*[k], [k]*[k x c] and [k]*[k] (dot).
Var matmul(const Var& a, const Var& b);
Var dot(const Var& a, const Var& b);
Var transpose(const Var& a);

// -- reductions and normalizations ---------------------------------------

Var sum_all(const Var& a);
Var mean_all(const Var& a);
// [r x c] -> [c], mean over rows
Var mean_axis0(const Var& a);
// [r x c] -> [r], sum over columns
Var sum_axis1(const Var& a);
// Softmax along `axis` (rank-2) or over the whole vector (rank-1).
Var softmax(const Var& a, int axis);
// x / max(||x||, eps) per slice; rank-1 whole vector, rank-2 along `axis`
// (1 = each row, 0 = each column). A zero slice maps to zero.
Var l2_normalize(const Var& a, int axis, double eps);

// -- shape manipulation ---------------------------------------------------

Var reshape(const Var& a, Shape shape);
Var concat_rows(const std::vector<Var>& parts);  // rank-1 [m] parts stack as rows; rank-2 blocks concatenate
Var stack_scalars(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t offset, std::size_t count);
Var row(const Var& a, std::size_t i);
Var pick(const Var& a, std::size_t i, std::size_t j);
Var pick1(const Var& a, std::size_t i);

// Row gather; ids out of range fall back to unk_row when provided, else throw.
Var embedding_lookup(const Var& table, const std::vector<int>& ids, std::optional<int> unk_row);

// -- batch normalization --------------------------------------------------

enum class BnMode { Training, Inference };

struct BatchNormState {
    std::size_t channels = 1;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double epsilon = 1e-8;

    explicit BatchNormState(std::size_t channel_count = 1)
        : channels(channel_count),
          running_mean(Tensor::zeros({channel_count})),
          running_var(Tensor::full({channel_count}, 1.0)) {}
};

// x is [n_samples x channels]. Training mode normalizes by batch statistics
// (population variance) and folds them into the running estimates; inference
// mode normalizes by the running statistics. gamma/beta are [channels].
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, BnMode mode);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace sgraf

#endif  // SGRAF_AUTODIFF_HPP_
