#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "texim/mask.hpp"
#include "texim/rng.hpp"
#include "texim/tensor.hpp"

namespace texim::nn {

// Handle to a node recorded on a Graph.
struct Var {
    std::size_t id = 0;
};

// Reverse-mode tape. Every op appends a node holding its value and a
// closure that pushes the node's gradient into its inputs. A Graph is built
// per forward pass and discarded afterwards.
//
// Randomness inside the graph (dropout masks, reparameterization noise) is
// drawn from a generator seeded at construction, so rebuilding a graph with
// the same seed replays the same draws. The gradient checker relies on this.
class Graph {
public:
    explicit Graph(bool training = false, std::uint64_t seed = 0)
        : training_(training), rng_(seed) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool training() const noexcept { return training_; }
    Rng& rng() noexcept { return rng_; }

    Var constant(Tensor value);
    // Leaf bound to a parameter (by reference, no copy); binding the same
    // parameter twice returns the same node. Gradients flow into
    // Parameter::grad on backward().
    Var param(const Parameter& p);

    const Tensor& value(Var v) const {
        const Node& n = nodes_[v.id];
        return n.view ? *n.view : n.value;
    }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Gradient buffer of a node, allocated as zeros on first access.
    Tensor& grad(std::size_t id);

    using BackwardFn = std::function<void(Graph&, std::size_t self)>;
    // Records a node whose gradient flows to `inputs`. If no input needs a
    // gradient the closure is dropped.
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    // Seeds d(loss)/d(loss) = scale and accumulates into Parameter::grad.
    void backward(Var loss, double scale = 1.0);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        const Tensor* view = nullptr;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<const Parameter*, std::size_t>> bound_;
    bool training_;
    Rng rng_;
};

// ---- elementwise and linear algebra ------------------------------------

Var matmul(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var add_scalar(Graph& g, Var a, double s);
// a[r x c] + row[1 x c] broadcast over rows.
Var add_row(Graph& g, Var a, Var row);
Var transpose(Graph& g, Var a);
Var reshape(Graph& g, Var a, std::size_t rows, std::size_t cols);

enum class Activation { kGelu, kLeakyRelu, kSigmoid, kTanh, kIdentity };

inline constexpr double kLeakySlope = 0.01;

double activate(double x, Activation kind);
double activate_grad(double x, Activation kind);
Var activation(Graph& g, Var a, Activation kind);
inline Var sigmoid(Graph& g, Var a) { return activation(g, a, Activation::kSigmoid); }
inline Var tanh(Graph& g, Var a) { return activation(g, a, Activation::kTanh); }
inline Var gelu(Graph& g, Var a) { return activation(g, a, Activation::kGelu); }
inline Var leaky_relu(Graph& g, Var a) { return activation(g, a, Activation::kLeakyRelu); }
Var exp(Graph& g, Var a);

// ---- structure ---------------------------------------------------------

Var concat_cols(Graph& g, std::span<const Var> parts);
Var concat_rows(Graph& g, std::span<const Var> parts);
Var slice_cols(Graph& g, Var a, std::size_t begin, std::size_t count);
Var slice_rows(Graph& g, Var a, std::size_t begin, std::size_t count);
// Appends `count` zero rows.
Var pad_rows(Graph& g, Var a, std::size_t count);
// Rows i with keep[i] == false are zeroed.
Var mask_rows(Graph& g, Var a, MaskView keep);
// Mean over rows with keep[i] == true, giving 1 x cols.
Var masked_mean_rows(Graph& g, Var a, MaskView keep);
// Row lookup; negative indices and `frozen_row` produce zero rows, and the
// frozen row receives no gradient.
Var gather_rows(Graph& g, Var table, std::span<const long> indices, long frozen_row = -1);
Var sum(Graph& g, Var a);
Var mean(Graph& g, Var a);

// Gated recurrence over rows with H_0 = 0:
//   H_i = s + s * t,  s = sigmoid(xs_i + H_{i-1} us),  t = tanh(xt_i + H_{i-1} ut).
// xs, xt: L x D input projections; us, ut: D x D.
Var slfn_scan(Graph& g, Var xs, Var xt, Var us, Var ut);

// ---- attention, convolution, regularization ----------------------------

// Row-wise softmax where columns with valid[c] == false get weight 0.
Var masked_softmax_rows(Graph& g, Var a, MaskView valid);
// Valid 1-D convolution. x: L x D, filters: K x (F*D) with each row holding
// one F x D filter in row-major order. Output (L-F+1) x K.
Var conv1d(Graph& g, Var x, Var filters, std::size_t width);
// Inverted dropout; identity when the graph is not training or rate == 0.
Var dropout(Graph& g, Var a, double rate);

// ---- losses --------------------------------------------------------------

// Mean cross-entropy over rows with keep[i] == true; logits L x C.
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const long> targets,
                          MaskView keep);
// Mean squared error over kept rows against a constant target.
Var masked_mse(Graph& g, Var a, const Tensor& target, MaskView keep);
// Binary cross-entropy of sigmoid(logit) against label in {0,1}; logit 1 x 1.
Var bce_with_logits(Graph& g, Var logit, double label);
// 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
Var kl_divergence(Graph& g, Var mu, Var logvar);

}  // namespace texim::nn
