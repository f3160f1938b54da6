#pragma once

#include <span>
#include <string>
#include <vector>

#include "texim/graph.hpp"
#include "texim/rng.hpp"

namespace texim::nn {

// Glorot-uniform initialization.
Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng);
Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

struct AttentionConfig {
    std::size_t width = 0;    // D
    std::size_t heads = 1;    // H
    std::size_t seq_len = 0;  // L

    std::size_t head_width() const { return width / heads; }
    void validate() const;
};

// One attention unit: softmax(Q K^T / sqrt(D)) V with Q, K, V = Z Wq, Z Wk,
// Z Wv. Columns whose `valid` flag is false receive zero weight. Note the
// scale uses the model width D, not the head width.
Var self_attention(Graph& g, Var z, Var wq, Var wk, Var wv, MaskView valid);

struct AttentionHead {
    Parameter wq, wk, wv;
};

struct MultiHeadAttention {
    std::vector<AttentionHead> heads;
    Parameter wo;  // D x D

    static MultiHeadAttention create(const std::string& name, const AttentionConfig& config, Rng& rng);
    void collect(ParameterRefs& out);
    Var forward(Graph& g, Var z, MaskView valid) const;
};

// Selective learn-forget unit. With share_tanh_weights the hidden-state
// term of the tanh gate reuses Wt; otherwise it has its own Ut.
struct Slfn {
    Parameter ws, us, wt, ut;
    bool share_tanh_weights = false;

    static Slfn create(const std::string& name, std::size_t width, Rng& rng, bool share_tanh_weights = false);
    void collect(ParameterRefs& out);
    // Left-to-right scan with H_0 = 0; returns all hidden states (L x D).
    Var scan(Graph& g, Var x) const;
};

// Sg = sigmoid(x Ws + h Us), Tg = tanh(x Wt + h Ut), H = Sg + Sg * Tg.
Var slfn_step(Graph& g, Var x, Var h_prev, Var ws, Var us, Var wt, Var ut);

// Multi-head attention feeding an SLFN scan, plus the residual input.
struct TslfnBlock {
    MultiHeadAttention attention;
    Slfn slfn;

    static TslfnBlock create(const std::string& name, const AttentionConfig& config, Rng& rng,
                             bool share_tanh_weights = false);
    void collect(ParameterRefs& out);
    Var forward(Graph& g, Var z, MaskView valid) const;
};

// Length-preserving convolution stage: the input is right-padded with F-1
// zero rows, convolved with D filters of width F, passed through the
// activation and dropout, and rows outside `valid` are zeroed.
struct ConvBlock {
    Parameter filters;  // D x (F*D)
    std::size_t width = 1;

    static ConvBlock create(const std::string& name, std::size_t model_width, std::size_t filter_width, Rng& rng);
    void collect(ParameterRefs& out);
    Var forward(Graph& g, Var x, MaskView valid, Activation act, double dropout_rate) const;
};

// y = x W + b.
struct Dense {
    Parameter weight, bias;

    static Dense create(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
    void collect(ParameterRefs& out);
    Var forward(Graph& g, Var x) const;
};

}  // namespace texim::nn
