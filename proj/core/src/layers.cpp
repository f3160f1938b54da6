#include "texim/layers.hpp"

#include <cmath>

#include "texim/error.hpp"

namespace texim::nn {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
}

Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.values()) v = stddev * rng.normal();
    return t;
}

void AttentionConfig::validate() const {
    require(width > 0 && heads > 0 && seq_len > 0, ErrorCode::kConfig,
            "attention: width, heads and sequence length must be positive");
    require(width % heads == 0, ErrorCode::kConfig,
            "attention: model width " + std::to_string(width) + " is not divisible by " +
                std::to_string(heads) + " heads");
}

Var self_attention(Graph& g, Var z, Var wq, Var wk, Var wv, MaskView valid) {
    const Tensor& Z = g.value(z);
    require(Z.all_finite(), ErrorCode::kNonFinite, "self_attention: non-finite input");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(Z.cols()));
    Var q = matmul(g, z, wq);
    Var k = matmul(g, z, wk);
    Var v = matmul(g, z, wv);
    Var scores = scale(g, matmul(g, q, transpose(g, k)), inv_sqrt_d);
    Var weights = masked_softmax_rows(g, scores, valid);
    return matmul(g, weights, v);
}

MultiHeadAttention MultiHeadAttention::create(const std::string& name, const AttentionConfig& config,
                                              Rng& rng) {
    config.validate();
    MultiHeadAttention mha;
    const std::size_t d = config.width, hw = config.head_width();
    for (std::size_t h = 0; h < config.heads; ++h) {
        const std::string prefix = name + ".head" + std::to_string(h);
        mha.heads.push_back(AttentionHead{Parameter(prefix + ".wq", glorot(d, hw, rng)),
                                          Parameter(prefix + ".wk", glorot(d, hw, rng)),
                                          Parameter(prefix + ".wv", glorot(d, hw, rng))});
    }
    mha.wo = Parameter(name + ".wo", glorot(d, d, rng));
    return mha;
}

void MultiHeadAttention::collect(ParameterRefs& out) {
    for (auto& h : heads) {
        out.push_back(&h.wq);
        out.push_back(&h.wk);
        out.push_back(&h.wv);
    }
    out.push_back(&wo);
}

Var MultiHeadAttention::forward(Graph& g, Var z, MaskView valid) const {
    std::vector<Var> outs;
    outs.reserve(heads.size());
    for (auto& h : heads) {
        outs.push_back(self_attention(g, z, g.param(h.wq), g.param(h.wk), g.param(h.wv), valid));
    }
    Var cat = outs.size() == 1 ? outs.front() : concat_cols(g, outs);
    return matmul(g, cat, g.param(wo));
}

Var slfn_step(Graph& g, Var x, Var h_prev, Var ws, Var us, Var wt, Var ut) {
    Var sg = sigmoid(g, add(g, matmul(g, x, ws), matmul(g, h_prev, us)));
    Var tg = tanh(g, add(g, matmul(g, x, wt), matmul(g, h_prev, ut)));
    return add(g, sg, mul(g, sg, tg));
}

Slfn Slfn::create(const std::string& name, std::size_t width, Rng& rng, bool share_tanh_weights) {
    Slfn s;
    s.ws = Parameter(name + ".ws", glorot(width, width, rng));
    s.us = Parameter(name + ".us", glorot(width, width, rng));
    s.wt = Parameter(name + ".wt", glorot(width, width, rng));
    s.ut = Parameter(name + ".ut", glorot(width, width, rng));
    s.share_tanh_weights = share_tanh_weights;
    if (share_tanh_weights) s.ut.trainable = false;
    return s;
}

void Slfn::collect(ParameterRefs& out) {
    out.push_back(&ws);
    out.push_back(&us);
    out.push_back(&wt);
    if (!share_tanh_weights) out.push_back(&ut);
}

Var Slfn::scan(Graph& g, Var x) const {
    Var vws = g.param(ws), vus = g.param(us), vwt = g.param(wt);
    Var vut = share_tanh_weights ? vwt : g.param(ut);
    // The input projections do not depend on the recurrence.
    Var xs = matmul(g, x, vws);
    Var xt = matmul(g, x, vwt);
    return slfn_scan(g, xs, xt, vus, vut);
}

TslfnBlock TslfnBlock::create(const std::string& name, const AttentionConfig& config, Rng& rng,
                              bool share_tanh_weights) {
    TslfnBlock b;
    b.attention = MultiHeadAttention::create(name + ".mha", config, rng);
    b.slfn = Slfn::create(name + ".slfn", config.width, rng, share_tanh_weights);
    return b;
}

void TslfnBlock::collect(ParameterRefs& out) {
    attention.collect(out);
    slfn.collect(out);
}

Var TslfnBlock::forward(Graph& g, Var z, MaskView valid) const {
    Var attended = attention.forward(g, z, valid);
    return add(g, z, slfn.scan(g, attended));
}

ConvBlock ConvBlock::create(const std::string& name, std::size_t model_width, std::size_t filter_width,
                            Rng& rng) {
    require(filter_width >= 1, ErrorCode::kConfig, "conv block: filter width must be >= 1");
    ConvBlock c;
    c.width = filter_width;
    c.filters = Parameter(name + ".filters", glorot(model_width, filter_width * model_width, rng));
    return c;
}

void ConvBlock::collect(ParameterRefs& out) { out.push_back(&filters); }

Var ConvBlock::forward(Graph& g, Var x, MaskView valid, Activation act, double dropout_rate) const {
    Var padded = pad_rows(g, x, width - 1);
    Var y = activation(g, conv1d(g, padded, g.param(filters), width), act);
    y = dropout(g, y, dropout_rate);
    y = add(g, x, y);
    return mask_rows(g, y, valid);
}

Dense Dense::create(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    return Dense{Parameter(name + ".weight", glorot(in, out, rng)),
                 Parameter(name + ".bias", Tensor::matrix(1, out, 0.0))};
}

void Dense::collect(ParameterRefs& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Var Dense::forward(Graph& g, Var x) const {
    return add_row(g, matmul(g, x, g.param(weight)), g.param(bias));
}

}  // namespace texim::nn
