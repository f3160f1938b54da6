#include "texim/optim.hpp"

#include <cmath>

#include "texim/error.hpp"

namespace texim::nn {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& options) {
    if (state.first.empty()) {
        for (const Parameter* p : params) {
            state.first.emplace_back(p->value.shape(), 0.0);
            state.second.emplace_back(p->value.shape(), 0.0);
        }
    }
    require(state.first.size() == params.size(), ErrorCode::kInvalidArgument,
            "adam_step: optimizer state was built for a different parameter list");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        if (!p.trainable) continue;
        auto w = p.value.values();
        auto gr = p.grad.values();
        auto m = state.first[k].values();
        auto v = state.second[k].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * gr[i];
            v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * gr[i] * gr[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
        }
    }
}

void zero_grad(std::span<Parameter* const> params) {
    for (Parameter* p : params) p->zero_grad();
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
    double sq = 0.0;
    for (const Parameter* p : params)
        for (double g : p->grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) scale_grad(params, max_norm / norm);
    return norm;
}

void scale_grad(std::span<Parameter* const> params, double factor) {
    for (Parameter* p : params)
        for (double& g : p->grad.values()) g *= factor;
}

}  // namespace texim::nn
