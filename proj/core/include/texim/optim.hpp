#pragma once

#include <span>
#include <vector>

#include "texim/tensor.hpp"

namespace texim::nn {

struct AdamOptions {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First and second moment estimates, one tensor per parameter in the order
// the parameters are passed to adam_step.
struct AdamState {
    long step = 0;
    std::vector<Tensor> first;
    std::vector<Tensor> second;
};

// Bias-corrected Adam update using each parameter's accumulated gradient.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& options);

void zero_grad(std::span<Parameter* const> params);

// Rescales all gradients together so their joint L2 norm is at most
// `max_norm`; returns the norm before clipping. max_norm <= 0 disables.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// Multiplies every gradient by `factor` (batch averaging).
void scale_grad(std::span<Parameter* const> params, double factor);

}  // namespace texim::nn
