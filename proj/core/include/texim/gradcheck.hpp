#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "texim/graph.hpp"

namespace texim::nn {

struct GradCheckEntry {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> parameters;
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked_values = 0;
    bool passed = false;
};

struct GradCheckOptions {
    double tolerance = 1e-4;
    // Central-difference step h; see `richardson`.
    double step = 1e-3;
    // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    // vanishing gradients from turning round-off into large ratios.
    double floor = 1e-6;
    // Combine steps h and h/2 to cancel the h^2 truncation term.
    bool richardson = true;
    bool throw_on_failure = false;
    // Graphs are built in training mode (dropout on) with this seed, so
    // every evaluation replays the same masks and noise.
    bool training = false;
    std::uint64_t seed = 0;
};

// Builds a fresh graph via `loss` for every evaluation. The function must be
// deterministic (graphs seeded identically) for the comparison to be valid.
using LossBuilder = std::function<Var(Graph&)>;

// Compares reverse-mode gradients to central differences for every element
// of every parameter.
GradCheckReport gradient_check(const LossBuilder& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options = {});

}  // namespace texim::nn
