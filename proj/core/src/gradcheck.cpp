#include "texim/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "texim/error.hpp"
#include "texim/optim.hpp"

namespace texim::nn {

namespace {

double evaluate(const LossBuilder& loss, const GradCheckOptions& options) {
    Graph g(options.training, options.seed);
    return g.value(loss(g))[0];
}

}  // namespace

GradCheckReport gradient_check(const LossBuilder& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options) {
    zero_grad(params);
    {
        Graph g(options.training, options.seed);
        Var l = loss(g);
        require(std::isfinite(g.value(l)[0]), ErrorCode::kNonFinite, "gradient_check: loss is not finite");
        g.backward(l);
    }

    GradCheckReport report;
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        GradCheckEntry entry;
        entry.name = p->name;
        auto values = p->value.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            auto central = [&](double h) {
                values[i] = original + h;
                const double plus = evaluate(loss, options);
                values[i] = original - h;
                const double minus = evaluate(loss, options);
                values[i] = original;
                return (plus - minus) / (2.0 * h);
            };
            const double coarse = central(options.step);
            const double numeric =
                options.richardson ? (4.0 * central(options.step / 2.0) - coarse) / 3.0 : coarse;
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
            const double rel = std::abs(analytic - numeric) / denom;
            if (i == 0 || rel > entry.max_relative_error) {
                entry.max_relative_error = rel;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
            ++report.checked_values;
        }
        if (entry.max_relative_error >= report.max_relative_error) {
            report.max_relative_error = entry.max_relative_error;
            report.worst_parameter = entry.name;
        }
        report.parameters.push_back(std::move(entry));
    }
    report.passed = report.max_relative_error <= options.tolerance;
    if (!report.passed && options.throw_on_failure) {
        std::ostringstream msg;
        msg << "gradient check failed: max relative error " << report.max_relative_error << " > "
            << options.tolerance << " in";
        for (const auto& e : report.parameters) {
            if (e.max_relative_error > options.tolerance) msg << ' ' << e.name << "[" << e.worst_index << "]";
        }
        fail(ErrorCode::kGradientCheck, msg.str());
    }
    return report;
}

}  // namespace texim::nn
