#pragma once

#include <span>

namespace texim::testing {

// KL(N(mu, exp(logvar)) || N(0, 1)) for one dimension by composite Simpson
// integration of q(x) (log q(x) - log p(x)) over mu +- 14 sigma.
double kl_by_quadrature(double mu, double logvar, int intervals = 20000);

// Sum of kl_by_quadrature over diagonal dimensions.
double kl_by_quadrature(std::span<const double> mu, std::span<const double> logvar);

}  // namespace texim::testing
