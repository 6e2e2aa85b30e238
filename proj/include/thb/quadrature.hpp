#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "thb/errors.hpp"

namespace thb {

/// Rule on the reference interval (-1, 1).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    int size() const noexcept { return static_cast<int>(nodes.size()); }
};

/// q-point Gauss-Legendre rule, exact for polynomials of degree <= 2q-1.
/// Nodes in ascending order.
inline QuadratureRule gauss_legendre(int q) {
    if (q < 1) throw InvalidInput("quadrature needs at least one point");
    // (P_q(x), P_q'(x)) by the three-term recurrence.
    auto legendre = [q](double x) {
        double p0 = 1.0, p1 = x;
        for (int n = 2; n <= q; ++n) {
            const double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
            p0 = p1;
            p1 = p2;
        }
        return std::pair{p1, q * (x * p1 - p0) / (x * x - 1.0)};
    };
    QuadratureRule rule;
    rule.nodes.assign(static_cast<std::size_t>(q), 0.0);
    rule.weights.assign(static_cast<std::size_t>(q), 0.0);
    for (int i = 0; i < (q + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
        for (int iter = 0; iter < 100; ++iter) {
            const auto [pq, dp] = legendre(x);
            const double dx = pq / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        if (2 * i + 1 == q) x = 0.0;
        const double dp = legendre(x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        const auto hi = static_cast<std::size_t>(q - 1 - i), lo = static_cast<std::size_t>(i);
        rule.nodes[hi] = x;
        rule.nodes[lo] = -x;
        rule.weights[hi] = w;
        rule.weights[lo] = w;
    }
    return rule;
}

} // namespace thb
