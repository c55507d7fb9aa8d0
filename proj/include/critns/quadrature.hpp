#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "critns/error.hpp"

namespace critns {

/// Rule for the Duhamel time integral over one lattice interval.
struct QuadratureRule {
    enum class Kind { midpoint, gauss_legendre };
    Kind kind = Kind::gauss_legendre;
    int nodes = 8;

    void validate() const {
        if (nodes < 4) throw DomainError("QuadratureRule: nodes must be >= 4, got " + std::to_string(nodes));
    }
};

inline std::string to_string(QuadratureRule::Kind k) {
    return k == QuadratureRule::Kind::midpoint ? "midpoint" : "gauss-legendre";
}

inline QuadratureRule::Kind quadrature_kind_from_string(const std::string& s) {
    if (s == "midpoint") return QuadratureRule::Kind::midpoint;
    if (s == "gauss-legendre" || s == "gauss_legendre" || s == "gl") return QuadratureRule::Kind::gauss_legendre;
    throw DomainError("unknown quadrature kind '" + s + "'");
}

/// Nodes and weights on [0, 1].
struct NodesWeights {
    std::vector<double> x;
    std::vector<double> w;
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline NodesWeights gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
    NodesWeights r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0;
        double p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n == 1 ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = w;
        r.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

/// The rule mapped to [0, 1].
inline NodesWeights unit_rule(const QuadratureRule& q) {
    q.validate();
    NodesWeights r;
    if (q.kind == QuadratureRule::Kind::midpoint) {
        r.x.resize(q.nodes);
        r.w.assign(q.nodes, 1.0 / q.nodes);
        for (int i = 0; i < q.nodes; ++i) r.x[i] = (i + 0.5) / q.nodes;
        return r;
    }
    r = gauss_legendre(q.nodes);
    for (auto& x : r.x) x = 0.5 * (x + 1.0);
    for (auto& w : r.w) w *= 0.5;
    return r;
}

/// Gauss-Legendre rule mapped to [a, b].
inline NodesWeights gauss_legendre_on(int n, double a, double b) {
    auto r = gauss_legendre(n);
    for (auto& x : r.x) x = a + 0.5 * (b - a) * (x + 1.0);
    for (auto& w : r.w) w *= 0.5 * (b - a);
    return r;
}

/// Composite trapezoid over samples (t_i, f_i).
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double acc = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    return acc;
}

} // namespace critns
