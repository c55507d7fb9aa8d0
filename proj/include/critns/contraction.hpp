#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "critns/error.hpp"

namespace critns {

/// R = (1 - sqrt(1 - 4 eta |y|)) / (2 eta): radius of the ball holding the fixed point of x = y + B(x, x).
inline double radius_bound(double eta, double y_norm) {
    if (!(eta > 0.0)) throw DomainError("radius_bound: eta must be positive");
    if (!(y_norm >= 0.0)) throw DomainError("radius_bound: |y| must be nonnegative");
    const double disc = 1.0 - 4.0 * eta * y_norm;
    if (disc < 0.0) {
        throw OutOfRegime("radius_bound: 4 eta |y| = " + std::to_string(4.0 * eta * y_norm) + " exceeds 1");
    }
    if (y_norm == 0.0) return 0.0;
    // Rationalized form avoids cancellation for small eta |y|.
    return 2.0 * y_norm / (1.0 + std::sqrt(disc));
}

/// x = y + B(x, x) with |B(a, b)| <= eta |a| |b|. Element needs value semantics with a + b and a - b;
/// the norm is supplied separately so one element type can carry several norms.
template <class Element>
struct BilinearFixedPointProblem {
    Element y;
    std::function<Element(const Element&, const Element&)> bilinear;
    std::function<double(const Element&)> norm;
    double eta = 1.0;
    double tol = 1e-12;
    int max_iter = 100;

    void validate() const {
        if (!(eta > 0.0)) throw DomainError("BilinearFixedPointProblem: eta must be positive");
        if (!(tol > 0.0)) throw DomainError("BilinearFixedPointProblem: tol must be positive");
        if (max_iter < 1) throw DomainError("BilinearFixedPointProblem: max_iter must be >= 1");
        if (!bilinear || !norm) throw DomainError("BilinearFixedPointProblem: bilinear map and norm are required");
    }
};

template <class Element>
struct FixedPointResult {
    Element solution;
    int iterations = 0;       ///< evaluations of B
    double residual = 0.0;    ///< |x - y - B(x, x)| at the returned x
    double radius_bound = 0.0; ///< +inf when 4 eta |y| > 1
    bool converged = false;
    std::vector<double> residual_history; ///< |x_{m+1} - x_m| per iteration
    std::vector<double> iterate_norms;    ///< |x_m| starting with |x_0| = |y|
};

/// Picard iteration x_0 = y, x_{m+1} = y + B(x_m, x_m). Runs out of regime too and reports non-convergence.
template <class Element>
FixedPointResult<Element> solve_fixed_point(const BilinearFixedPointProblem<Element>& p) {
    p.validate();
    FixedPointResult<Element> r;
    const double y_norm = p.norm(p.y);
    r.radius_bound = 4.0 * p.eta * y_norm > 1.0 ? std::numeric_limits<double>::infinity() : radius_bound(p.eta, y_norm);
    Element x = p.y;
    r.iterate_norms.push_back(y_norm);
    for (int m = 0; m < p.max_iter; ++m) {
        Element next = p.y + p.bilinear(x, x);
        ++r.iterations;
        const double res = p.norm(next - x);
        r.residual_history.push_back(res);
        r.residual = res;
        if (!std::isfinite(res)) break;
        if (res <= p.tol) {
            r.converged = true;
            r.solution = std::move(x);
            return r;
        }
        x = std::move(next);
        r.iterate_norms.push_back(p.norm(x));
    }
    r.solution = std::move(x);
    return r;
}

/// max |B(x, y)| / (|x| |y|) over `trials` sampled pairs; pairs with a zero sample are skipped.
template <class Element, class Bilinear, class Norm, class Sampler>
double estimate_eta(Bilinear&& bilinear, Norm&& norm, Sampler&& sampler, int trials) {
    if (trials < 1) throw DomainError("estimate_eta: trials must be >= 1");
    double best = 0.0;
    for (int i = 0; i < trials; ++i) {
        const Element a = sampler();
        const Element b = sampler();
        const double na = norm(a);
        const double nb = norm(b);
        if (!(na > 0.0) || !(nb > 0.0)) continue;
        best = std::max(best, norm(bilinear(a, b)) / (na * nb));
    }
    return best;
}

} // namespace critns
