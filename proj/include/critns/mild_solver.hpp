#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "critns/contraction.hpp"
#include "critns/diagnostics.hpp"
#include "critns/error.hpp"
#include "critns/operators.hpp"
#include "critns/quadrature.hpp"
#include "critns/spectral_field.hpp"
#include "critns/trajectory.hpp"

namespace critns {

struct SolverConfig {
    double dt = 1.0 / 64.0;
    QuadratureRule duhamel_quadrature{};
    double picard_tol = 1e-12;
    int picard_max_iter = 50;
    double norm_blowup_threshold = 1e6;
    double min_dt = 1e-6;
    /// Bilinear constant used only to report the contraction radius of the interval route.
    double nominal_eta = 1.0;

    void validate() const {
        duhamel_quadrature.validate();
        if (!(dt > 0.0)) throw DomainError("SolverConfig: dt must be positive");
        if (!(min_dt > 0.0) || min_dt > dt) throw DomainError("SolverConfig: need 0 < min_dt <= dt");
        if (!(picard_tol > 0.0) || !(norm_blowup_threshold > 0.0)) {
            throw DomainError("SolverConfig: thresholds must be positive");
        }
        if (picard_max_iter < 1) throw DomainError("SolverConfig: picard_max_iter must be >= 1");
        if (!(nominal_eta > 0.0)) throw DomainError("SolverConfig: nominal_eta must be positive");
    }
};

/// Raised by step() when the sub-step Picard closure does not converge or produces non-finite values.
class StepFailure : public Error {
public:
    using Error::Error;
};

/// Space-time field on a time lattice; the element type of the interval Picard iteration.
struct LatticeField {
    std::vector<SpectralField> v;

    friend LatticeField operator+(const LatticeField& a, const LatticeField& b) {
        LatticeField r = a;
        for (std::size_t j = 0; j < r.v.size(); ++j) r.v[j] += b.v[j];
        return r;
    }
    friend LatticeField operator-(const LatticeField& a, const LatticeField& b) {
        LatticeField r = a;
        for (std::size_t j = 0; j < r.v.size(); ++j) r.v[j] -= b.v[j];
        return r;
    }
};

/// Discrete E_T norm: (max_j |v_j|_{H^{1/2}}^2 + trapezoid int |v|_{H^{3/2}}^2)^{1/2}.
inline double lattice_e_norm(const std::vector<double>& times, const std::vector<SpectralField>& v) {
    double sup = 0.0;
    std::vector<double> g(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double hh = sobolev_norm(v[j], 0.5);
        sup = std::max(sup, hh * hh);
        const double h3 = sobolev_norm(v[j], 1.5);
        g[j] = h3 * h3;
    }
    return std::sqrt(sup + trapezoid(times, g));
}

inline void require_initial_datum(const SpectralField& u0) {
    if (!u0.all_finite()) throw DomainError("initial datum has non-finite coefficients");
    if (u0.component(0)[0] != Complex{} || u0.component(1)[0] != Complex{} || u0.component(2)[0] != Complex{}) {
        throw DomainError("initial datum must be mean-zero");
    }
    const double dd = divergence_defect(u0);
    if (dd > 1e-10) throw DomainError("initial datum is not divergence-free (relative " + std::to_string(dd) + ")");
}

/// Uniform lattice 0 = t_0 < ... < t_M = T with spacing <= dt.
inline std::vector<double> uniform_lattice(double T, double dt) {
    const int M = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    std::vector<double> t(M + 1);
    for (int j = 0; j <= M; ++j) t[j] = T * j / M;
    return t;
}

/// Whole-interval Picard: u = e^{t Lap} u0 + B(u, u) on the time lattice, iterated from the heat flow
/// until successive iterates differ by less than picard_tol in the discrete E_T norm.
inline Trajectory integrate_interval(const SpectralField& u0, double T, const SolverConfig& cfg) {
    cfg.validate();
    require_initial_datum(u0);
    if (!(T > 0.0)) throw DomainError("integrate_interval: T must be positive");
    const auto times = uniform_lattice(T, cfg.dt);
    BilinearFixedPointProblem<LatticeField> p;
    p.y.v.reserve(times.size());
    for (double t : times) p.y.v.push_back(heat_semigroup(u0, t));
    p.bilinear = [&](const LatticeField& a, const LatticeField&) {
        return LatticeField{duhamel_lattice(times, a.v, nullptr, cfg.duhamel_quadrature)};
    };
    p.norm = [&](const LatticeField& a) { return lattice_e_norm(times, a.v); };
    p.eta = cfg.nominal_eta;
    p.tol = cfg.picard_tol;
    p.max_iter = cfg.picard_max_iter;
    auto res = solve_fixed_point(p);

    Trajectory traj(u0.grid());
    traj.picard_iterations = res.iterations;
    if (!res.converged) {
        emit_diagnostic("picard_failure", "interval Picard did not converge on [0, " + std::to_string(T) +
                                              "], last residual " + std::to_string(res.residual));
        traj.push(0.0, u0);
        traj.terminated_reason = TerminationReason::picard_failure;
        traj.failed_interval = T;
        return traj;
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
        traj.push(times[j], j == 0 ? u0 : std::move(res.solution.v[j]));
    }
    traj.terminated_reason = TerminationReason::horizon_reached;
    return traj;
}

/// Exponential weights of the three-stage Lobatto collocation for one step length h:
/// W^theta_ab(kappa) = int_0^{theta h} e^{-kappa (theta h - s)} phi_ab(s / h) ds, theta in {1/2, 1}.
/// Pair order: (0,0), (m,m), (1,1), (0,m), (0,1), (m,1); phi_aa = l_a^2, phi_ab = 2 l_a l_b.
struct CollocationWeights {
    std::vector<double> decay_half;
    std::vector<double> decay_full;
    std::array<std::vector<double>, 6> half;
    std::array<std::vector<double>, 6> full;
};

inline CollocationWeights collocation_weights(const GridSpec& g, double h, const QuadratureRule& rule) {
    const auto tab = mode_table(g);
    const auto nw = gauss_legendre(std::max(rule.nodes, 8));
    const double unit2 = g.wavenumber_unit() * g.wavenumber_unit();
    const std::size_t S = static_cast<std::size_t>(tab->max_shell) + 1;
    auto basis = [](double t) {
        return std::array<double, 3>{2.0 * (t - 0.5) * (t - 1.0), -4.0 * t * (t - 1.0), 2.0 * t * (t - 0.5)};
    };
    auto phis = [&](double t) {
        const auto l = basis(t);
        return std::array<double, 6>{l[0] * l[0], l[1] * l[1], l[2] * l[2],
                                     2.0 * l[0] * l[1], 2.0 * l[0] * l[2], 2.0 * l[1] * l[2]};
    };
    CollocationWeights w;
    w.decay_half.resize(S);
    w.decay_full.resize(S);
    for (auto& v : w.half) v.assign(S, 0.0);
    for (auto& v : w.full) v.assign(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        const double kappa = unit2 * static_cast<double>(s);
        w.decay_half[s] = std::exp(-kappa * 0.5 * h);
        w.decay_full[s] = std::exp(-kappa * h);
        for (std::size_t q = 0; q < nw.x.size(); ++q) {
            const double x = 0.5 * (nw.x[q] + 1.0);
            const double wq = 0.5 * nw.w[q];
            for (int which = 0; which < 2; ++which) {
                const double theta = which == 0 ? 0.5 : 1.0;
                const double e = theta * h * wq * std::exp(-kappa * theta * h * (1.0 - x));
                const auto ph = phis(theta * x);
                auto& dst = which == 0 ? w.half : w.full;
                for (int a = 0; a < 6; ++a) dst[a][s] += e * ph[a];
            }
        }
    }
    return w;
}

struct StepStats {
    int iterations = 0;
    double last_increment = 0.0;
};

/// One step of length dt from u by three-stage exponential collocation with sub-Picard closure.
inline SpectralField step(const SpectralField& u, double dt, const SolverConfig& cfg, const CollocationWeights& w,
                          StepStats* stats = nullptr) {
    const GridSpec& g = u.grid();
    const auto tab = mode_table(g);
    const auto p0 = dealiased_physical(u);
    const SpectralSymTensor t00 = sym_product(p0, p0);
    SpectralField um = heat_semigroup(u, 0.5 * dt);
    SpectralField u1 = heat_semigroup(u, dt);
    const SpectralField heat_half = um;
    const SpectralField heat_full = u1;
    StepStats st;
    for (int it = 0; it < cfg.picard_max_iter; ++it) {
        const auto pm = dealiased_physical(um);
        const auto p1 = dealiased_physical(u1);
        const std::array<SpectralSymTensor, 5> terms = {sym_product(pm, pm), sym_product(p1, p1), sym_product(p0, pm),
                                                        sym_product(p0, p1), sym_product(pm, p1)};
        // Weights are per-shell scalars, so they commute with P div: combine tensors, project twice.
        SpectralSymTensor th(g);
        SpectralSymTensor tf(g);
        for (int c = 0; c < 6; ++c) {
            Complex* dh = th.component(c);
            Complex* df = tf.component(c);
            const Complex* z = t00.component(c);
            const Complex* x[5];
            for (int a = 0; a < 5; ++a) x[a] = terms[a].component(c);
            for (const std::uint32_t q : tab->kept) {
                const int s = tab->shell[q];
                Complex ah = w.half[0][s] * z[q];
                Complex af = w.full[0][s] * z[q];
                for (int a = 0; a < 5; ++a) {
                    ah += w.half[a + 1][s] * x[a][q];
                    af += w.full[a + 1][s] * x[a][q];
                }
                dh[q] = ah;
                df[q] = af;
            }
        }
        SpectralField nm = heat_half;
        SpectralField n1 = heat_full;
        nm.axpy(-1.0, projected_divergence(th));
        n1.axpy(-1.0, projected_divergence(tf));
        const double inc = std::max(sobolev_norm(nm - um, 0.5), sobolev_norm(n1 - u1, 0.5));
        um = std::move(nm);
        u1 = std::move(n1);
        st.iterations = it + 1;
        st.last_increment = inc;
        if (!std::isfinite(inc) || !u1.all_finite()) {
            if (stats) *stats = st;
            throw StepFailure("step: non-finite values in sub-step iteration");
        }
        if (inc <= cfg.picard_tol) {
            if (stats) *stats = st;
            return u1;
        }
    }
    if (stats) *stats = st;
    throw StepFailure("step: sub-step Picard did not converge (last increment " + std::to_string(st.last_increment) +
                      ")");
}

inline SpectralField step(const SpectralField& u, double dt, const SolverConfig& cfg) {
    if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
    cfg.validate();
    return step(u, dt, cfg, collocation_weights(u.grid(), dt, cfg.duhamel_quadrature));
}

/// Stepwise march to the horizon with dt halving on step failure.
inline Trajectory solve(const SpectralField& u0, double horizon, const SolverConfig& cfg) {
    cfg.validate();
    require_initial_datum(u0);
    if (!(horizon > 0.0)) throw DomainError("solve: horizon must be positive");
    Trajectory traj(u0.grid());
    traj.push(0.0, u0);
    if (traj.records().back().hdot_half > cfg.norm_blowup_threshold) {
        traj.terminated_reason = TerminationReason::blowup_detected;
        return traj;
    }
    std::map<double, CollocationWeights> weights;
    auto weights_for = [&](double h) -> const CollocationWeights& {
        auto it = weights.find(h);
        if (it == weights.end()) {
            if (weights.size() > 8) weights.clear();
            it = weights.emplace(h, collocation_weights(u0.grid(), h, cfg.duhamel_quadrature)).first;
        }
        return it->second;
    };
    const bool zero = u0.is_zero();
    double dt = cfg.dt;
    double t = 0.0;
    SpectralField u = u0;
    while (horizon - t > 1e-12 * horizon) {
        double h = dt;
        double t_next = t + h;
        if (horizon - t_next < 1e-9 * dt) {
            t_next = horizon;
            h = horizon - t;
        }
        SpectralField next(u.grid());
        if (!zero) {
            try {
                next = step(u, h, cfg, weights_for(h));
            } catch (const StepFailure& e) {
                dt *= 0.5;
                emit_diagnostic("step_failure", std::string(e.what()) + "; dt halved to " + std::to_string(dt));
                if (dt < cfg.min_dt) {
                    traj.terminated_reason = TerminationReason::blowup_detected;
                    traj.t_star_estimate = t;
                    return traj;
                }
                continue;
            }
        }
        t = t_next;
        u = std::move(next);
        traj.push(t, u);
        if (traj.records().back().hdot_half > cfg.norm_blowup_threshold) {
            emit_diagnostic("blowup_threshold", "H^{1/2} norm exceeded threshold at t = " + std::to_string(t));
            traj.terminated_reason = TerminationReason::blowup_detected;
            return traj;
        }
    }
    traj.terminated_reason = TerminationReason::horizon_reached;
    return traj;
}

/// max over shared times of the L^3 distance between the interval route (cfgA) and the stepwise route (cfgB).
inline double cross_check_uniqueness(const SpectralField& u0, double T, const SolverConfig& cfgA,
                                     const SolverConfig& cfgB) {
    const Trajectory a = integrate_interval(u0, T, cfgA);
    if (a.terminated_reason != TerminationReason::horizon_reached) {
        throw IncomparableError("cross_check_uniqueness: interval route failed (" + to_string(a.terminated_reason) + ")");
    }
    const Trajectory b = solve(u0, T, cfgB);
    if (b.terminated_reason != TerminationReason::horizon_reached) {
        throw IncomparableError("cross_check_uniqueness: stepwise route failed (" + to_string(b.terminated_reason) + ")");
    }
    double worst = 0.0;
    std::size_t shared = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const auto k = b.find_time(a.times()[j], 1e-10);
        if (!k) continue;
        ++shared;
        worst = std::max(worst, lebesgue_norm(a.snapshots()[j] - b.snapshots()[*k], 3.0));
    }
    if (shared == 0) throw IncomparableError("cross_check_uniqueness: routes share no time");
    return worst;
}

} // namespace critns
