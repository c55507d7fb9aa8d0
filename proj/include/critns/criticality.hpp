#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "critns/error.hpp"
#include "critns/operators.hpp"
#include "critns/quadrature.hpp"
#include "critns/spectral_field.hpp"
#include "critns/trajectory.hpp"

namespace critns {

namespace detail {

inline void require_coverage(const Trajectory& traj, double T) {
    if (traj.empty() || !(T >= 0.0) || !traj.covers(T)) {
        throw CoverageError("trajectory does not cover [0, " + std::to_string(T) + "]");
    }
}

/// Linear interpolation of a record field at T (cumulative fields are piecewise linear in the trapezoid sense).
template <class Get>
double record_at(const Trajectory& traj, double T, Get get) {
    require_coverage(traj, T);
    const auto& R = traj.records();
    if (R.size() == 1) return get(R[0]);
    const std::size_t j = traj.interval_of(T);
    const double t0 = R[j].t;
    const double t1 = R[j + 1].t;
    const double tau = std::clamp((T - t0) / (t1 - t0), 0.0, 1.0);
    return (1.0 - tau) * get(R[j]) + tau * get(R[j + 1]);
}

} // namespace detail

/// (sup_{t <= T} |u|_{H^{1/2}}^2 + int_0^T |u|_{H^{3/2}}^2)^{1/2} from the records.
inline double e_norm(const Trajectory& traj, double T) {
    detail::require_coverage(traj, T);
    double sup = 0.0;
    for (const auto& r : traj.records())
        if (r.t <= T) sup = std::max(sup, r.hdot_half * r.hdot_half);
    const double hT = detail::record_at(traj, T, [](const NormRecord& r) { return r.hdot_half; });
    sup = std::max(sup, hT * hT);
    return std::sqrt(sup + detail::record_at(traj, T, [](const NormRecord& r) { return r.cum_grad_hhalf_sq; }));
}

/// (int_0^T |u|_{H^1}^4)^{1/4}.
inline double f_norm(const Trajectory& traj, double T) {
    return std::pow(detail::record_at(traj, T, [](const NormRecord& r) { return r.cum_f4_pow4; }), 0.25);
}

/// (int_0^T |u|_5^5)^{1/5}.
inline double l5_spacetime(const Trajectory& traj, double T) {
    return std::pow(detail::record_at(traj, T, [](const NormRecord& r) { return r.cum_l5_pow5; }), 0.2);
}

/// sup_t |u|_{H^{1/2}} and (int |u|_{H^{3/2}}^2)^{1/2} up to T: the two factors of the record-level interpolation bounds.
inline std::pair<double, double> e_norm_parts(const Trajectory& traj, double T) {
    detail::require_coverage(traj, T);
    double sup = 0.0;
    for (const auto& r : traj.records())
        if (r.t <= T) sup = std::max(sup, r.hdot_half);
    return {sup, std::sqrt(detail::record_at(traj, T, [](const NormRecord& r) { return r.cum_grad_hhalf_sq; }))};
}

struct WeightedSup {
    double sup = 0.0;  ///< max over t <= T of sqrt(t) |u(t)|_inf
    double tail = 0.0; ///< same restricted to t <= T/100
};

inline WeightedSup weighted_sup(const Trajectory& traj, double T) {
    detail::require_coverage(traj, T);
    WeightedSup w;
    for (const auto& r : traj.records()) {
        if (r.t > T) break;
        w.sup = std::max(w.sup, r.sqrt_t_linf);
        if (r.t <= T / 100.0) w.tail = std::max(w.tail, r.sqrt_t_linf);
    }
    return w;
}

/// max_t [ |u(t)|_{H^{1/2}}^2 + int_0^t |grad u|_{H^{1/2}}^2 - |u_0|_{H^{1/2}}^2 ]; <= 0 means the inequality holds.
inline double energy_audit(const Trajectory& traj) {
    if (traj.empty()) return 0.0;
    const auto& R = traj.records();
    const double h0 = R.front().hdot_half * R.front().hdot_half;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : R) worst = std::max(worst, r.hdot_half * r.hdot_half + r.cum_grad_hhalf_sq - h0);
    return worst;
}

namespace detail {

/// Composite-trapezoid error bound sum_i h_i^3/12 |g''_i| with g'' from divided differences, plus a rounding floor.
inline double trapezoid_error_bound(const std::vector<double>& t, const std::vector<double>& g) {
    double bound = 0.0;
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double h = t[i] - t[i - 1];
        double g2 = 0.0;
        if (t.size() >= 3) {
            const std::size_t c = std::clamp<std::size_t>(i, 1, t.size() - 2);
            const double h1 = t[c] - t[c - 1];
            const double h2 = t[c + 1] - t[c];
            g2 = 2.0 * ((g[c + 1] - g[c]) / h2 - (g[c] - g[c - 1]) / h1) / (h1 + h2);
        }
        bound += h * h * h / 12.0 * std::abs(g2);
    }
    const double T = t.empty() ? 0.0 : t.back() - t.front();
    return bound + 64.0 * std::numeric_limits<double>::epsilon() * scale * std::max(1.0, T) * std::max<std::size_t>(1, t.size());
}

} // namespace detail

/// Quadrature error bound of the cumulative integral used by energy_audit.
inline double energy_quadrature_bound(const Trajectory& traj) {
    std::vector<double> g;
    for (const auto& r : traj.records()) g.push_back(r.hdot_threehalf * r.hdot_threehalf);
    double b = detail::trapezoid_error_bound(traj.times(), g);
    if (!traj.empty()) {
        const double h0 = traj.records().front().hdot_half;
        b += 64.0 * std::numeric_limits<double>::epsilon() * h0 * h0;
    }
    return b;
}

/// L^2 energy equality max_t | |u(t)|_2^2 + 2 int_0^t |grad u|_2^2 - |u_0|_2^2 | and its trapezoid error bound.
inline std::pair<double, double> energy_equality_defect(const Trajectory& traj) {
    if (traj.empty()) return {0.0, 0.0};
    const auto& R = traj.records();
    const double e0 = R.front().l2 * R.front().l2;
    double worst = 0.0;
    std::vector<double> g;
    for (const auto& r : R) {
        worst = std::max(worst, std::abs(r.l2 * r.l2 + 2.0 * r.cum_grad_l2_sq - e0));
        g.push_back(2.0 * r.hdot_one * r.hdot_one);
    }
    return {worst, detail::trapezoid_error_bound(traj.times(), g) + 64.0 * std::numeric_limits<double>::epsilon() * e0};
}

struct DecayReport {
    double initial = 0.0;
    double final = 0.0;
    double max = 0.0;
    /// Earliest record time after which |u|_{H^{1/2}} never increases, if any.
    std::optional<double> monotone_after;
};

inline DecayReport decay_audit(const Trajectory& traj) {
    DecayReport d;
    if (traj.empty()) return d;
    const auto& R = traj.records();
    d.initial = R.front().hdot_half;
    d.final = R.back().hdot_half;
    for (const auto& r : R) d.max = std::max(d.max, r.hdot_half);
    std::size_t k = R.size() - 1;
    while (k > 0 && R[k].hdot_half <= R[k - 1].hdot_half) --k;
    d.monotone_after = R[k].t;
    return d;
}

/// Cubic Lagrange interpolation of the snapshots at t (linear for two-snapshot trajectories).
inline SpectralField interpolate_cubic(const Trajectory& traj, double t) {
    const std::size_t m = traj.size();
    if (m < 4) return traj.at(t);
    const std::size_t j = traj.interval_of(t);
    const std::size_t s = std::min(j > 0 ? j - 1 : 0, m - 4);
    const auto& T = traj.times();
    SpectralField out(traj.grid());
    for (std::size_t a = s; a < s + 4; ++a) {
        double w = 1.0;
        for (std::size_t b = s; b < s + 4; ++b)
            if (b != a) w *= (t - T[b]) / (T[a] - T[b]);
        out.axpy(w, traj.snapshots()[a]);
    }
    return out;
}

struct SmallnessOptions {
    int radial_nodes = 16;
    int polar_nodes = 16;
    int azimuthal_nodes = 32;
    int time_nodes = 12;
    bool normalize = true; ///< multiply by r^{-2} (unit-cylinder scaling)
};

/// r^{-2} int_{t_end - r^2}^{t_end} int_{B_r(center)} |u|^3 + |p|^{3/2} dx dt with p from pressure_from_velocity.
/// Ball by Gauss-Legendre in radius and polar angle and the trapezoid rule in azimuth; fields by direct mode sums.
inline double local_smallness(const Trajectory& traj, const Point& center, double r, double t_end,
                              const SmallnessOptions& opt = {}) {
    if (traj.empty()) throw CoverageError("local_smallness: empty trajectory");
    const double L = traj.grid().box_length();
    if (!(r > 0.0) || r > 0.25 * L) throw DomainError("local_smallness: need 0 < r <= L/4");
    const double t0 = t_end - r * r;
    if (t0 < traj.times().front() - 1e-14 || !traj.covers(t_end)) {
        throw CoverageError("local_smallness: cylinder outside the sampled time range");
    }
    const auto tq = gauss_legendre_on(opt.time_nodes, t0, t_end);
    const auto rq = gauss_legendre_on(opt.radial_nodes, 0.0, r);
    const auto pq = gauss_legendre_on(opt.polar_nodes, 0.0, std::numbers::pi);
    const int nphi = opt.azimuthal_nodes;
    const double dphi = 2.0 * std::numbers::pi / nphi;
    double total = 0.0;
    for (std::size_t it = 0; it < tq.x.size(); ++it) {
        const SpectralField u = interpolate_cubic(traj, tq.x[it]);
        const PointEvaluator<3> eu(u);
        const PointEvaluator<1> ep(pressure_from_velocity(u));
        double space = 0.0;
        for (std::size_t ir = 0; ir < rq.x.size(); ++ir) {
            const double rho = rq.x[ir];
            for (std::size_t ip = 0; ip < pq.x.size(); ++ip) {
                const double th = pq.x[ip];
                const double w = rq.w[ir] * pq.w[ip] * rho * rho * std::sin(th) * dphi;
                for (int k = 0; k < nphi; ++k) {
                    const double ph = k * dphi;
                    const Point x{center[0] + rho * std::sin(th) * std::cos(ph),
                                  center[1] + rho * std::sin(th) * std::sin(ph), center[2] + rho * std::cos(th)};
                    const auto v = eu(x);
                    const double m2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                    const double p = std::abs(ep(x)[0]);
                    space += w * (m2 * std::sqrt(m2) + p * std::sqrt(p));
                }
            }
        }
        total += tq.w[it] * space;
    }
    return opt.normalize ? total / (r * r) : total;
}

/// phi(x, t) = amplitude * chi(t) * prod_i beta((x_i - c_i)/w_i); chi rises smoothly from 0 at rise_start to 1 at
/// rise_end and stays 1 afterwards.
struct CutoffSpec {
    Point center{0.0, 0.0, 0.0};
    std::array<double, 3> half_width{1.0, 1.0, 1.0};
    double amplitude = 1.0;
    double rise_start = 0.1;
    double rise_end = 0.3;
};

namespace detail {

/// beta(s) = exp(-1/(1-s^2)) with first and second derivatives.
inline std::array<double, 3> bump_derivs(double s) {
    if (std::abs(s) >= 1.0) return {0.0, 0.0, 0.0};
    const double d = 1.0 - s * s;
    const double b = std::exp(-1.0 / d);
    const double g1 = -2.0 * s / (d * d);
    const double g2 = -(2.0 + 6.0 * s * s) / (d * d * d);
    return {b, g1 * b, (g2 + g1 * g1) * b};
}

/// Smooth step S(tau) = f(tau)/(f(tau) + f(1 - tau)), f(x) = e^{-1/x}, and dS/dtau.
inline std::array<double, 2> smooth_step(double tau) {
    if (tau <= 0.0) return {0.0, 0.0};
    if (tau >= 1.0) return {1.0, 0.0};
    const double a = std::exp(-1.0 / tau);
    const double b = std::exp(-1.0 / (1.0 - tau));
    const double da = a / (tau * tau);
    const double db = -b / ((1.0 - tau) * (1.0 - tau));
    const double s = a + b;
    return {a / s, (da * s - a * (da + db)) / (s * s)};
}

struct BalanceParts {
    double lhs = 0.0;
    double rhs = 0.0;
    double scale = 0.0; ///< sum of absolute term sizes, for the rounding floor
};

/// 1D Fourier coefficients (1/L) int beta(delta(x - c)/w) e^{-ikx} dx for modes -M..M, by the trapezoid rule on
/// [-1, 1] (beta is flat at both ends, so the rule converges faster than any power).
inline std::vector<Complex> bump_fourier(double c, double w, double L, int M, int nodes) {
    std::vector<double> s(nodes + 1), b(nodes + 1);
    const double h = 2.0 / nodes;
    for (int q = 0; q <= nodes; ++q) {
        s[q] = -1.0 + q * h;
        b[q] = bump_derivs(s[q])[0];
    }
    std::vector<Complex> out(2 * M + 1);
    for (int m = -M; m <= M; ++m) {
        const double k = 2.0 * std::numbers::pi * m / L;
        double acc = 0.0;
        for (int q = 1; q < nodes; ++q) acc += b[q] * std::cos(k * w * s[q]);
        out[m + M] = std::polar(w / L * h * acc, -k * c);
    }
    return out;
}

/// Largest |mode component| carrying a coefficient above rel * max|coeff|.
inline int band_limit(const SpectralField& u, double rel = 1e-14) {
    const auto& g = u.grid();
    const double floor = rel * u.max_abs();
    const int n = g.n_modes();
    int c = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const std::size_t q = g.flat(i, j, l);
                for (int d = 0; d < 3; ++d)
                    if (std::abs(u.component(d)[q]) > floor) {
                        c = std::max({c, std::abs(g.mode_of(i)), std::abs(g.mode_of(j)), std::abs(g.mode_of(l))});
                        break;
                    }
            }
    return c;
}

/// Spatial integrals at one time, evaluated exactly on the Fourier side: every integrand is phi, grad phi or
/// Lap phi times a product of band-limited fields, computed alias-free on a grid holding cubic products.
struct SpatialTerms {
    double phi_u2 = 0.0;    ///< int Phi |u|^2
    double bulk = 0.0;      ///< int 2 Phi |grad u|^2 - |u|^2 Lap Phi - u.grad Phi (|u|^2 + 2p)
    double magnitude = 0.0; ///< sum of absolute mode contributions
};

inline SpatialTerms spatial_terms(const SpectralField& uc, const CutoffSpec& cut, int bump_nodes, bool u2_only) {
    const double L = uc.grid().box_length();
    const int c = std::max(1, band_limit(uc));
    int nf = 2 * (3 * c) + 2;
    nf = std::max(8, nf + (nf % 2));
    const GridSpec g(nf, L, 1.0);
    const int M = nf / 2 - 1;
    std::array<std::vector<Complex>, 3> ph;
    for (int a = 0; a < 3; ++a) ph[a] = bump_fourier(cut.center[a], cut.half_width[a], L, M, bump_nodes);

    const SpectralField u = resample(uc, g);
    const auto pu = detail::to_physical_unchecked(u);
    const auto tab = mode_table(g);
    PhysicalScalar u2(g);
    for (std::size_t q = 0; q < g.points(); ++q) {
        double m2 = 0.0;
        for (int d = 0; d < 3; ++d) m2 += pu.component(d)[q] * pu.component(d)[q];
        u2.component(0)[q] = m2;
    }
    std::array<double, 1> mean_u2{};
    const auto U2 = to_spectral(u2, &mean_u2);

    PhysicalScalar gsq(g);
    PhysicalField flux(g);
    SpectralScalar G1(g);
    SpectralField V(g);
    std::array<double, 1> mean_g{};
    std::array<double, 3> mean_v{};
    if (!u2_only) {
        const Complex I(0.0, 1.0);
        SpectralArray<9> gs(g);
        const int n = g.n_modes();
        for (int d = 0; d < 3; ++d)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int l = 0; l < n; ++l) {
                        const std::size_t q = g.flat(i, j, l);
                        const Complex v = u.component(d)[q];
                        gs.component(3 * d + 0)[q] = I * tab->kd[i] * v;
                        gs.component(3 * d + 1)[q] = I * tab->kd[j] * v;
                        gs.component(3 * d + 2)[q] = I * tab->kd[l] * v;
                    }
        const auto gu = detail::to_physical_unchecked(gs);
        // Physical pressure is the negative of pressure_from_velocity.
        const auto pp = detail::to_physical_unchecked(resample(pressure_from_velocity(uc), g));
        for (std::size_t q = 0; q < g.points(); ++q) {
            double s = 0.0;
            for (int d = 0; d < 9; ++d) s += gu.component(d)[q] * gu.component(d)[q];
            gsq.component(0)[q] = 2.0 * s;
            const double w = u2.component(0)[q] - 2.0 * pp.component(0)[q];
            for (int d = 0; d < 3; ++d) flux.component(d)[q] = pu.component(d)[q] * w;
        }
        G1 = to_spectral(gsq, &mean_g);
        V = to_spectral(flux, &mean_v);
    }

    // int f Phi = L^3 sum_k fhat(k) conj(Phihat(k)); the zero modes carry the means removed by to_spectral.
    SpatialTerms out;
    const double vol = g.volume();
    const int n = g.n_modes();
    for (int i = 0; i < n; ++i) {
        const int mi = g.mode_of(i);
        if (std::abs(mi) > M) continue;
        for (int j = 0; j < n; ++j) {
            const int mj = g.mode_of(j);
            if (std::abs(mj) > M) continue;
            for (int l = 0; l < n; ++l) {
                const int ml = g.mode_of(l);
                if (std::abs(ml) > M) continue;
                const std::size_t q = g.flat(i, j, l);
                const Complex P = std::conj(ph[0][mi + M] * ph[1][mj + M] * ph[2][ml + M]);
                const bool zero = q == 0;
                const Complex u2h = zero ? Complex(mean_u2[0]) : U2.component(0)[q];
                const double t0 = (u2h * P).real();
                out.phi_u2 += t0;
                if (u2_only) {
                    out.magnitude += std::abs(t0);
                    continue;
                }
                const double k1 = tab->k[i], k2 = tab->k[j], k3 = tab->k[l];
                const double kk = k1 * k1 + k2 * k2 + k3 * k3;
                const Complex g1 = zero ? Complex(mean_g[0]) : G1.component(0)[q];
                // conj(i k Phihat) = -i k conj(Phihat)
                const Complex dP(0.0, -1.0);
                Complex adv = 0.0;
                if (!zero) adv = dP * P * (k1 * V.component(0)[q] + k2 * V.component(1)[q] + k3 * V.component(2)[q]);
                const double a = (g1 * P).real();
                const double b = kk * t0;
                const double d = adv.real();
                out.bulk += a + b - d;
                out.magnitude += std::abs(a) + std::abs(b) + std::abs(d) + std::abs(t0);
            }
        }
    }
    out.phi_u2 *= vol;
    out.bulk *= vol;
    out.magnitude *= vol;
    return out;
}

inline BalanceParts local_energy_parts(const Trajectory& traj, const CutoffSpec& cut, double t, int time_nodes,
                                       int bump_nodes) {
    const double rise = cut.rise_end - cut.rise_start;
    auto chi = [&](double s) { return smooth_step((s - cut.rise_start) / rise); };
    BalanceParts parts;
    const double a = std::max(cut.rise_start, traj.times().front());
    // Split where chi changes regularity.
    std::vector<std::pair<double, double>> pieces;
    if (t > a) pieces.push_back({a, std::min(t, cut.rise_end)});
    if (t > cut.rise_end) pieces.push_back({cut.rise_end, t});
    double integral = 0.0;
    for (const auto& [lo, hi] : pieces) {
        const auto q = gauss_legendre_on(time_nodes, lo, hi);
        for (std::size_t k = 0; k < q.x.size(); ++k) {
            const auto cs = chi(q.x[k]);
            const auto s = spatial_terms(interpolate_cubic(traj, q.x[k]), cut, bump_nodes, false);
            // -|u|^2 phi_t with phi_t = A chi'(t) Phi
            const double v = cs[0] * s.bulk - cs[1] / rise * s.phi_u2;
            integral += q.w[k] * v;
            parts.scale += std::abs(q.w[k]) * (s.magnitude * (cs[0] + std::abs(cs[1]) / rise));
        }
    }
    double now = 0.0;
    if (t > a) {
        const auto s = spatial_terms(interpolate_cubic(traj, t), cut, bump_nodes, true);
        now = chi(t)[0] * s.phi_u2;
        parts.scale += s.magnitude;
    }
    // LHS - RHS = int phi |u|^2 (t) + int_{T1}^t [2 phi |grad u|^2 - |u|^2 (Lap phi + phi_t) - u.grad phi (|u|^2 + 2p)].
    parts.lhs = cut.amplitude * (now + integral);
    parts.rhs = 0.0;
    parts.scale *= std::abs(cut.amplitude);
    return parts;
}

} // namespace detail

struct BalanceOptions {
    int time_nodes = 16;
    int bump_nodes = 2048; ///< trapezoid nodes for the cutoff's 1D Fourier coefficients
};

struct LocalEnergyBalance {
    double defect = 0.0;           ///< LHS - RHS of the local energy inequality
    double quadrature_error = 0.0; ///< refinement-based estimate plus a rounding floor
};

/// Local energy inequality defect for the cutoff at time t; equality (defect 0) holds for smooth solutions.
/// Snapshots are interpolated cubically in time; the finest variant doubles both node counts.
inline LocalEnergyBalance local_energy_balance(const Trajectory& traj, const CutoffSpec& cut, double t,
                                               const BalanceOptions& opt = {}) {
    if (traj.empty()) throw CoverageError("local_energy_balance: empty trajectory");
    const double L = traj.grid().box_length();
    const double T1 = traj.times().front();
    for (double w : cut.half_width)
        if (!(w > 0.0) || w > 0.5 * L) throw DomainError("local_energy_balance: cutoff half-width must lie in (0, L/2]");
    if (!(cut.rise_start > T1) || !(cut.rise_end > cut.rise_start)) {
        throw DomainError("local_energy_balance: cutoff must vanish near the initial time (need T1 < rise_start < rise_end)");
    }
    if (!traj.covers(t)) throw CoverageError("local_energy_balance: t outside the trajectory");
    if (opt.time_nodes < 2 || opt.bump_nodes < 16) throw DomainError("local_energy_balance: bad quadrature options");
    const auto fine = detail::local_energy_parts(traj, cut, t, 2 * opt.time_nodes, 2 * opt.bump_nodes);
    const auto coarse_t = detail::local_energy_parts(traj, cut, t, opt.time_nodes, 2 * opt.bump_nodes);
    const auto coarse_x = detail::local_energy_parts(traj, cut, t, 2 * opt.time_nodes, opt.bump_nodes);
    LocalEnergyBalance r;
    r.defect = fine.lhs - fine.rhs;
    r.quadrature_error = std::abs(r.defect - (coarse_t.lhs - coarse_t.rhs)) +
                         std::abs(r.defect - (coarse_x.lhs - coarse_x.rhs)) + 1e-12 * fine.scale;
    return r;
}

} // namespace critns
