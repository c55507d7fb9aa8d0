#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "critns/diagnostics.hpp"
#include "critns/error.hpp"
#include "critns/quadrature.hpp"
#include "critns/spectral_field.hpp"
#include "critns/trajectory.hpp"

namespace critns {

/// Symmetric 3x3 tensor stored as (11, 22, 33, 12, 13, 23).
using SpectralSymTensor = SpectralArray<6>;

namespace detail {

inline constexpr int sym_index[3][3] = {{0, 3, 4}, {3, 1, 5}, {4, 5, 2}};

/// Calls fn(q, kd) for every mode, kd being the derivative wavevector (Nyquist components zero).
template <class F>
void for_each_mode(const GridSpec& g, F&& fn) {
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const std::array<double, 3> kd = {tab->kd[i], tab->kd[j], tab->kd[l]};
                fn(g.flat(i, j, l), kd);
            }
}

} // namespace detail

/// Divergence-free part: u_k - k'(k'.u_k)/|k'|^2.
inline SpectralField leray_project(SpectralField f) {
    Complex* a = f.component(0);
    Complex* b = f.component(1);
    Complex* c = f.component(2);
    detail::for_each_mode(f.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if (k2 == 0.0) return;
        const Complex s = (k[0] * a[q] + k[1] * b[q] + k[2] * c[q]) / k2;
        a[q] -= k[0] * s;
        b[q] -= k[1] * s;
        c[q] -= k[2] * s;
    });
    return f;
}

inline SpectralScalar divergence(const SpectralField& f) {
    SpectralScalar out(f.grid());
    const Complex I(0.0, 1.0);
    detail::for_each_mode(f.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        out.component(0)[q] = I * (k[0] * f.component(0)[q] + k[1] * f.component(1)[q] + k[2] * f.component(2)[q]);
    });
    return out;
}

/// (div F)_i = sum_j d_j F_ij for a row-major 3x3 tensor.
inline SpectralField divergence(const SpectralTensor& F) {
    SpectralField out(F.grid());
    const Complex I(0.0, 1.0);
    detail::for_each_mode(F.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        for (int i = 0; i < 3; ++i) {
            Complex s{};
            for (int j = 0; j < 3; ++j) s += k[j] * F.component(3 * i + j)[q];
            out.component(i)[q] = I * s;
        }
    });
    return out;
}

inline SpectralField divergence(const SpectralSymTensor& F) {
    SpectralField out(F.grid());
    const Complex I(0.0, 1.0);
    detail::for_each_mode(F.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        for (int i = 0; i < 3; ++i) {
            Complex s{};
            for (int j = 0; j < 3; ++j) s += k[j] * F.component(detail::sym_index[i][j])[q];
            out.component(i)[q] = I * s;
        }
    });
    return out;
}

inline SpectralField gradient(const SpectralScalar& p) {
    SpectralField out(p.grid());
    const Complex I(0.0, 1.0);
    detail::for_each_mode(p.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        for (int i = 0; i < 3; ++i) out.component(i)[q] = I * k[i] * p.component(0)[q];
    });
    return out;
}

/// omega_k = i k' x u_k.
inline SpectralField curl(const SpectralField& u) {
    SpectralField out(u.grid());
    const Complex I(0.0, 1.0);
    detail::for_each_mode(u.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        const Complex a = u.component(0)[q];
        const Complex b = u.component(1)[q];
        const Complex c = u.component(2)[q];
        out.component(0)[q] = I * (k[1] * c - k[2] * b);
        out.component(1)[q] = I * (k[2] * a - k[0] * c);
        out.component(2)[q] = I * (k[0] * b - k[1] * a);
    });
    return out;
}

template <int C>
SpectralArray<C> laplacian(SpectralArray<C> f) {
    apply_shell_multiplier(f, [](double k2) { return -k2; });
    return f;
}

/// Grid values of the dealiased field; the input to every quadratic product.
template <int C>
PhysicalArray<C> dealiased_physical(const SpectralArray<C>& f) {
    return detail::to_physical_unchecked(dealiased(f));
}

/// (a_i b_j) as a row-major tensor, output dealiased. Inputs are grid values of dealiased fields.
inline SpectralTensor outer_product(const PhysicalField& a, const PhysicalField& b) {
    PhysicalArray<9> prod(a.grid());
    const std::size_t N = a.points();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double* out = prod.component(3 * i + j);
            const double* ai = a.component(i);
            const double* bj = b.component(j);
            for (std::size_t q = 0; q < N; ++q) out[q] = ai[q] * bj[q];
        }
    auto spec = to_spectral(prod);
    dealias_inplace(spec);
    return spec;
}

/// (a_i b_j + a_j b_i)/2, output dealiased. The zero mode is dropped (it is annihilated by every divergence).
inline SpectralSymTensor sym_product(const PhysicalField& a, const PhysicalField& b) {
    PhysicalArray<6> prod(a.grid());
    const std::size_t N = a.points();
    const int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
    for (int m = 0; m < 6; ++m) {
        const int i = pairs[m][0];
        const int j = pairs[m][1];
        double* out = prod.component(m);
        const double* ai = a.component(i);
        const double* aj = a.component(j);
        const double* bi = b.component(i);
        const double* bj = b.component(j);
        if (&a == &b) {
            for (std::size_t q = 0; q < N; ++q) out[q] = ai[q] * bj[q];
        } else {
            for (std::size_t q = 0; q < N; ++q) out[q] = 0.5 * (ai[q] * bj[q] + aj[q] * bi[q]);
        }
    }
    auto spec = to_spectral(prod);
    dealias_inplace(spec);
    return spec;
}

/// P div G for a dealiased tensor G in one multiplier pass.
template <int C>
SpectralField projected_divergence(const SpectralArray<C>& G) {
    static_assert(C == 6 || C == 9);
    const GridSpec& g = G.grid();
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    SpectralField out(g);
    const Complex* Gc[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) Gc[i][j] = G.component(C == 9 ? 3 * i + j : detail::sym_index[i][j]);
    Complex* o[3] = {out.component(0), out.component(1), out.component(2)};
    // Inputs of this operator are dealiased products, so only retained modes can be nonzero.
    for (const std::uint32_t q : tab->kept) {
        const int i = static_cast<int>(q / (static_cast<std::size_t>(n) * n));
        const int j = static_cast<int>((q / n) % n);
        const int l = static_cast<int>(q % n);
        const double k[3] = {tab->kd[i], tab->kd[j], tab->kd[l]};
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if (k2 == 0.0) continue;
        // v = div G without the factor i; applied at the end.
        double vr[3];
        double vi[3];
        for (int a = 0; a < 3; ++a) {
            vr[a] = k[0] * Gc[a][0][q].real() + k[1] * Gc[a][1][q].real() + k[2] * Gc[a][2][q].real();
            vi[a] = k[0] * Gc[a][0][q].imag() + k[1] * Gc[a][1][q].imag() + k[2] * Gc[a][2][q].imag();
        }
        const double dr = (k[0] * vr[0] + k[1] * vr[1] + k[2] * vr[2]) / k2;
        const double di = (k[0] * vi[0] + k[1] * vi[1] + k[2] * vi[2]) / k2;
        for (int a = 0; a < 3; ++a) {
            const double pr = vr[a] - k[a] * dr;
            const double pi = vi[a] - k[a] * di;
            o[a][q] = Complex(-pi, pr);
        }
    }
    return out;
}

/// div(u (x) u) with dealiased products. Warns (and still returns) if u is not divergence-free.
inline SpectralField nonlinear_term(const SpectralField& u) {
    const double dd = divergence_defect(u);
    if (dd > 1e-10) {
        emit_diagnostic("nonlinear_term_not_divergence_free", "relative divergence " + std::to_string(dd));
    }
    const auto phys = dealiased_physical(u);
    return divergence(sym_product(phys, phys));
}

/// e^{t Lap} P div G, t > 0.
template <int C>
SpectralField oseen_apply(const SpectralArray<C>& G, double t) {
    if (!(t > 0.0)) throw DomainError("oseen_apply: t must be positive");
    return heat_semigroup(projected_divergence(G), t);
}

/// Scalar with p_k = (k_i k_j / |k|^2) (u_i u_j)_k, dealiased product, zero mode 0.
/// The physical pressure of the momentum equation u_t - Lap u + div(u (x) u) + grad p = 0 is the negative of this.
inline SpectralScalar pressure_from_velocity(const SpectralField& u) {
    const auto phys = dealiased_physical(u);
    const auto uu = sym_product(phys, phys);
    SpectralScalar p(u.grid());
    detail::for_each_mode(u.grid(), [&](std::size_t q, const std::array<double, 3>& k) {
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if (k2 == 0.0) return;
        Complex s{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += k[i] * k[j] * uu.component(detail::sym_index[i][j])[q];
        p.component(0)[q] = s / k2;
    });
    return p;
}

/// Per-shell weights for one lattice interval of length h ending at the evaluation time:
/// W_phi(kappa) = h sum_q w_q e^{-kappa h (1 - x_q)} phi(x_q) for phi in {(1-x)^2, x(1-x), x^2}.
struct IntervalWeights {
    std::vector<double> decay; ///< e^{-kappa h}
    std::vector<double> w_aa;
    std::vector<double> w_ab;
    std::vector<double> w_bb;
};

inline IntervalWeights interval_weights(const GridSpec& g, double h, const QuadratureRule& rule) {
    const auto tab = mode_table(g);
    const auto nw = unit_rule(rule);
    const double unit2 = g.wavenumber_unit() * g.wavenumber_unit();
    const std::size_t S = static_cast<std::size_t>(tab->max_shell) + 1;
    IntervalWeights w;
    w.decay.resize(S);
    w.w_aa.assign(S, 0.0);
    w.w_ab.assign(S, 0.0);
    w.w_bb.assign(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        const double kappa = unit2 * static_cast<double>(s);
        w.decay[s] = std::exp(-kappa * h);
        for (std::size_t q = 0; q < nw.x.size(); ++q) {
            const double x = nw.x[q];
            const double e = h * nw.w[q] * std::exp(-kappa * h * (1.0 - x));
            w.w_aa[s] += e * (1.0 - x) * (1.0 - x);
            w.w_ab[s] += e * x * (1.0 - x);
            w.w_bb[s] += e * x * x;
        }
    }
    return w;
}

namespace detail {

/// acc = decay .* acc + w_aa .* A + w_ab .* X + w_bb .* B per shell, over retained modes only.
template <int C>
void lattice_update(SpectralArray<C>& acc, const IntervalWeights& w, const SpectralArray<C>& A,
                    const SpectralArray<C>& X, const SpectralArray<C>& B) {
    const auto tab = mode_table(acc.grid());
    for (int c = 0; c < C; ++c) {
        Complex* d = acc.component(c);
        const Complex* a = A.component(c);
        const Complex* x = X.component(c);
        const Complex* b = B.component(c);
        for (const std::uint32_t q : tab->kept) {
            const int s = tab->shell[q];
            d[q] = w.decay[s] * d[q] + w.w_aa[s] * a[q] + w.w_ab[s] * x[q] + w.w_bb[s] * b[q];
        }
    }
}

template <int C>
std::vector<SpectralField> duhamel_lattice_impl(const std::vector<double>& times, const std::vector<PhysicalField>& pf,
                                                const std::vector<PhysicalField>* pg, const QuadratureRule& rule) {
    const GridSpec& grid = pf.front().grid();
    auto T = [&](std::size_t a, std::size_t b) -> SpectralArray<C> {
        if constexpr (C == 6) {
            return sym_product(pf[a], pf[b]);
        } else {
            return outer_product(pf[a], (*pg)[b]);
        }
    };
    std::vector<SpectralField> out;
    out.reserve(times.size());
    out.emplace_back(grid);
    // The tensor integral is accumulated first; P div and the sign are applied once per node.
    SpectralArray<C> acc(grid);
    SpectralArray<C> diag_prev = T(0, 0);
    double h_cached = -1.0;
    IntervalWeights w;
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
        const double h = times[j + 1] - times[j];
        if (!(h > 0.0)) throw DomainError("duhamel_lattice: times must increase strictly");
        if (h != h_cached) {
            w = interval_weights(grid, h, rule);
            h_cached = h;
        }
        SpectralArray<C> cross = T(j, j + 1);
        if constexpr (C == 6) {
            cross *= 2.0;
        } else {
            cross += T(j + 1, j);
        }
        SpectralArray<C> diag_next = T(j + 1, j + 1);
        lattice_update(acc, w, diag_prev, cross, diag_next);
        out.push_back(-1.0 * projected_divergence(acc));
        diag_prev = std::move(diag_next);
    }
    return out;
}

} // namespace detail

/// Duhamel form B(f, g)(t_m) = int_0^{t_m} e^{(t_m - s) Lap} P div(-f(s) (x) g(s)) ds at every node of a shared
/// time lattice, with f and g interpolated linearly between nodes. The product expansion over each interval is
/// exact; only the exponential weights are approximated by `rule`. When g is null, g = f and the symmetric
/// product is used (the Navier-Stokes case).
inline std::vector<SpectralField> duhamel_lattice(const std::vector<double>& times, const std::vector<SpectralField>& f,
                                                  const std::vector<SpectralField>* g, const QuadratureRule& rule) {
    if (times.empty() || f.size() != times.size() || (g && g->size() != times.size())) {
        throw DomainError("duhamel_lattice: snapshot and time counts differ");
    }
    if (times.size() == 1) return {SpectralField(f.front().grid())};
    std::vector<PhysicalField> pf;
    pf.reserve(f.size());
    for (const auto& s : f) pf.push_back(dealiased_physical(s));
    if (!g) return detail::duhamel_lattice_impl<6>(times, pf, nullptr, rule);
    std::vector<PhysicalField> pg;
    pg.reserve(g->size());
    for (const auto& s : *g) pg.push_back(dealiased_physical(s));
    return detail::duhamel_lattice_impl<9>(times, pf, &pg, rule);
}

/// Duhamel form B(f, g)(t) for trajectories on arbitrary (possibly different) time lattices.
inline SpectralField duhamel_bilinear(const Trajectory& f_traj, const Trajectory& g_traj, double t,
                                      const QuadratureRule& rule) {
    rule.validate();
    if (!(t >= 0.0)) throw DomainError("duhamel_bilinear: t must be >= 0");
    if (!(f_traj.grid() == g_traj.grid())) throw MalformedField("duhamel_bilinear: grids differ");
    if (!f_traj.covers(t) || !g_traj.covers(t)) {
        throw DomainError("duhamel_bilinear: trajectories do not cover [0, " + std::to_string(t) + "]");
    }
    if (t == 0.0) return SpectralField(f_traj.grid());
    std::vector<double> times;
    for (double s : f_traj.times())
        if (s < t) times.push_back(s);
    for (double s : g_traj.times())
        if (s < t) times.push_back(s);
    times.push_back(t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::vector<SpectralField> fs;
    std::vector<SpectralField> gs;
    for (double s : times) {
        fs.push_back(f_traj.at(s));
        gs.push_back(g_traj.at(s));
    }
    return duhamel_lattice(times, fs, &gs, rule).back();
}

namespace detail {

/// Three-point derivative weights at the middle node of a nonuniform stencil.
inline std::array<double, 3> central_weights(double tm, double t0, double tp) {
    const double h1 = t0 - tm;
    const double h2 = tp - t0;
    return {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))};
}

inline std::size_t interior_index(const Trajectory& traj, double t) {
    const auto j = traj.find_time(t);
    if (!j || *j == 0 || *j + 1 >= traj.size()) {
        throw DomainError("residual: t = " + std::to_string(t) + " is not an interior snapshot time");
    }
    return *j;
}

} // namespace detail

inline constexpr double residual_epsilon = 1e-14;

/// u_t + div(u (x) u) - Lap u + grad p_phys at snapshot t, u_t by central difference.
inline SpectralField momentum_residual_field(const Trajectory& traj, double t) {
    const std::size_t j = detail::interior_index(traj, t);
    const auto& T = traj.times();
    const auto& U = traj.snapshots();
    const auto cw = detail::central_weights(T[j - 1], T[j], T[j + 1]);
    SpectralField r = cw[0] * U[j - 1];
    r.axpy(cw[1], U[j]);
    r.axpy(cw[2], U[j + 1]);
    r += nonlinear_term(U[j]);
    r -= laplacian(U[j]);
    r -= gradient(pressure_from_velocity(U[j]));
    return r;
}

inline double nse_residual(const Trajectory& traj, double t) {
    const std::size_t j = detail::interior_index(traj, t);
    return sobolev_norm(momentum_residual_field(traj, t), 0.0) /
           (sobolev_norm(traj.snapshots()[j], 1.0) + residual_epsilon);
}

/// omega_t - Lap omega + div(omega (x) u - u (x) omega) at snapshot t.
inline SpectralField vorticity_residual_field(const Trajectory& traj, double t) {
    const std::size_t j = detail::interior_index(traj, t);
    const auto& T = traj.times();
    const auto& U = traj.snapshots();
    const auto cw = detail::central_weights(T[j - 1], T[j], T[j + 1]);
    SpectralField w = curl(U[j]);
    SpectralField r = cw[0] * curl(U[j - 1]);
    r.axpy(cw[1], w);
    r.axpy(cw[2], curl(U[j + 1]));
    r -= laplacian(w);
    const auto pu = dealiased_physical(U[j]);
    const auto pw = dealiased_physical(w);
    r += divergence(outer_product(pw, pu));
    r -= divergence(outer_product(pu, pw));
    return r;
}

inline double vorticity_residual(const Trajectory& traj, double t) {
    const std::size_t j = detail::interior_index(traj, t);
    return sobolev_norm(vorticity_residual_field(traj, t), 0.0) /
           (sobolev_norm(curl(traj.snapshots()[j]), 1.0) + residual_epsilon);
}

} // namespace critns
