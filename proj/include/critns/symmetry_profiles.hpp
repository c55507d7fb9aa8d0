#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "critns/analytic_datum.hpp"
#include "critns/error.hpp"
#include "critns/operators.hpp"
#include "critns/spectral_field.hpp"
#include "critns/trajectory.hpp"

namespace critns {

/// Bubble (1/lambda) V((x - x0)/lambda) of a datum V.
struct ProfileSpec {
    AnalyticDatum datum = TaylorGreen{};
    double lambda = 1.0;
    Point x0{0.0, 0.0, 0.0};
};

namespace detail {

inline SpectralField place_periodic(const ProfileSpec& p, const GridSpec& g) {
    const double m = g.box_length() / (2.0 * std::numbers::pi * p.lambda);
    const double M = std::round(m);
    if (M < 1.0 || std::abs(m - M) > 1e-9 * m) {
        throw DomainError("place_profile: periodic datum needs L / (2 pi lambda) to be a positive integer, got " +
                          std::to_string(m));
    }
    const int mi = static_cast<int>(M);
    SpectralField psi(g);
    const Complex I(0.0, 1.0);
    for (const auto& pm : potential_modes(p.datum)) {
        std::array<int, 3> k{};
        for (int a = 0; a < 3; ++a) {
            k[a] = mi * pm.k[a];
            if (2 * std::abs(k[a]) >= g.n_modes()) {
                throw DomainError("place_profile: datum band is not representable on this grid");
            }
        }
        // Shift by x0 multiplies each coefficient by e^{-i k'.x0}, k' = k_datum / lambda.
        double ph = 0.0;
        for (int a = 0; a < 3; ++a) ph -= pm.k[a] * p.x0[a] / p.lambda;
        const Complex e(std::cos(ph), std::sin(ph));
        for (int c = 0; c < 3; ++c) psi.coeff(c, k[0], k[1], k[2]) += pm.c[c] * e;
    }
    return psi;
}

/// Periodization sum_m psi(x + m L) of the placed Gaussian potential, by its exact Fourier coefficients
/// A pi^{3/2} W^3 / L^3 exp(-|k|^2 W^2 / 4) e^{-i k.x0}, W = width * lambda. Nyquist modes are left at zero.
inline SpectralField place_localized(const ProfileSpec& p, const GridSpec& g) {
    const auto& v = std::get<LocalizedVortex>(p.datum);
    const double L = g.box_length();
    const double W = v.width * p.lambda;
    if (!(v.width > 0.0)) throw DomainError("place_profile: vortex width must be positive");
    if (2.0 * W > 0.5 * L) {
        throw DomainError("place_profile: profile diameter " + std::to_string(2.0 * W) + " exceeds L/2");
    }
    const double pref = v.amplitude * std::pow(std::numbers::pi, 1.5) * W * W * W / g.volume();
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    SpectralField psi(g);
    Complex* out = psi.component(v.axis);
    for (int i = 0; i < n; ++i) {
        if (g.is_nyquist(i)) continue;
        for (int j = 0; j < n; ++j) {
            if (g.is_nyquist(j)) continue;
            for (int l = 0; l < n; ++l) {
                if (g.is_nyquist(l)) continue;
                const double k[3] = {tab->k[i], tab->k[j], tab->k[l]};
                const double kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                const double amp = pref * std::exp(-0.25 * kk * W * W);
                if (amp == 0.0) continue;
                const double ph = -(k[0] * p.x0[0] + k[1] * p.x0[1] + k[2] * p.x0[2]);
                out[g.flat(i, j, l)] = std::polar(amp, ph);
            }
        }
    }
    psi.component(v.axis)[0] = 0.0;
    return psi;
}

} // namespace detail

/// Places x -> (1/lambda) V((x - x0)/lambda) as the spectral curl of the placed vector potential, built mode by
/// mode: periodic data exactly, localized data as the periodization of the continuum profile.
inline SpectralField place_profile(const ProfileSpec& p, const GridSpec& g) {
    if (!(p.lambda > 0.0) || !std::isfinite(p.lambda)) throw DomainError("place_profile: lambda must be positive");
    for (double c : p.x0) {
        if (!(c >= 0.0 && c < g.box_length())) throw DomainError("place_profile: core must lie inside the box");
    }
    const SpectralField psi = is_periodic(p.datum) ? detail::place_periodic(p, g) : detail::place_localized(p, g);
    SpectralField u = curl(psi);
    const double dd = divergence_defect(u);
    if (dd > 1e-10) throw MalformedField("place_profile: sampled field not divergence-free (" + std::to_string(dd) + ")");
    return u;
}

inline SpectralField sample_datum(const AnalyticDatum& d, const GridSpec& g) {
    return place_profile(ProfileSpec{d, 1.0, {0.0, 0.0, 0.0}}, g);
}

inline SpectralField superpose_profiles(const std::vector<ProfileSpec>& profiles, const SpectralField* remainder,
                                        const GridSpec& g) {
    SpectralField s(g);
    for (const auto& p : profiles) s += place_profile(p, g);
    if (remainder) s += *remainder;
    return s;
}

/// |  |S|^2 - sum |V_j|^2 - |R|^2 | / |S|^2 in H^{1/2}, S the superposition.
inline double pythagorean_defect(const std::vector<ProfileSpec>& profiles, const SpectralField* remainder,
                                 const GridSpec& g) {
    SpectralField s(g);
    double parts = 0.0;
    for (const auto& p : profiles) {
        const auto v = place_profile(p, g);
        const double nv = sobolev_norm(v, 0.5);
        parts += nv * nv;
        s += v;
    }
    if (remainder) {
        const double nr = sobolev_norm(*remainder, 0.5);
        parts += nr * nr;
        s += *remainder;
    }
    const double ns = sobolev_norm(s, 0.5);
    if (!(ns > 0.0)) throw DomainError("pythagorean_defect: superposition is zero");
    return std::abs(ns * ns - parts) / (ns * ns);
}

/// <D^{1/2} a, D^{1/2} b> / (|a|_{H^{1/2}} |b|_{H^{1/2}}) for the placed profiles.
inline double inner_product_orthogonality(const ProfileSpec& p1, const ProfileSpec& p2, const GridSpec& g) {
    const auto a = place_profile(p1, g);
    const auto b = place_profile(p2, g);
    const double na = sobolev_norm(a, 0.5);
    const double nb = sobolev_norm(b, 0.5);
    if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("inner_product_orthogonality: zero profile");
    return sobolev_inner(a, b, 0.5) / (na * nb);
}

/// u_lambda(x, t) = lambda u(lambda x, lambda^2 t): box L -> L/lambda, coefficients times lambda, times / lambda^2.
inline Trajectory scale_solution(const Trajectory& traj, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("scale_solution: lambda must be positive");
    const GridSpec& g = traj.grid();
    const GridSpec h(g.n_modes(), g.box_length() / lambda, g.dealias_fraction());
    Trajectory out(h);
    for (std::size_t j = 0; j < traj.size(); ++j) {
        SpectralField v(h);
        const SpectralField& u = traj.snapshots()[j];
        for (std::size_t q = 0; q < u.size(); ++q) v.data()[q] = lambda * u.data()[q];
        out.push(traj.times()[j] / (lambda * lambda), std::move(v));
    }
    out.terminated_reason = traj.terminated_reason;
    out.t_star_estimate = traj.t_star_estimate / (lambda * lambda);
    if (traj.failed_interval) out.failed_interval = *traj.failed_interval / (lambda * lambda);
    return out;
}

/// lambda(t): inverse length H^{3/2}/H^{1/2}; x(t): periodic centroid of |u|^3.
struct SimilarityFrame {
    std::vector<double> times;
    std::vector<double> lambda_t;
    std::vector<Point> x_t;
    std::vector<bool> defined;                     ///< false for zero snapshots (lambda_t set to 1)
    std::vector<std::array<bool, 3>> axis_defined; ///< false where the circular mean has no direction (x set to 0)

    std::optional<std::size_t> index_of(double t, double tol = 1e-12) const {
        for (std::size_t j = 0; j < times.size(); ++j)
            if (std::abs(times[j] - t) <= tol * std::max(1.0, std::abs(t))) return j;
        return std::nullopt;
    }
};

/// Periodic centroid of the |u|^3 density; axes with a vanishing circular resultant are flagged.
inline std::pair<Point, std::array<bool, 3>> periodic_centroid(const SpectralField& u) {
    const auto& g = u.grid();
    const auto phys = to_physical(u);
    const int n = g.n_modes();
    const double L = g.box_length();
    std::array<std::vector<double>, 3> marg;
    for (auto& m : marg) m.assign(n, 0.0);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const std::size_t q = g.flat(i, j, l);
                double m2 = 0.0;
                for (int c = 0; c < 3; ++c) m2 += phys.component(c)[q] * phys.component(c)[q];
                const double rho = m2 * std::sqrt(m2);
                marg[0][i] += rho;
                marg[1][j] += rho;
                marg[2][l] += rho;
                total += rho;
            }
    Point x{0.0, 0.0, 0.0};
    std::array<bool, 3> ok{false, false, false};
    if (!(total > 0.0)) return {x, ok};
    for (int a = 0; a < 3; ++a) {
        Complex z{};
        for (int i = 0; i < n; ++i) {
            const double th = 2.0 * std::numbers::pi * i / n;
            z += marg[a][i] * Complex(std::cos(th), std::sin(th));
        }
        if (std::abs(z) <= 1e-10 * total) continue;
        double ang = std::arg(z);
        if (ang < 0.0) ang += 2.0 * std::numbers::pi;
        x[a] = std::fmod(ang * L / (2.0 * std::numbers::pi), L);
        ok[a] = true;
    }
    return {x, ok};
}

inline SimilarityFrame similarity_frame_track(const Trajectory& traj) {
    SimilarityFrame f;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const auto& r = traj.records()[j];
        f.times.push_back(traj.times()[j]);
        if (!(r.hdot_half > 0.0)) {
            f.lambda_t.push_back(1.0);
            f.x_t.push_back({0.0, 0.0, 0.0});
            f.defined.push_back(false);
            f.axis_defined.push_back({false, false, false});
            continue;
        }
        f.lambda_t.push_back(r.hdot_threehalf / r.hdot_half);
        auto [x, ok] = periodic_centroid(traj.snapshots()[j]);
        f.x_t.push_back(x);
        f.defined.push_back(true);
        f.axis_defined.push_back(ok);
    }
    return f;
}

/// Values of u at the tensor-product points (xs[0][p], xs[1][q], xs[2][r]) by separable partial sums.
inline PhysicalField evaluate_tensor_grid(const SpectralField& u, const std::array<std::vector<double>, 3>& xs,
                                          const GridSpec& target) {
    const auto& g = u.grid();
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    const int N = target.n_modes();
    for (const auto& x : xs)
        if (static_cast<int>(x.size()) != N) throw DomainError("evaluate_tensor_grid: axis size mismatch");
    std::array<std::vector<Complex>, 3> E;
    for (int a = 0; a < 3; ++a) {
        E[a].resize(static_cast<std::size_t>(n) * N);
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < N; ++p) {
                const double ph = tab->k[i] * xs[a][p];
                E[a][static_cast<std::size_t>(i) * N + p] = Complex(std::cos(ph), std::sin(ph));
            }
    }
    PhysicalField out(target);
    std::vector<Complex> A(static_cast<std::size_t>(n) * n * N);
    std::vector<Complex> B(static_cast<std::size_t>(n) * N * N);
    for (int c = 0; c < 3; ++c) {
        const Complex* d = u.component(c);
        std::fill(A.begin(), A.end(), Complex{});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    const Complex v = d[g.flat(i, j, l)];
                    if (v == Complex{}) continue;
                    Complex* row = &A[(static_cast<std::size_t>(i) * n + j) * N];
                    const Complex* e = &E[2][static_cast<std::size_t>(l) * N];
                    for (int r = 0; r < N; ++r) row[r] += v * e[r];
                }
        std::fill(B.begin(), B.end(), Complex{});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const Complex* row = &A[(static_cast<std::size_t>(i) * n + j) * N];
                const Complex* e = &E[1][static_cast<std::size_t>(j) * N];
                for (int s = 0; s < N; ++s) {
                    const Complex es = e[s];
                    Complex* dst = &B[(static_cast<std::size_t>(i) * N + s) * N];
                    for (int r = 0; r < N; ++r) dst[r] += row[r] * es;
                }
            }
        double* o = out.component(c);
        for (int p = 0; p < N; ++p)
            for (int i = 0; i < n; ++i) {
                const Complex ep = E[0][static_cast<std::size_t>(i) * N + p];
                for (int s = 0; s < N; ++s) {
                    const Complex* src = &B[(static_cast<std::size_t>(i) * N + s) * N];
                    double* dst = o + target.flat(p, s, 0);
                    for (int r = 0; r < N; ++r) dst[r] += (src[r] * ep).real();
                }
            }
    }
    return out;
}

struct CompactnessOptions {
    int reference_modes = 32;     ///< N_ref
    double reference_length = 0;  ///< L_ref; 0 selects the trajectory box length
    bool normalize_amplitude = true;
};

/// Renormalized snapshot v(y) = (1/lambda) u(x_c + (y - L_ref/2)/lambda) on the reference grid.
inline PhysicalField renormalized_snapshot(const SpectralField& u, double lambda, const Point& xc,
                                           const GridSpec& ref) {
    const auto& g = u.grid();
    const auto tab = mode_table(g);
    const double kmax_allowed = std::numbers::pi * ref.n_modes() / ref.box_length();
    const int n = g.n_modes();
    double kmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const std::size_t q = g.flat(i, j, l);
                if (u.component(0)[q] == Complex{} && u.component(1)[q] == Complex{} && u.component(2)[q] == Complex{})
                    continue;
                kmax = std::max({kmax, std::abs(tab->k[i]), std::abs(tab->k[j]), std::abs(tab->k[l])});
            }
    if (kmax / lambda >= kmax_allowed) {
        throw DomainError("compactness_diagnostic: renormalized snapshot not representable on the reference grid");
    }
    std::array<std::vector<double>, 3> xs;
    const int N = ref.n_modes();
    for (int a = 0; a < 3; ++a) {
        xs[a].resize(N);
        for (int p = 0; p < N; ++p) xs[a][p] = xc[a] + (ref.coordinate(p) - 0.5 * ref.box_length()) / lambda;
    }
    auto v = evaluate_tensor_grid(u, xs, ref);
    for (auto& x : v.values()) x /= lambda;
    return v;
}

/// Pairwise L^3 distances between renormalized snapshots at sample_times (which must be trajectory and frame times).
inline std::vector<std::vector<double>> compactness_diagnostic(const Trajectory& traj, const SimilarityFrame& frame,
                                                               const std::vector<double>& sample_times,
                                                               const CompactnessOptions& opt = {}) {
    const double Lref = opt.reference_length > 0.0 ? opt.reference_length : traj.grid().box_length();
    const GridSpec ref(opt.reference_modes, Lref, traj.grid().dealias_fraction());
    std::vector<PhysicalField> v;
    for (double t : sample_times) {
        const auto j = traj.find_time(t);
        const auto f = frame.index_of(t);
        if (!j || !f) throw DomainError("compactness_diagnostic: sample time " + std::to_string(t) + " not on trajectory/frame");
        if (!frame.defined[*f]) throw DomainError("compactness_diagnostic: frame undefined at t = " + std::to_string(t));
        auto w = renormalized_snapshot(traj.snapshots()[*j], frame.lambda_t[*f], frame.x_t[*f], ref);
        if (opt.normalize_amplitude) {
            const double nrm = lebesgue_norm(w, 3.0);
            if (nrm > 0.0)
                for (auto& x : w.values()) x /= nrm;
        }
        v.push_back(std::move(w));
    }
    const std::size_t m = v.size();
    std::vector<std::vector<double>> D(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            PhysicalField diff = v[a];
            for (std::size_t q = 0; q < diff.values().size(); ++q) diff.values()[q] -= v[b].values()[q];
            D[a][b] = D[b][a] = lebesgue_norm(diff, 3.0);
        }
    return D;
}

/// int_{B_R(center)} |f|^2 dx by masked grid quadrature (minimum-image distance), R <= L/2.
inline double local_l2_mass(const SpectralField& f, const Point& center, double R) {
    const auto& g = f.grid();
    const double L = g.box_length();
    if (!(R >= 0.0) || R > 0.5 * L) throw DomainError("local_l2_mass: need 0 <= R <= L/2");
    const auto phys = to_physical(f);
    const int n = g.n_modes();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = periodic_delta(g.coordinate(i) - center[0], L);
        for (int j = 0; j < n; ++j) {
            const double dy = periodic_delta(g.coordinate(j) - center[1], L);
            for (int l = 0; l < n; ++l) {
                const double dz = periodic_delta(g.coordinate(l) - center[2], L);
                if (dx * dx + dy * dy + dz * dz > R * R) continue;
                const std::size_t q = g.flat(i, j, l);
                for (int c = 0; c < 3; ++c) acc += phys.component(c)[q] * phys.component(c)[q];
            }
        }
    }
    return acc * g.cell_volume();
}

} // namespace critns
