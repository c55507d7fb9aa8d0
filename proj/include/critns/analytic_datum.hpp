#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "critns/error.hpp"
#include "critns/grid.hpp"
#include "critns/spectral_field.hpp"

namespace critns {

/// u = A (sin x1 cos x2, -cos x1 sin x2, 0), 2*pi-periodic; vector potential (0, 0, A sin x1 sin x2).
struct TaylorGreen {
    double amplitude = 1.0;
};

/// 2*pi-periodic random field with integer wavevectors k_min <= |k| <= k_max, coefficient magnitude ~ |k|^slope,
/// rescaled so its H^{1/2} norm on [0, 2*pi)^3 equals target_hhalf.
struct BandLimitedRandom {
    std::uint64_t seed = 1;
    double slope = -1.0;
    double k_min = 1.0;
    double k_max = 4.0;
    double target_hhalf = 0.1;
};

/// Gaussian ring vortex: potential A exp(-|x|^2 / width^2) e_axis, velocity its curl.
struct LocalizedVortex {
    double width = 1.0;
    double amplitude = 1.0;
    int axis = 2;
};

using AnalyticDatum = std::variant<TaylorGreen, BandLimitedRandom, LocalizedVortex>;

inline std::string datum_kind(const AnalyticDatum& d) {
    switch (d.index()) {
    case 0: return "taylor_green";
    case 1: return "band_limited_random";
    default: return "localized_vortex";
    }
}

/// One Fourier mode of a 2*pi-periodic vector potential: psi(x) = sum c e^{i k.x} over a Hermitian set.
struct PotentialMode {
    std::array<int, 3> k;
    std::array<Complex, 3> c;
};

namespace detail {

/// Standard normal by Box-Muller on mt19937_64 output, so streams are identical on every platform.
class PortableNormal {
public:
    explicit PortableNormal(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline std::vector<PotentialMode> taylor_green_modes(const TaylorGreen& d) {
    // A sin x sin y = -A/4 (e^{i(x+y)} + e^{-i(x+y)} - e^{i(x-y)} - e^{-i(x-y)})
    const double q = -0.25 * d.amplitude;
    std::vector<PotentialMode> m;
    for (int a : {-1, 1})
        for (int b : {-1, 1}) {
            const double sgn = a == b ? 1.0 : -1.0;
            m.push_back({{a, b, 0}, {Complex{}, Complex{}, Complex(q * sgn, 0.0)}});
        }
    return m;
}

inline std::vector<PotentialMode> random_modes(const BandLimitedRandom& d) {
    if (!(d.k_min > 0.0) || !(d.k_max >= d.k_min)) throw DomainError("BandLimitedRandom: need 0 < k_min <= k_max");
    if (!(d.target_hhalf >= 0.0)) throw DomainError("BandLimitedRandom: target norm must be >= 0");
    PortableNormal normal(d.seed);
    const int K = static_cast<int>(std::floor(d.k_max));
    std::vector<PotentialMode> half;
    // Half space: k3 > 0, or k3 = 0 and k2 > 0, or k3 = k2 = 0 and k1 > 0.
    for (int k1 = -K; k1 <= K; ++k1)
        for (int k2 = -K; k2 <= K; ++k2)
            for (int k3 = 0; k3 <= K; ++k3) {
                if (k3 == 0 && (k2 < 0 || (k2 == 0 && k1 <= 0))) continue;
                const double kk = std::sqrt(static_cast<double>(k1 * k1 + k2 * k2 + k3 * k3));
                if (kk < d.k_min - 1e-12 || kk > d.k_max + 1e-12) continue;
                std::array<Complex, 3> a;
                for (auto& z : a) {
                    const double re = normal();
                    const double im = normal();
                    z = Complex(re, im) * std::pow(kk, d.slope);
                }
                // psi = i k x a / |k|^2, so u = curl psi = P a.
                const double k[3] = {double(k1), double(k2), double(k3)};
                const Complex I(0.0, 1.0);
                std::array<Complex, 3> psi = {I * (k[1] * a[2] - k[2] * a[1]) / (kk * kk),
                                              I * (k[2] * a[0] - k[0] * a[2]) / (kk * kk),
                                              I * (k[0] * a[1] - k[1] * a[0]) / (kk * kk)};
                half.push_back({{k1, k2, k3}, psi});
            }
    // H^{1/2} norm on the 2*pi box: (2*pi)^3 sum_k |k| |u_k|^2, |u_k| = |k| |psi_k| for psi transverse to k.
    double s = 0.0;
    for (const auto& m : half) {
        const double k2 = double(m.k[0] * m.k[0] + m.k[1] * m.k[1] + m.k[2] * m.k[2]);
        double p2 = 0.0;
        for (const auto& z : m.c) p2 += std::norm(z);
        s += 2.0 * std::sqrt(k2) * k2 * p2;
    }
    const double norm = std::sqrt(s * std::pow(2.0 * std::numbers::pi, 3));
    const double scale = norm > 0.0 ? d.target_hhalf / norm : 0.0;
    std::vector<PotentialMode> all;
    all.reserve(2 * half.size());
    for (auto m : half) {
        for (auto& z : m.c) z *= scale;
        all.push_back(m);
        PotentialMode c = m;
        c.k = {-m.k[0], -m.k[1], -m.k[2]};
        for (auto& z : c.c) z = std::conj(z);
        all.push_back(c);
    }
    return all;
}

} // namespace detail

/// True for the 2*pi-periodic kinds (Taylor-Green, band-limited random).
inline bool is_periodic(const AnalyticDatum& d) { return !std::holds_alternative<LocalizedVortex>(d); }

/// Potential modes of a periodic datum (empty for localized data).
inline std::vector<PotentialMode> potential_modes(const AnalyticDatum& d) {
    if (const auto* tg = std::get_if<TaylorGreen>(&d)) return detail::taylor_green_modes(*tg);
    if (const auto* r = std::get_if<BandLimitedRandom>(&d)) return detail::random_modes(*r);
    return {};
}

/// Width (e-folding radius of the potential) of a localized datum; 0 for periodic data.
inline double support_radius(const AnalyticDatum& d) {
    if (const auto* v = std::get_if<LocalizedVortex>(&d)) return v->width;
    return 0.0;
}

/// Largest integer wavenumber component of a periodic datum.
inline int max_mode_component(const AnalyticDatum& d) {
    int m = 0;
    for (const auto& pm : potential_modes(d))
        for (int a = 0; a < 3; ++a) m = std::max(m, std::abs(pm.k[a]));
    return m;
}

/// Vector potential at a point of R^3 (localized data are centered at the origin).
inline std::array<double, 3> potential(const AnalyticDatum& d, const Point& x) {
    std::array<double, 3> out{};
    if (const auto* v = std::get_if<LocalizedVortex>(&d)) {
        const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        out[v->axis] = v->amplitude * std::exp(-r2 / (v->width * v->width));
        return out;
    }
    for (const auto& m : potential_modes(d)) {
        const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
        const Complex e(std::cos(ph), std::sin(ph));
        for (int a = 0; a < 3; ++a) out[a] += (m.c[a] * e).real();
    }
    return out;
}

/// Velocity curl(psi) at a point.
inline std::array<double, 3> velocity(const AnalyticDatum& d, const Point& x) {
    std::array<double, 3> out{};
    if (const auto* v = std::get_if<LocalizedVortex>(&d)) {
        // curl(f e) = grad f x e with grad f = -2 f x / w^2.
        const double w = v->width;
        const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        const double f = -2.0 * v->amplitude * std::exp(-r2 / (w * w)) / (w * w);
        const double gx[3] = {f * x[0], f * x[1], f * x[2]};
        double e[3] = {0.0, 0.0, 0.0};
        e[v->axis] = 1.0;
        out = {gx[1] * e[2] - gx[2] * e[1], gx[2] * e[0] - gx[0] * e[2], gx[0] * e[1] - gx[1] * e[0]};
        return out;
    }
    const Complex I(0.0, 1.0);
    for (const auto& m : potential_modes(d)) {
        const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
        const Complex e(std::cos(ph), std::sin(ph));
        const double k[3] = {double(m.k[0]), double(m.k[1]), double(m.k[2])};
        const Complex u[3] = {I * (k[1] * m.c[2] - k[2] * m.c[1]), I * (k[2] * m.c[0] - k[0] * m.c[2]),
                              I * (k[0] * m.c[1] - k[1] * m.c[0])};
        for (int a = 0; a < 3; ++a) out[a] += (u[a] * e).real();
    }
    return out;
}

} // namespace critns
