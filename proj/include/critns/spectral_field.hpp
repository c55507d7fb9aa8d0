#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "critns/diagnostics.hpp"
#include "critns/error.hpp"
#include "critns/fft.hpp"
#include "critns/grid.hpp"

namespace critns {

/// C-component real field stored as Fourier-series coefficients: u(x) = sum_k c_k e^{i k'.x}.
/// Components are stored one after another, each in FFTW index order.
template <int C>
class SpectralArray {
public:
    static constexpr int components = C;

    SpectralArray() : SpectralArray(GridSpec{}) {}
    explicit SpectralArray(const GridSpec& g) : grid_(g), data_(static_cast<std::size_t>(C) * g.points(), Complex{}) {}

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t points() const noexcept { return grid_.points(); }
    std::size_t size() const noexcept { return data_.size(); }

    Complex* data() noexcept { return data_.data(); }
    const Complex* data() const noexcept { return data_.data(); }
    Complex* component(int c) noexcept { return data_.data() + static_cast<std::size_t>(c) * points(); }
    const Complex* component(int c) const noexcept { return data_.data() + static_cast<std::size_t>(c) * points(); }

    /// Coefficient of integer mode (k1, k2, k3), each in [-n/2, n/2).
    Complex& coeff(int c, int k1, int k2, int k3) {
        return component(c)[grid_.flat(grid_.index_of(k1), grid_.index_of(k2), grid_.index_of(k3))];
    }
    Complex coeff(int c, int k1, int k2, int k3) const {
        return component(c)[grid_.flat(grid_.index_of(k1), grid_.index_of(k2), grid_.index_of(k3))];
    }

    SpectralArray& operator+=(const SpectralArray& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    SpectralArray& operator-=(const SpectralArray& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    SpectralArray& operator*=(double a) {
        for (auto& z : data_) z *= a;
        return *this;
    }
    /// this += a * o
    SpectralArray& axpy(double a, const SpectralArray& o) {
        require_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
        return *this;
    }

    friend SpectralArray operator+(SpectralArray a, const SpectralArray& b) { return a += b; }
    friend SpectralArray operator-(SpectralArray a, const SpectralArray& b) { return a -= b; }
    friend SpectralArray operator*(double s, SpectralArray a) { return a *= s; }
    friend SpectralArray operator*(SpectralArray a, double s) { return a *= s; }
    friend SpectralArray operator-(SpectralArray a) { return a *= -1.0; }

    bool is_zero() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](const Complex& z) { return z == Complex{}; });
    }
    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(),
                           [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
    }
    double max_abs() const noexcept {
        double m = 0.0;
        for (const auto& z : data_) m = std::max(m, std::norm(z));
        return std::sqrt(m);
    }

    void require_same(const SpectralArray& o) const {
        if (!(grid_ == o.grid_)) throw MalformedField("spectral fields live on different grids");
    }

private:
    GridSpec grid_;
    AlignedVector<Complex> data_;
};

using SpectralField = SpectralArray<3>;
using SpectralScalar = SpectralArray<1>;
/// Row-major 3x3 tensor: component 3*i + j holds G_ij.
using SpectralTensor = SpectralArray<9>;

/// C-component real field sampled on the n^3 grid, component-major, (i,j,l) row-major within a component.
template <int C>
class PhysicalArray {
public:
    static constexpr int components = C;

    PhysicalArray() : PhysicalArray(GridSpec{}) {}
    explicit PhysicalArray(const GridSpec& g) : grid_(g), values_(static_cast<std::size_t>(C) * g.points(), 0.0) {}

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t points() const noexcept { return grid_.points(); }
    double* component(int c) noexcept { return values_.data() + static_cast<std::size_t>(c) * points(); }
    const double* component(int c) const noexcept { return values_.data() + static_cast<std::size_t>(c) * points(); }
    double& at(int c, int i, int j, int l) { return component(c)[grid_.flat(i, j, l)]; }
    double at(int c, int i, int j, int l) const { return component(c)[grid_.flat(i, j, l)]; }
    AlignedVector<double>& values() noexcept { return values_; }
    const AlignedVector<double>& values() const noexcept { return values_; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    GridSpec grid_;
    AlignedVector<double> values_;
};

using PhysicalField = PhysicalArray<3>;
using PhysicalScalar = PhysicalArray<1>;

namespace detail {

/// Index of -k along one axis.
inline int neg_index(int i, int n) noexcept { return i == 0 ? 0 : n - i; }

/// Max |c(k) - conj c(-k)| over one component buffer.
inline double hermitian_gap(const Complex* c, const GridSpec& g) {
    const int n = g.n_modes();
    double gap2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int ni = neg_index(i, n);
        for (int j = 0; j < n; ++j) {
            const Complex* row = c + g.flat(i, j, 0);
            const Complex* nrow = c + g.flat(ni, neg_index(j, n), 0);
            gap2 = std::max(gap2, std::norm(row[0] - std::conj(nrow[0])));
            for (int l = 1; l < n; ++l) gap2 = std::max(gap2, std::norm(row[l] - std::conj(nrow[n - l])));
        }
    }
    return std::sqrt(gap2);
}

/// Scratch buffer reused by the transforms of one thread.
inline AlignedVector<Complex>& transform_workspace() {
    thread_local AlignedVector<Complex> work;
    return work;
}

/// Backward transform of two Hermitian components at once: one complex FFT of a + i b.
inline void backward_pair(const Complex* a, const Complex* b, double* out_a, double* out_b, const GridSpec& g,
                          AlignedVector<Complex>& work) {
    const std::size_t N = g.points();
    if (work.size() != N) work.resize(N);
    if (b) {
        for (std::size_t q = 0; q < N; ++q) {
            work[q] = Complex(a[q].real() - b[q].imag(), a[q].imag() + b[q].real());
        }
    } else {
        std::copy(a, a + N, work.begin());
    }
    fft3d_inplace(work.data(), g.n_modes(), FFTW_BACKWARD);
    if (out_b) {
        for (std::size_t q = 0; q < N; ++q) {
            out_a[q] = work[q].real();
            out_b[q] = work[q].imag();
        }
    } else {
        for (std::size_t q = 0; q < N; ++q) out_a[q] = work[q].real();
    }
}

/// Forward transform of two real components at once, split back by Hermitian symmetry.
inline void forward_pair(const double* a, const double* b, Complex* out_a, Complex* out_b, const GridSpec& g,
                         AlignedVector<Complex>& work) {
    const std::size_t N = g.points();
    const int n = g.n_modes();
    if (work.size() != N) work.resize(N);
    if (b) {
        for (std::size_t q = 0; q < N; ++q) work[q] = Complex(a[q], b[q]);
    } else {
        for (std::size_t q = 0; q < N; ++q) work[q] = Complex(a[q], 0.0);
    }
    fft3d_inplace(work.data(), n, FFTW_FORWARD);
    const double inv = 1.0 / static_cast<double>(N);
    if (!b) {
        for (std::size_t q = 0; q < N; ++q) out_a[q] = work[q] * inv;
        return;
    }
    const double h = 0.5 * inv;
    for (int i = 0; i < n; ++i) {
        const int ni = neg_index(i, n);
        for (int j = 0; j < n; ++j) {
            const std::size_t row = g.flat(i, j, 0);
            const Complex* z = work.data() + row;
            const Complex* nz = work.data() + g.flat(ni, neg_index(j, n), 0);
            for (int l = 0; l < n; ++l) {
                const Complex zk = z[l];
                const Complex zm = nz[l == 0 ? 0 : n - l];
                // a = (Z(k) + conj Z(-k)) / 2, b = (Z(k) - conj Z(-k)) / (2i)
                out_a[row + l] = Complex(h * (zk.real() + zm.real()), h * (zk.imag() - zm.imag()));
                out_b[row + l] = Complex(h * (zk.imag() + zm.imag()), h * (zm.real() - zk.real()));
            }
        }
    }
}

template <int C>
PhysicalArray<C> to_physical_unchecked(const SpectralArray<C>& f) {
    PhysicalArray<C> out(f.grid());
    auto& work = transform_workspace();
    for (int c = 0; c < C; c += 2) {
        const bool pair = c + 1 < C;
        backward_pair(f.component(c), pair ? f.component(c + 1) : nullptr, out.component(c),
                      pair ? out.component(c + 1) : nullptr, f.grid(), work);
    }
    return out;
}

} // namespace detail

/// Largest Hermitian-symmetry violation relative to the largest coefficient (0 for the zero field).
template <int C>
double hermitian_defect(const SpectralArray<C>& f) {
    const double scale = f.max_abs();
    if (scale == 0.0) return 0.0;
    double gap = 0.0;
    for (int c = 0; c < C; ++c) gap = std::max(gap, detail::hermitian_gap(f.component(c), f.grid()));
    return gap / scale;
}

/// Inverse transform to grid values. Throws MalformedField if the field is not real to 1e-12.
template <int C>
PhysicalArray<C> to_physical(const SpectralArray<C>& f) {
    const double defect = hermitian_defect(f);
    if (defect > 1e-12) {
        throw MalformedField("to_physical: Hermitian symmetry violated (relative defect " + std::to_string(defect) + ")");
    }
    return detail::to_physical_unchecked(f);
}

/// Forward transform. The zero mode is removed; its value (the grid mean) is written to *mean if given.
template <int C>
SpectralArray<C> to_spectral(const PhysicalArray<C>& f, std::array<double, static_cast<std::size_t>(C)>* mean = nullptr) {
    SpectralArray<C> out(f.grid());
    auto& work = detail::transform_workspace();
    for (int c = 0; c < C; c += 2) {
        const bool pair = c + 1 < C;
        detail::forward_pair(f.component(c), pair ? f.component(c + 1) : nullptr, out.component(c),
                             pair ? out.component(c + 1) : nullptr, f.grid(), work);
    }
    for (int c = 0; c < C; ++c) {
        if (mean) (*mean)[c] = out.component(c)[0].real();
        out.component(c)[0] = Complex{};
    }
    return out;
}

/// Zero every mode with some |k_i| beyond the dealias cutoff.
template <int C>
void dealias_inplace(SpectralArray<C>& f) {
    const auto& g = f.grid();
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    const std::size_t n2 = static_cast<std::size_t>(n) * n;
    for (int c = 0; c < C; ++c) {
        Complex* d = f.component(c);
        for (int i = 0; i < n; ++i) {
            Complex* plane = d + g.flat(i, 0, 0);
            if (!tab->keep[i]) {
                std::fill(plane, plane + n2, Complex{});
                continue;
            }
            for (int j = 0; j < n; ++j) {
                Complex* row = plane + static_cast<std::size_t>(j) * n;
                if (!tab->keep[j]) {
                    std::fill(row, row + n, Complex{});
                    continue;
                }
                for (int l = 0; l < n; ++l)
                    if (!tab->keep[l]) row[l] = Complex{};
            }
        }
    }
}

template <int C>
SpectralArray<C> dealiased(SpectralArray<C> f) {
    dealias_inplace(f);
    return f;
}

/// Applies a radial multiplier m(|k'|^2) to every mode; m is evaluated once per integer shell.
template <int C, class F>
void apply_shell_multiplier(SpectralArray<C>& f, F&& m) {
    const auto& g = f.grid();
    const auto tab = mode_table(g);
    const double unit2 = g.wavenumber_unit() * g.wavenumber_unit();
    std::vector<double> w(static_cast<std::size_t>(tab->max_shell) + 1);
    for (std::size_t s = 0; s < w.size(); ++s) w[s] = m(unit2 * static_cast<double>(s));
    for (int c = 0; c < C; ++c) {
        Complex* d = f.component(c);
        for (std::size_t q = 0; q < g.points(); ++q) d[q] *= w[tab->shell[q]];
    }
}

inline void check_sobolev_order(double s) {
    if (!(s >= -2.0 && s <= 3.0)) throw DomainError("Sobolev order must lie in [-2, 3], got " + std::to_string(s));
}

/// Homogeneous Sobolev norm: (L^3 sum_{k != 0} |k'|^{2s} |c_k|^2)^{1/2}.
template <int C>
double sobolev_norm(const SpectralArray<C>& f, double s) {
    check_sobolev_order(s);
    const auto& g = f.grid();
    const auto tab = mode_table(g);
    const double unit2 = g.wavenumber_unit() * g.wavenumber_unit();
    std::vector<double> w(static_cast<std::size_t>(tab->max_shell) + 1, 0.0);
    for (std::size_t m = 1; m < w.size(); ++m) w[m] = std::pow(unit2 * static_cast<double>(m), s);
    double acc = 0.0;
    for (int c = 0; c < C; ++c) {
        const Complex* d = f.component(c);
        for (std::size_t q = 0; q < g.points(); ++q) acc += w[tab->shell[q]] * std::norm(d[q]);
    }
    return std::sqrt(acc * g.volume());
}

/// Real Ḣ^s inner product: L^3 sum_{k != 0} |k'|^{2s} Re(conj(f_k) g_k).
template <int C>
double sobolev_inner(const SpectralArray<C>& f, const SpectralArray<C>& h, double s) {
    check_sobolev_order(s);
    f.require_same(h);
    const auto& g = f.grid();
    const auto tab = mode_table(g);
    const double unit2 = g.wavenumber_unit() * g.wavenumber_unit();
    std::vector<double> w(static_cast<std::size_t>(tab->max_shell) + 1, 0.0);
    for (std::size_t m = 1; m < w.size(); ++m) w[m] = std::pow(unit2 * static_cast<double>(m), s);
    double acc = 0.0;
    for (int c = 0; c < C; ++c) {
        const Complex* a = f.component(c);
        const Complex* b = h.component(c);
        for (std::size_t q = 0; q < g.points(); ++q) acc += w[tab->shell[q]] * (std::conj(a[q]) * b[q]).real();
    }
    return acc * g.volume();
}

/// Multiplies every mode by |k'|^s; the zero mode stays zero.
template <int C>
SpectralArray<C> fractional_laplacian(SpectralArray<C> f, double s) {
    check_sobolev_order(s);
    apply_shell_multiplier(f, [s](double k2) { return k2 == 0.0 ? 0.0 : std::pow(k2, 0.5 * s); });
    return f;
}

/// L^p norm of grid values (Euclidean magnitude across components), equal-weight quadrature.
template <int C>
double lebesgue_norm(const PhysicalArray<C>& f, double p) {
    if (!(p >= 1.0)) throw DomainError("lebesgue_norm: p must be >= 1");
    const auto& g = f.grid();
    const std::size_t N = g.points();
    const bool inf = std::isinf(p);
    double acc = 0.0;
    for (std::size_t q = 0; q < N; ++q) {
        double m2 = 0.0;
        for (int c = 0; c < C; ++c) m2 += f.component(c)[q] * f.component(c)[q];
        if (inf) {
            acc = std::max(acc, m2);
        } else if (p == 2.0) {
            acc += m2;
        } else {
            acc += std::pow(m2, 0.5 * p);
        }
    }
    if (inf) return std::sqrt(acc);
    return std::pow(acc * g.cell_volume(), 1.0 / p);
}

template <int C>
double lebesgue_norm(const SpectralArray<C>& f, double p) {
    return lebesgue_norm(to_physical(f), p);
}

/// Grid-sum L^2 inner product.
template <int C>
double l2_inner(const SpectralArray<C>& f, const SpectralArray<C>& h) {
    return sobolev_inner(f, h, 0.0);
}

/// max_k |k'.u_k| / max_k |k'||u_k|, using derivative wavenumbers (Nyquist -> 0). 0 for the zero field.
inline double divergence_defect(const SpectralField& f) {
    const auto& g = f.grid();
    const auto tab = mode_table(g);
    const int n = g.n_modes();
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const std::size_t q = g.flat(i, j, l);
                const double k[3] = {tab->kd[i], tab->kd[j], tab->kd[l]};
                const Complex u[3] = {f.component(0)[q], f.component(1)[q], f.component(2)[q]};
                const Complex dot = k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
                const double kn = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                const double un = std::sqrt(std::norm(u[0]) + std::norm(u[1]) + std::norm(u[2]));
                num = std::max(num, std::abs(dot));
                den = std::max(den, kn * un);
            }
    return den == 0.0 ? 0.0 : num / den;
}

/// Spectral zero-padding / truncation onto a grid with the same box and a different n.
/// Truncation drops modes that do not exist on the target; Nyquist planes are dropped on the way.
template <int C>
SpectralArray<C> resample(const SpectralArray<C>& f, const GridSpec& target) {
    if (target.box_length() != f.grid().box_length()) throw DomainError("resample: box lengths differ");
    SpectralArray<C> out(target);
    const auto& g = f.grid();
    const int lim = std::min(g.n_modes(), target.n_modes()) / 2 - 1;
    for (int c = 0; c < C; ++c)
        for (int a = -lim; a <= lim; ++a)
            for (int b = -lim; b <= lim; ++b)
                for (int e = -lim; e <= lim; ++e) out.coeff(c, a, b, e) = f.coeff(c, a, b, e);
    return out;
}

/// Evaluates a spectral field at arbitrary points by a direct sum over its non-negligible modes.
template <int C>
class PointEvaluator {
public:
    /// Modes with |c| <= rel_cutoff * max|c| (over all components) are dropped.
    explicit PointEvaluator(const SpectralArray<C>& f, double rel_cutoff = 1e-15) {
        const auto& g = f.grid();
        const auto tab = mode_table(g);
        const double floor = rel_cutoff * f.max_abs();
        const int n = g.n_modes();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    const std::size_t q = g.flat(i, j, l);
                    bool keep = false;
                    for (int c = 0; c < C; ++c) keep = keep || std::abs(f.component(c)[q]) > floor;
                    if (!keep) continue;
                    Mode m;
                    m.k = {tab->k[i], tab->k[j], tab->k[l]};
                    for (int c = 0; c < C; ++c) m.c[c] = f.component(c)[q];
                    modes_.push_back(m);
                }
    }

    std::array<double, C> operator()(const Point& x) const {
        std::array<double, C> out{};
        for (const auto& m : modes_) {
            const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
            const double cs = std::cos(ph);
            const double sn = std::sin(ph);
            for (int c = 0; c < C; ++c) out[c] += m.c[c].real() * cs - m.c[c].imag() * sn;
        }
        return out;
    }

    std::size_t mode_count() const noexcept { return modes_.size(); }

private:
    struct Mode {
        std::array<double, 3> k;
        std::array<Complex, C> c;
    };
    std::vector<Mode> modes_;
};

/// Heat flow multiplier e^{-|k'|^2 t} (t >= 0).
template <int C>
SpectralArray<C> heat_semigroup(SpectralArray<C> f, double t) {
    if (!(t >= 0.0)) throw DomainError("heat_semigroup: t must be >= 0");
    if (t == 0.0) return f;
    apply_shell_multiplier(f, [t](double k2) { return std::exp(-k2 * t); });
    return f;
}

/// bmo^{-1}-type norm: max over probes (x0, t) of t^{-3/2} int_0^t int_{B(x0, sqrt t)} |e^{s Lap} f|^2 dx ds.
/// Time integral by composite midpoint with `time_nodes` (>= 16) nodes; ball by grid mask.
/// Probes with sqrt(t) > L/2 or t outside (0, T] are rejected with a diagnostic.
inline double bmo_minus1_norm(const SpectralField& f, double T, const std::vector<Point>& probe_centers,
                              const std::vector<double>& probe_times, int time_nodes = 16) {
    if (!(T > 0.0)) throw DomainError("bmo_minus1_norm: T must be positive");
    if (probe_centers.empty() || probe_times.empty()) throw DomainError("bmo_minus1_norm: empty probe set");
    time_nodes = std::max(time_nodes, 16);
    const auto& g = f.grid();
    const int n = g.n_modes();
    const double L = g.box_length();
    const double h = g.spacing();
    double best = 0.0;
    bool any = false;
    for (double t : probe_times) {
        if (!(t > 0.0 && t <= T)) {
            emit_diagnostic("bmo_probe_rejected", "probe time " + std::to_string(t) + " outside (0, T]");
            continue;
        }
        const double r = std::sqrt(t);
        if (r > 0.5 * L) {
            emit_diagnostic("bmo_probe_rejected",
                            "probe radius sqrt(t) = " + std::to_string(r) + " exceeds L/2; ball wraps the torus");
            continue;
        }
        // Time-integrated density D(x) = sum_q ds |e^{s_q Lap} f|^2.
        std::vector<double> density(g.points(), 0.0);
        const double ds = t / time_nodes;
        for (int q = 0; q < time_nodes; ++q) {
            const auto phys = detail::to_physical_unchecked(heat_semigroup(f, (q + 0.5) * ds));
            for (std::size_t p = 0; p < g.points(); ++p) {
                double m2 = 0.0;
                for (int c = 0; c < 3; ++c) m2 += phys.component(c)[p] * phys.component(c)[p];
                density[p] += ds * m2;
            }
        }
        for (const auto& x0 : probe_centers) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dx = periodic_delta(g.coordinate(i) - x0[0], L);
                if (std::abs(dx) > r) continue;
                for (int j = 0; j < n; ++j) {
                    const double dy = periodic_delta(g.coordinate(j) - x0[1], L);
                    if (dx * dx + dy * dy > r * r) continue;
                    for (int l = 0; l < n; ++l) {
                        const double dz = periodic_delta(g.coordinate(l) - x0[2], L);
                        if (dx * dx + dy * dy + dz * dz <= r * r) acc += density[g.flat(i, j, l)];
                    }
                }
            }
            any = true;
            best = std::max(best, acc * h * h * h * std::pow(t, -1.5));
        }
    }
    if (!any) throw DomainError("bmo_minus1_norm: every probe was rejected");
    return best;
}

} // namespace critns
