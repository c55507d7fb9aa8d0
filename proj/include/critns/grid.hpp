#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "critns/error.hpp"

namespace critns {

using Point = std::array<double, 3>;

/// Cubic periodic box [0, L)^3 sampled by n^3 points; wavevectors (2*pi/L) k with k_i in [-n/2, n/2).
class GridSpec {
public:
    GridSpec() : GridSpec(32, 2.0 * std::numbers::pi) {}

    GridSpec(int n_modes, double box_length, double dealias_fraction = 2.0 / 3.0)
        : n_(n_modes), length_(box_length), dealias_(dealias_fraction) {
        if (n_ < 8 || n_ % 2 != 0) {
            throw DomainError("GridSpec: n_modes must be even and >= 8, got " + std::to_string(n_));
        }
        if (!(length_ > 0.0) || !std::isfinite(length_)) {
            throw DomainError("GridSpec: box_length must be positive");
        }
        if (!(dealias_ > 0.0 && dealias_ <= 1.0)) {
            throw DomainError("GridSpec: dealias_fraction must lie in (0, 1]");
        }
    }

    int n_modes() const noexcept { return n_; }
    double box_length() const noexcept { return length_; }
    double dealias_fraction() const noexcept { return dealias_; }

    std::size_t points() const noexcept {
        return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    }
    double spacing() const noexcept { return length_ / n_; }
    double cell_volume() const noexcept { return std::pow(spacing(), 3); }
    double volume() const noexcept { return length_ * length_ * length_; }
    double wavenumber_unit() const noexcept { return 2.0 * std::numbers::pi / length_; }

    /// Integer mode carried by storage index i along one axis.
    int mode_of(int index) const noexcept { return index < n_ / 2 ? index : index - n_; }
    int index_of(int mode) const noexcept { return ((mode % n_) + n_) % n_; }
    bool is_nyquist(int index) const noexcept { return index == n_ / 2; }

    /// Largest |k_i| kept by the dealiasing filter: |k_i| < dealias_fraction * n / 2.
    int dealias_cutoff() const noexcept {
        const double c = dealias_ * n_ / 2.0;
        int kmax = static_cast<int>(std::ceil(c)) - 1;
        return kmax < 0 ? 0 : kmax;
    }

    std::size_t flat(int i, int j, int l) const noexcept {
        return (static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j)) * n_ + static_cast<std::size_t>(l);
    }

    /// Physical coordinate of grid node index i (same for each axis).
    double coordinate(int index) const noexcept { return index * spacing(); }

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept {
        return a.n_ == b.n_ && a.length_ == b.length_ && a.dealias_ == b.dealias_;
    }

private:
    int n_;
    double length_;
    double dealias_;
};

/// Per-axis wavenumber tables shared by every operator on a grid.
struct ModeTable {
    std::vector<double> k;      ///< physical wavenumber (2*pi/L) * mode, Nyquist kept
    std::vector<double> kd;     ///< derivative wavenumber, Nyquist mapped to 0
    std::vector<int> mode;      ///< integer mode per index
    std::vector<char> keep;     ///< 1 if |mode| passes the dealias filter
    std::vector<int> shell;     ///< |k_int|^2 per flat index, for shell-indexed multiplier tables
    std::vector<std::uint32_t> kept; ///< flat indices of modes passing the dealias filter, ascending
    int max_shell = 0;
};

namespace detail {

inline std::shared_ptr<const ModeTable> build_mode_table(const GridSpec& g) {
    auto t = std::make_shared<ModeTable>();
    const int n = g.n_modes();
    const double unit = g.wavenumber_unit();
    const int cut = g.dealias_cutoff();
    t->k.resize(n);
    t->kd.resize(n);
    t->mode.resize(n);
    t->keep.resize(n);
    for (int i = 0; i < n; ++i) {
        const int m = g.mode_of(i);
        t->mode[i] = m;
        t->k[i] = unit * m;
        t->kd[i] = g.is_nyquist(i) ? 0.0 : unit * m;
        t->keep[i] = std::abs(m) <= cut ? 1 : 0;
    }
    t->shell.resize(g.points());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int l = 0; l < n; ++l) {
                const int s = t->mode[i] * t->mode[i] + t->mode[j] * t->mode[j] + t->mode[l] * t->mode[l];
                t->shell[g.flat(i, j, l)] = s;
                if (s > t->max_shell) t->max_shell = s;
                if (t->keep[i] && t->keep[j] && t->keep[l]) t->kept.push_back(static_cast<std::uint32_t>(g.flat(i, j, l)));
            }
        }
    }
    return t;
}

} // namespace detail

/// Cached mode table for a grid. Thread-safe; tables are immutable once built.
inline std::shared_ptr<const ModeTable> mode_table(const GridSpec& g) {
    static std::mutex m;
    static std::map<std::tuple<int, double, double>, std::shared_ptr<const ModeTable>> cache;
    const auto key = std::make_tuple(g.n_modes(), g.box_length(), g.dealias_fraction());
    std::lock_guard lock(m);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto t = detail::build_mode_table(g);
    cache.emplace(key, t);
    return t;
}

/// Minimum-image displacement of a coordinate difference on a periodic axis of length L.
inline double periodic_delta(double d, double length) noexcept {
    d = std::fmod(d, length);
    if (d >= 0.5 * length) d -= length;
    if (d < -0.5 * length) d += length;
    return d;
}

} // namespace critns
