#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "critns/error.hpp"
#include "critns/spectral_field.hpp"

namespace critns {

/// Instantaneous norms at time t plus running time integrals (trapezoid in t).
struct NormRecord {
    double t = 0.0;
    double l2 = 0.0;
    double hdot_half = 0.0;
    double hdot_one = 0.0;
    double hdot_threehalf = 0.0;
    double l3 = 0.0;
    double l5 = 0.0;
    double linf = 0.0;
    double sqrt_t_linf = 0.0;
    double cum_l5_pow5 = 0.0;       ///< int_0^t |u|_5^5
    double cum_f4_pow4 = 0.0;       ///< int_0^t |u|_{H^1}^4
    double cum_grad_hhalf_sq = 0.0; ///< int_0^t |u|_{H^{3/2}}^2
    double cum_grad_l2_sq = 0.0;    ///< int_0^t |grad u|_2^2
};

/// Names of the NormRecord fields in CSV column order.
inline const std::vector<std::string>& norm_record_fields() {
    static const std::vector<std::string> names = {
        "t", "l2", "hdot_half", "hdot_one", "hdot_threehalf", "l3", "l5", "linf", "sqrt_t_linf",
        "cum_l5_pow5", "cum_f4_pow4", "cum_grad_hhalf_sq", "cum_grad_l2_sq"};
    return names;
}

inline std::vector<double> norm_record_values(const NormRecord& r) {
    return {r.t, r.l2, r.hdot_half, r.hdot_one, r.hdot_threehalf, r.l3, r.l5, r.linf, r.sqrt_t_linf,
            r.cum_l5_pow5, r.cum_f4_pow4, r.cum_grad_hhalf_sq, r.cum_grad_l2_sq};
}

/// Computes the record of u at time t, advancing the cumulative entries from prev.
inline NormRecord record(const SpectralField& u, double t, const NormRecord* prev = nullptr) {
    if (prev && t < prev->t) throw DomainError("record: time runs backwards");
    NormRecord r;
    r.t = t;
    r.l2 = sobolev_norm(u, 0.0);
    r.hdot_half = sobolev_norm(u, 0.5);
    r.hdot_one = sobolev_norm(u, 1.0);
    r.hdot_threehalf = sobolev_norm(u, 1.5);
    const auto phys = to_physical(u);
    const auto& g = u.grid();
    double s3 = 0.0;
    double s5 = 0.0;
    double mx = 0.0;
    for (std::size_t q = 0; q < g.points(); ++q) {
        double m2 = 0.0;
        for (int c = 0; c < 3; ++c) m2 += phys.component(c)[q] * phys.component(c)[q];
        const double m = std::sqrt(m2);
        s3 += m2 * m;
        s5 += m2 * m2 * m;
        mx = std::max(mx, m);
    }
    r.l3 = std::cbrt(s3 * g.cell_volume());
    r.l5 = std::pow(s5 * g.cell_volume(), 0.2);
    r.linf = mx;
    r.sqrt_t_linf = std::sqrt(t) * mx;
    if (prev) {
        const double dt = t - prev->t;
        r.cum_l5_pow5 = prev->cum_l5_pow5 + 0.5 * dt * (std::pow(prev->l5, 5) + std::pow(r.l5, 5));
        r.cum_f4_pow4 = prev->cum_f4_pow4 + 0.5 * dt * (std::pow(prev->hdot_one, 4) + std::pow(r.hdot_one, 4));
        r.cum_grad_hhalf_sq = prev->cum_grad_hhalf_sq +
                              0.5 * dt * (prev->hdot_threehalf * prev->hdot_threehalf + r.hdot_threehalf * r.hdot_threehalf);
        r.cum_grad_l2_sq = prev->cum_grad_l2_sq + 0.5 * dt * (prev->hdot_one * prev->hdot_one + r.hdot_one * r.hdot_one);
    }
    return r;
}

enum class TerminationReason { horizon_reached, blowup_detected, picard_failure };

inline std::string to_string(TerminationReason r) {
    switch (r) {
    case TerminationReason::horizon_reached: return "horizon_reached";
    case TerminationReason::blowup_detected: return "blowup_detected";
    case TerminationReason::picard_failure: return "picard_failure";
    }
    return "unknown";
}

/// Time-ordered snapshots of a solution with one NormRecord per time.
class Trajectory {
public:
    Trajectory() = default;
    explicit Trajectory(const GridSpec& g) : grid_(g) {}

    const GridSpec& grid() const noexcept { return grid_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<SpectralField>& snapshots() const noexcept { return snapshots_; }
    const std::vector<NormRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    double final_time() const { return times_.empty() ? 0.0 : times_.back(); }

    TerminationReason terminated_reason = TerminationReason::horizon_reached;
    /// Last time reached successfully (the reported T* estimate when the run stops early).
    double t_star_estimate = 0.0;
    /// Length of the interval on which Picard iteration failed, if it did.
    std::optional<double> failed_interval;
    /// Picard sweeps used by the interval route (0 for the stepwise route).
    int picard_iterations = 0;

    /// Appends a snapshot; times must increase strictly and the first time must be 0.
    void push(double t, SpectralField u) {
        if (!(grid_ == u.grid())) throw MalformedField("Trajectory::push: grid mismatch");
        if (times_.empty() ? t != 0.0 : !(t > times_.back())) {
            throw DomainError("Trajectory::push: times must start at 0 and increase strictly");
        }
        const NormRecord* prev = records_.empty() ? nullptr : &records_.back();
        records_.push_back(record(u, t, prev));
        times_.push_back(t);
        snapshots_.push_back(std::move(u));
        t_star_estimate = t;
    }

    /// Appends with a caller-supplied record (used when reading persisted trajectories).
    void push_with_record(double t, SpectralField u, const NormRecord& r) {
        if (!(grid_ == u.grid())) throw MalformedField("Trajectory::push: grid mismatch");
        if (times_.empty() ? t != 0.0 : !(t > times_.back())) {
            throw DomainError("Trajectory::push: times must start at 0 and increase strictly");
        }
        records_.push_back(r);
        times_.push_back(t);
        snapshots_.push_back(std::move(u));
        t_star_estimate = t;
    }

    bool covers(double t) const noexcept {
        return !times_.empty() && t >= 0.0 && t <= times_.back() * (1.0 + 1e-14) + 1e-300;
    }

    /// Index j with times[j] <= t <= times[j+1]; requires covers(t) and size() >= 2 unless t == 0.
    std::size_t interval_of(double t) const {
        if (!covers(t)) throw CoverageError("trajectory does not cover t = " + std::to_string(t));
        if (times_.size() == 1) return 0;
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t j = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return std::min(j, times_.size() - 2);
    }

    /// Linear interpolation of the snapshots at time t.
    SpectralField at(double t) const {
        const std::size_t j = interval_of(t);
        if (times_.size() == 1) return snapshots_[0];
        const double tau = std::clamp((t - times_[j]) / (times_[j + 1] - times_[j]), 0.0, 1.0);
        if (tau == 0.0) return snapshots_[j];
        if (tau == 1.0) return snapshots_[j + 1];
        SpectralField out = snapshots_[j];
        out *= 1.0 - tau;
        out.axpy(tau, snapshots_[j + 1]);
        return out;
    }

    /// Index of a time equal to t within rel tolerance, if any.
    std::optional<std::size_t> find_time(double t, double tol = 1e-12) const {
        for (std::size_t j = 0; j < times_.size(); ++j) {
            if (std::abs(times_[j] - t) <= tol * std::max(1.0, std::abs(t))) return j;
        }
        return std::nullopt;
    }

private:
    GridSpec grid_;
    std::vector<double> times_;
    std::vector<SpectralField> snapshots_;
    std::vector<NormRecord> records_;
};

} // namespace critns
