#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace critns;
using namespace critns::testing;

namespace {

constexpr double pi = std::numbers::pi;

/// |u_0|_2^2 for Taylor-Green on [0, 2 pi)^3; every mode has |k|^2 = 2.
constexpr double tg_l2_sq = 4.0 * pi * pi * pi;

Trajectory heat_flow(const SpectralField& u0, const std::vector<double>& times) {
    Trajectory tr(u0.grid());
    for (double t : times) tr.push(t, heat_semigroup(u0, t));
    return tr;
}

std::vector<double> geometric_times(double t_min, double T, int n) {
    std::vector<double> t{0.0};
    for (int j = 0; j < n; ++j) t.push_back(t_min * std::pow(T / t_min, j / double(n - 1)));
    return t;
}

/// 2D trigonometric oracle for the Taylor-Green local smallness on B_1(c) x (0, 1): the integrand does not depend on
/// x3, so the ball integral is a disk integral weighted by the chord 2 sqrt(1 - rho^2), with rho = sin(beta).
double tg_smallness_oracle(const Point& c) {
    auto f = [](double x, double y) {
        const double a = std::sin(x) * std::cos(y);
        const double b = -std::cos(x) * std::sin(y);
        const double m2 = a * a + b * b;
        const double p = std::abs((std::cos(2 * x) + std::cos(2 * y)) / 4.0);
        return m2 * std::sqrt(m2) + p * std::sqrt(p);
    };
    const auto bq = gauss_legendre_on(200, 0.0, pi / 2);
    const int na = 256;
    double s = 0.0;
    for (std::size_t i = 0; i < bq.x.size(); ++i) {
        const double be = bq.x[i];
        const double rho = std::sin(be);
        for (int k = 0; k < na; ++k) {
            const double al = 2 * pi * k / na;
            s += bq.w[i] * (2 * pi / na) * 2 * std::sin(be) * std::cos(be) * std::cos(be) *
                 f(c[0] + rho * std::cos(al), c[1] + rho * std::sin(al));
        }
    }
    // |u|^3 and |p|^{3/2} both decay like e^{-6t}.
    return s * (1 - std::exp(-6.0)) / 6;
}

} // namespace

TEST(Record, ZeroField) {
    const auto r = record(SpectralField(GridSpec(8, two_pi)), 0.0);
    for (double v : norm_record_values(r)) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(norm_record_fields().size(), norm_record_values(r).size());
}

TEST(Record, TaylorGreenAnalytic) {
    const GridSpec g(32, two_pi);
    const auto tr = analytic_taylor_green(g, 1.0 / 256.0, 0.5);
    for (std::size_t j = 0; j < tr.size(); j += 32) {
        const auto& r = tr.records()[j];
        const double e = std::exp(-2.0 * r.t);
        EXPECT_LE(rel_diff(r.l2, e * std::sqrt(tg_l2_sq)), 1e-12);
        EXPECT_LE(rel_diff(r.hdot_half, e * std::sqrt(std::sqrt(2.0) * tg_l2_sq)), 1e-12);
        EXPECT_LE(rel_diff(r.hdot_one, e * std::sqrt(2.0 * tg_l2_sq)), 1e-12);
        EXPECT_LE(rel_diff(r.hdot_threehalf, e * std::sqrt(std::pow(2.0, 1.5) * tg_l2_sq)), 1e-12);
        EXPECT_NEAR(r.linf, e, 1e-12);
        EXPECT_NEAR(r.sqrt_t_linf, std::sqrt(r.t) * e, 1e-12);
        // Time integrals by the trapezoid rule at dt = 1/256.
        const double grad = std::pow(2.0, 1.5) * tg_l2_sq * (1.0 - std::exp(-4.0 * r.t)) / 4.0;
        EXPECT_NEAR(r.cum_grad_hhalf_sq, grad, 1e-4 * grad + 1e-300);
        const double f4 = 4.0 * tg_l2_sq * tg_l2_sq * (1.0 - std::exp(-8.0 * r.t)) / 8.0;
        EXPECT_NEAR(r.cum_f4_pow4, f4, 1e-4 * f4 + 1e-300);
    }
}

TEST(Record, CumulativeMonotone) {
    const GridSpec g(16, two_pi);
    SolverConfig cfg;
    cfg.dt = 1.0 / 16.0;
    const auto tr = solve(random_solenoidal(g, 7, 0.5), 1.0, cfg);
    const auto& R = tr.records();
    for (std::size_t j = 1; j < R.size(); ++j) {
        EXPECT_GE(R[j].cum_l5_pow5, R[j - 1].cum_l5_pow5);
        EXPECT_GE(R[j].cum_f4_pow4, R[j - 1].cum_f4_pow4);
        EXPECT_GE(R[j].cum_grad_hhalf_sq, R[j - 1].cum_grad_hhalf_sq);
        EXPECT_GE(R[j].cum_grad_l2_sq, R[j - 1].cum_grad_l2_sq);
        for (double v : norm_record_values(R[j])) EXPECT_GE(v, 0.0);
    }
}

TEST(SpaceTimeNorms, ZeroAndCoverage) {
    const GridSpec g(8, two_pi);
    Trajectory tr(g);
    for (int j = 0; j <= 4; ++j) tr.push(0.25 * j, SpectralField(g));
    EXPECT_EQ(e_norm(tr, 1.0), 0.0);
    EXPECT_EQ(f_norm(tr, 1.0), 0.0);
    EXPECT_EQ(l5_spacetime(tr, 1.0), 0.0);
    EXPECT_EQ(weighted_sup(tr, 1.0).sup, 0.0);
    EXPECT_THROW(e_norm(tr, 1.5), CoverageError);
    EXPECT_THROW(f_norm(tr, 2.0), CoverageError);
    EXPECT_THROW(l5_spacetime(Trajectory(g), 0.5), CoverageError);
}

TEST(SpaceTimeNorms, TaylorGreenClosedForms) {
    // The records integrate in time by the trapezoid rule, which sums exactly for an exponential.
    const double h = 1.0 / 256.0;
    auto trap_exp = [h](double a, double T) {
        return h * (1.0 + std::exp(-a * h)) / (2.0 * (1.0 - std::exp(-a * h))) * (1.0 - std::exp(-a * T));
    };
    const auto tr = analytic_taylor_green(GridSpec(16, two_pi), h, 1.0);
    for (double T : {0.25, 0.5, 1.0}) {
        const double e2 = std::sqrt(2.0) * tg_l2_sq + std::pow(2.0, 1.5) * tg_l2_sq * trap_exp(4.0, T);
        EXPECT_LE(rel_diff(e_norm(tr, T), std::sqrt(e2)), 1e-12);
        const double f4 = 4.0 * tg_l2_sq * tg_l2_sq * trap_exp(8.0, T);
        EXPECT_LE(rel_diff(f_norm(tr, T), std::pow(f4, 0.25)), 1e-12);
        // and the continuous closed forms within the trapezoid error
        const double f4_exact = 4.0 * tg_l2_sq * tg_l2_sq * (1.0 - std::exp(-8.0 * T)) / 8.0;
        EXPECT_LE(rel_diff(f_norm(tr, T), std::pow(f4_exact, 0.25)), 64.0 * h * h / 12.0);
    }
    double prev = 0.0;
    for (double T = 0.0; T <= 1.0; T += 0.1) {
        const double e = e_norm(tr, T);
        EXPECT_GE(e, prev);
        prev = e;
    }
}

TEST(SpaceTimeNorms, RecordInterpolationInequalities) {
    const GridSpec g(16, two_pi);
    SolverConfig cfg;
    cfg.dt = 1.0 / 16.0;
    std::vector<double> l5_consts;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto tr = solve(random_solenoidal(g, seed, 0.5), 1.0, cfg);
        for (double T : {0.25, 1.0}) {
            const auto [sup, l2h32] = e_norm_parts(tr, T);
            EXPECT_LE(f_norm(tr, T), std::sqrt(sup * l2h32) * (1.0 + 1e-10));
            l5_consts.push_back(l5_spacetime(tr, T) / (std::pow(sup, 0.6) * std::pow(l2h32, 0.4)));
        }
    }
    const auto [lo, hi] = std::minmax_element(l5_consts.begin(), l5_consts.end());
    EXPECT_GT(*lo, 0.0);
    EXPECT_LE(*hi / *lo, 3.0);
}

TEST(SpaceTimeNorms, HeatFlowRatiosBounded) {
    const auto times = geometric_times(1e-4, 1.0, 24);
    double l5_worst = 0.0;
    double ws_worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto u0 = random_solenoidal(GridSpec(16, two_pi), seed, 1.0, 4.0);
        const auto tr = heat_flow(u0, times);
        const double u3 = lebesgue_norm(u0, 3.0);
        l5_worst = std::max(l5_worst, l5_spacetime(tr, 1.0) / u3);
        const auto w = weighted_sup(tr, 1.0);
        ws_worst = std::max(ws_worst, w.sup / u3);
        // Bounded data: sqrt(t)|e^{t Lap} u0|_inf <= sqrt(T/100) |u0|_inf on the tail window.
        EXPECT_LE(w.tail, 0.1 * lebesgue_norm(u0, std::numeric_limits<double>::infinity()) * (1.0 + 1e-12));
        EXPECT_LT(w.tail, w.sup);
    }
    RecordProperty("l5_over_l3", std::to_string(l5_worst));
    RecordProperty("weighted_sup_over_l3", std::to_string(ws_worst));
    EXPECT_LT(l5_worst, 10.0);
    EXPECT_LT(ws_worst, 10.0);
}

TEST(EnergyAudit, ZeroTaylorGreenAndSmallData) {
    const GridSpec g(16, two_pi);
    Trajectory zero(g);
    zero.push(0.0, SpectralField(g));
    zero.push(0.5, SpectralField(g));
    EXPECT_EQ(energy_audit(zero), 0.0);
    SolverConfig cfg;
    cfg.dt = 1.0 / 32.0;
    const auto tg = solve(taylor_green(g), 1.0, cfg);
    EXPECT_LE(energy_audit(tg), 10.0 * energy_quadrature_bound(tg));
    const auto [def, bound] = energy_equality_defect(tg);
    EXPECT_LE(def, 10.0 * bound);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto tr = solve(random_solenoidal(g, seed, 0.1, 3.0), 2.0, cfg);
        EXPECT_LE(energy_audit(tr), 10.0 * energy_quadrature_bound(tr));
        const auto [d, b] = energy_equality_defect(tr);
        EXPECT_LE(d, 10.0 * b);
    }
}

TEST(DecayAudit, TaylorGreenAndZero) {
    const auto tr = analytic_taylor_green(GridSpec(16, two_pi), 1.0 / 16.0, 2.0);
    const auto d = decay_audit(tr);
    EXPECT_LE(rel_diff(d.final / d.initial, std::exp(-4.0)), 1e-12);
    EXPECT_DOUBLE_EQ(d.max, d.initial);
    ASSERT_TRUE(d.monotone_after.has_value());
    EXPECT_EQ(*d.monotone_after, 0.0);
    const auto z = decay_audit(Trajectory(GridSpec(8, two_pi)));
    EXPECT_EQ(z.initial, 0.0);
    EXPECT_EQ(z.final, 0.0);
    EXPECT_FALSE(z.monotone_after.has_value());
}

TEST(InterpolateCubic, ExactForCubicsInTime) {
    const GridSpec g(16, two_pi);
    const auto a = random_solenoidal(g, 1);
    const auto b = random_solenoidal(g, 2);
    Trajectory tr(g);
    auto u = [&](double t) { return (1.0 + t * t * t) * a + (t - 2.0 * t * t) * b; };
    for (int j = 0; j <= 6; ++j) tr.push(0.1 * j + 0.01 * j * j, u(0.1 * j + 0.01 * j * j));
    for (double t : {0.03, 0.31, 0.77})
        EXPECT_LE((interpolate_cubic(tr, t) - u(t)).max_abs(), 1e-13 * a.max_abs());
}

TEST(LocalSmallness, ZeroAndDomain) {
    const GridSpec g(16, two_pi);
    Trajectory zero(g);
    for (int j = 0; j <= 4; ++j) zero.push(0.25 * j, SpectralField(g));
    EXPECT_EQ(local_smallness(zero, {1.0, 1.0, 1.0}, 1.0, 1.0), 0.0);
    EXPECT_THROW(local_smallness(zero, {1.0, 1.0, 1.0}, 1.6, 1.0), DomainError);
    EXPECT_THROW(local_smallness(zero, {1.0, 1.0, 1.0}, 1.0, 0.5), CoverageError);
    EXPECT_THROW(local_smallness(zero, {1.0, 1.0, 1.0}, 0.5, 1.5), CoverageError);
}

TEST(LocalSmallness, TaylorGreenTrigonometricOracle) {
    const auto tr = analytic_taylor_green(GridSpec(16, two_pi), 1.0 / 64.0, 1.0);
    const Point centered{pi / 2, pi / 2, pi};
    const double v = local_smallness(tr, centered, 1.0, 1.0);
    EXPECT_NEAR(v, tg_smallness_oracle(centered), 1e-6 * v);
    // Off center the kink of |p|^{3/2} on p = 0 crosses the ball, so the ball rule needs more nodes.
    const Point off{1.0, 2.0, 0.3};
    SmallnessOptions fine;
    fine.radial_nodes *= 4;
    fine.polar_nodes *= 4;
    fine.azimuthal_nodes *= 4;
    const double w = local_smallness(tr, off, 1.0, 1.0, fine);
    EXPECT_NEAR(w, tg_smallness_oracle(off), 1e-6 * w);
}

TEST(LocalSmallness, RawIntegralMonotoneInRadius) {
    const auto tr = analytic_taylor_green(GridSpec(16, two_pi), 1.0 / 32.0, 1.0);
    SmallnessOptions raw;
    raw.normalize = false;
    // Fixed time window: t_end - r^2 must stay inside the data, so the cylinder grows only in space.
    double prev = 0.0;
    for (double r : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double v = local_smallness(tr, {1.0, 2.0, 3.0}, r, 1.0, raw);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(LocalEnergyBalance, TaylorGreenCenteredBump) {
    const GridSpec g(32, two_pi);
    SolverConfig cfg;
    cfg.dt = 1.0 / 64.0;
    const auto tr = solve(taylor_green(g), 1.0, cfg);
    CutoffSpec cut;
    cut.center = {pi / 2, pi / 2, pi};
    cut.half_width = {1.5, 1.5, 1.5};
    cut.rise_start = 0.1;
    cut.rise_end = 0.4;
    const auto a = local_energy_balance(tr, cut, 0.8);
    EXPECT_LE(std::abs(a.defect), 10.0 * a.quadrature_error);
    EXPECT_LT(a.quadrature_error, 1e-4);
    cut.amplitude = 2.0;
    const auto b = local_energy_balance(tr, cut, 0.8);
    EXPECT_NEAR(b.defect, 2.0 * a.defect, 1e-9 * std::abs(a.defect) + 1e-15);
}

TEST(LocalEnergyBalance, ZeroAndSupportViolations) {
    const GridSpec g(16, two_pi);
    Trajectory zero(g);
    for (int j = 0; j <= 8; ++j) zero.push(0.125 * j, SpectralField(g));
    CutoffSpec cut;
    EXPECT_EQ(local_energy_balance(zero, cut, 0.5).defect, 0.0);
    auto bad = cut;
    bad.rise_start = 0.0;
    EXPECT_THROW(local_energy_balance(zero, bad, 0.5), DomainError);
    bad = cut;
    bad.rise_end = bad.rise_start;
    EXPECT_THROW(local_energy_balance(zero, bad, 0.5), DomainError);
    bad = cut;
    bad.half_width[1] = 4.0;
    EXPECT_THROW(local_energy_balance(zero, bad, 0.5), DomainError);
    EXPECT_THROW(local_energy_balance(zero, cut, 1.5), CoverageError);
}
