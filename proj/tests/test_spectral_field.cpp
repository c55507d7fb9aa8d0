#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace critns;
using namespace critns::testing;

TEST(GridSpec, RejectsInvalidParameters) {
    EXPECT_THROW(GridSpec(7, 1.0), DomainError);
    EXPECT_THROW(GridSpec(6, 1.0), DomainError);
    EXPECT_THROW(GridSpec(16, 0.0), DomainError);
    EXPECT_THROW(GridSpec(16, -1.0), DomainError);
    EXPECT_THROW(GridSpec(16, 1.0, 0.0), DomainError);
    EXPECT_THROW(GridSpec(16, 1.0, 1.5), DomainError);
    const GridSpec g(16, two_pi);
    EXPECT_EQ(g.points(), 4096u);
    EXPECT_DOUBLE_EQ(g.spacing(), two_pi / 16);
    EXPECT_EQ(g.mode_of(8), -8);
    EXPECT_EQ(g.mode_of(7), 7);
    EXPECT_EQ(g.index_of(-1), 15);
}

TEST(GridSpec, DealiasCutoffIsStrict) {
    EXPECT_EQ(GridSpec(24, 1.0).dealias_cutoff(), 7);
    EXPECT_EQ(GridSpec(32, 1.0).dealias_cutoff(), 10);
    EXPECT_EQ(GridSpec(48, 1.0).dealias_cutoff(), 15);
    EXPECT_EQ(GridSpec(32, 1.0, 1.0).dealias_cutoff(), 15);
}

TEST(Transforms, ZeroFieldMapsToZero) {
    const GridSpec g(8, two_pi);
    const auto p = to_physical(SpectralField(g));
    for (double v : p.values()) EXPECT_EQ(v, 0.0);
}

TEST(Transforms, SingleModeIsCosine) {
    const GridSpec g(16, two_pi);
    SpectralField f(g);
    f.coeff(1, 1, 0, 0) = 0.5;
    f.coeff(1, -1, 0, 0) = 0.5;
    const auto p = to_physical(f);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; j += 5)
            for (int l = 0; l < 16; l += 3) {
                EXPECT_NEAR(p.at(1, i, j, l), std::cos(g.coordinate(i)), 1e-14);
                EXPECT_EQ(p.at(0, i, j, l), 0.0);
            }
}

TEST(Transforms, RoundTripIsIdentity) {
    const GridSpec g(24, 3.0);
    const auto f = random_array(g, 11, 11);
    const auto back = to_spectral(to_physical(f));
    EXPECT_LE((back - f).max_abs(), 1e-12 * f.max_abs());
}

TEST(Transforms, HermitianViolationIsMalformed) {
    const GridSpec g(8, two_pi);
    SpectralField f(g);
    f.coeff(0, 1, 0, 0) = Complex(1.0, 0.0);
    EXPECT_THROW(to_physical(f), MalformedField);
    f.coeff(0, -1, 0, 0) = Complex(1.0, 0.0);
    EXPECT_NO_THROW(to_physical(f));
}

TEST(Transforms, ConstantFieldReportsMean) {
    const GridSpec g(8, two_pi);
    PhysicalField p(g);
    for (std::size_t q = 0; q < g.points(); ++q) {
        p.component(0)[q] = 2.5;
        p.component(2)[q] = -1.0;
    }
    std::array<double, 3> mean{};
    const auto s = to_spectral(p, &mean);
    EXPECT_TRUE(s.is_zero());
    EXPECT_NEAR(mean[0], 2.5, 1e-15);
    EXPECT_NEAR(mean[1], 0.0, 1e-15);
    EXPECT_NEAR(mean[2], -1.0, 1e-15);
}

TEST(Transforms, CosineCoefficients) {
    const GridSpec g(16, two_pi);
    PhysicalField p(g);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            for (int l = 0; l < 16; ++l) p.at(1, i, j, l) = std::cos(g.coordinate(i));
    const auto s = to_spectral(p);
    EXPECT_NEAR(std::abs(s.coeff(1, 1, 0, 0) - 0.5), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s.coeff(1, -1, 0, 0) - 0.5), 0.0, 1e-15);
    s.coeff(1, 1, 0, 0);
    SpectralField expect(g);
    expect.coeff(1, 1, 0, 0) = 0.5;
    expect.coeff(1, -1, 0, 0) = 0.5;
    EXPECT_LE((s - expect).max_abs(), 1e-15);
}

TEST(Transforms, Parseval) {
    const GridSpec g(16, 5.0);
    const auto f = random_array(g, 3, 7);
    double sum = 0.0;
    for (std::size_t q = 0; q < f.size(); ++q) sum += std::norm(f.data()[q]);
    const double l2 = lebesgue_norm(f, 2.0);
    EXPECT_LE(rel_diff(l2 * l2, sum * g.volume()), 1e-10);
}

TEST(SobolevNorm, CosineOracle) {
    const GridSpec g(16, two_pi);
    SpectralField f(g);
    f.coeff(1, 1, 0, 0) = 0.5;
    f.coeff(1, -1, 0, 0) = 0.5;
    EXPECT_EQ(sobolev_norm(SpectralField(g), 0.5), 0.0);
    EXPECT_LE(rel_diff(sobolev_norm(f, 0.5), std::sqrt(std::pow(two_pi, 3) / 2.0)), 1e-14);
    EXPECT_THROW(sobolev_norm(f, 3.5), DomainError);
    EXPECT_THROW(sobolev_norm(f, -2.5), DomainError);
}

TEST(SobolevNorm, OrderZeroIsL2) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto f = random_solenoidal(GridSpec(16, 3.0), seed);
        EXPECT_LE(rel_diff(sobolev_norm(f, 0.0), lebesgue_norm(f, 2.0)), 1e-10);
    }
}

TEST(SobolevNorm, InterpolationInequality) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto f = random_array(GridSpec(16, 1.0 + seed), seed, 7);
        const double lhs = sobolev_norm(f, 1.0);
        const double rhs = std::sqrt(sobolev_norm(f, 0.5) * sobolev_norm(f, 1.5));
        EXPECT_LE(lhs, rhs * (1.0 + 1e-12));
    }
}

TEST(LebesgueNorm, CosineCubeOracle) {
    // |cos|^3 is only C^2, so the equal-weight sum converges at fourth order rather than spectrally.
    const double exact = std::cbrt(two_pi * two_pi * 8.0 / 3.0);
    double prev = 0.0;
    for (int n : {16, 32, 64}) {
        const GridSpec g(n, two_pi);
        SpectralField f(g);
        f.coeff(1, 1, 0, 0) = 0.5;
        f.coeff(1, -1, 0, 0) = 0.5;
        EXPECT_EQ(lebesgue_norm(SpectralField(g), 3.0), 0.0);
        const double err = rel_diff(lebesgue_norm(f, 3.0), exact);
        if (prev > 0.0) {
            EXPECT_LE(err, prev / 12.0);
        }
        if (n == 64) {
            EXPECT_LE(err, 1e-6);
        }
        prev = err;
        EXPECT_NEAR(lebesgue_norm(f, std::numeric_limits<double>::infinity()), 1.0, 1e-14);
        EXPECT_LE(rel_diff(lebesgue_norm(f, 2.0), sobolev_norm(f, 0.0)), 1e-12);
    }
}

TEST(FractionalLaplacian, Properties) {
    const GridSpec g(16, two_pi);
    const auto f = random_array(g, 5, 6);
    EXPECT_LE((fractional_laplacian(f, 0.0) - f).max_abs(), 0.0);
    SpectralField unit(g);
    unit.coeff(0, 0, 1, 0) = Complex(0.3, 0.1);
    unit.coeff(0, 0, -1, 0) = Complex(0.3, -0.1);
    EXPECT_LE((fractional_laplacian(unit, 0.5) - unit).max_abs(), 1e-16);
    EXPECT_LE(rel_diff(sobolev_norm(fractional_laplacian(f, 1.5), 0.0), sobolev_norm(f, 1.5)), 1e-10);
    EXPECT_TRUE(fractional_laplacian(f, 2.0).coeff(0, 0, 0, 0) == Complex{});
}

TEST(HeatSemigroup, Properties) {
    const GridSpec g(16, two_pi);
    const auto f = random_array(g, 9, 6);
    EXPECT_LE((heat_semigroup(f, 0.0) - f).max_abs(), 0.0);
    EXPECT_THROW(heat_semigroup(f, -1e-3), DomainError);
    SpectralField unit(g);
    unit.coeff(2, 1, 0, 0) = 0.5;
    unit.coeff(2, -1, 0, 0) = 0.5;
    EXPECT_NEAR(heat_semigroup(unit, 1.0).coeff(2, 1, 0, 0).real(), 0.5 * std::exp(-1.0), 1e-16);
    const auto a = heat_semigroup(heat_semigroup(f, 0.03), 0.05);
    const auto b = heat_semigroup(f, 0.08);
    EXPECT_LE((a - b).max_abs(), 1e-12 * f.max_abs());
    for (double s : {-1.0, 0.0, 0.5, 1.5, 3.0}) {
        double prev = sobolev_norm(f, s);
        for (double t : {0.01, 0.1, 0.5}) {
            const double now = sobolev_norm(heat_semigroup(f, t), s);
            EXPECT_LE(now, prev);
            prev = now;
        }
    }
}

TEST(BmoMinusOne, ZeroAndMonotoneInProbes) {
    const GridSpec g(16, two_pi);
    EXPECT_EQ(bmo_minus1_norm(SpectralField(g), 1.0, {{1.0, 1.0, 1.0}}, {0.5}), 0.0);
    const auto f = random_solenoidal(g, 4, 1.0);
    const std::vector<Point> few{{1.0, 2.0, 3.0}};
    const std::vector<Point> more{{1.0, 2.0, 3.0}, {4.0, 0.5, 2.0}, {3.0, 3.0, 3.0}};
    const double a = bmo_minus1_norm(f, 1.0, few, {0.25});
    const double b = bmo_minus1_norm(f, 1.0, more, {0.25});
    const double c = bmo_minus1_norm(f, 1.0, more, {0.25, 0.8});
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, b);
    EXPECT_LE(b, c);
}

TEST(BmoMinusOne, RejectsWrappingProbes) {
    const GridSpec g(8, 1.0);
    const auto f = random_solenoidal(g, 2);
    int rejected = 0;
    const auto prev = set_diagnostic_sink([&](const Diagnostic& d) { rejected += d.code == "bmo_probe_rejected"; });
    EXPECT_THROW(bmo_minus1_norm(f, 1.0, {{0.5, 0.5, 0.5}}, {0.5}), DomainError);
    EXPECT_NO_THROW(bmo_minus1_norm(f, 1.0, {{0.5, 0.5, 0.5}}, {0.5, 0.1}));
    set_diagnostic_sink(prev);
    EXPECT_EQ(rejected, 2);
}

TEST(BmoMinusOne, RatioToL3BoundedUnderRefinement) {
    // Band-limited data: the same field on two grids; the ratio to |f|_3^2 must stay put.
    std::vector<double> ratios;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        double r[2];
        int k = 0;
        for (int n : {16, 32}) {
            const auto f = random_solenoidal(GridSpec(n, two_pi), seed, 1.0, 3.0);
            const std::vector<Point> probes{{1.0, 1.0, 1.0}, {3.0, 2.0, 5.0}, {5.0, 4.0, 1.0}};
            const double l3 = lebesgue_norm(f, 3.0);
            r[k++] = bmo_minus1_norm(f, 1.0, probes, {0.1, 0.4, 1.0}) / (l3 * l3);
        }
        EXPECT_GT(r[0], 0.0);
        EXPECT_LE(rel_diff(r[1], r[0]), 0.2);
        ratios.push_back(r[1]);
    }
    for (double v : ratios) EXPECT_LT(v, 10.0);
}

TEST(SobolevEmbedding, RatioStableUnderRefinement) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double r[3];
        int k = 0;
        for (int n : {16, 24, 32}) {
            const auto f = random_solenoidal(GridSpec(n, two_pi), seed, 1.0, 3.0);
            r[k++] = lebesgue_norm(f, 3.0) / sobolev_norm(f, 0.5);
        }
        EXPECT_LE(rel_diff(r[1], r[0]), 0.2);
        EXPECT_LE(rel_diff(r[2], r[0]), 0.2);
    }
}

TEST(SpectralField, DivergenceDefectAndResample) {
    const GridSpec g(16, two_pi);
    const auto u = random_solenoidal(g, 7);
    EXPECT_LE(divergence_defect(u), 1e-13);
    EXPECT_LE(hermitian_defect(u), 1e-15);
    const auto up = resample(u, GridSpec(32, two_pi));
    EXPECT_LE(rel_diff(sobolev_norm(up, 0.5), sobolev_norm(u, 0.5)), 1e-14);
    EXPECT_LE((resample(up, g) - u).max_abs(), 0.0);
    EXPECT_THROW(resample(u, GridSpec(16, 1.0)), DomainError);
}

TEST(PointEvaluator, MatchesGridValues) {
    const GridSpec g(16, 3.0);
    const auto u = random_solenoidal(g, 8);
    const auto p = to_physical(u);
    const PointEvaluator<3> ev(u);
    for (int i : {0, 3, 9})
        for (int j : {1, 15})
            for (int l : {2, 7}) {
                const auto v = ev({g.coordinate(i), g.coordinate(j), g.coordinate(l)});
                for (int c = 0; c < 3; ++c) EXPECT_NEAR(v[c], p.at(c, i, j, l), 1e-13);
            }
}

TEST(SpectralField, ConcurrentTransformsAgree) {
    const GridSpec g(16, two_pi);
    const auto u = random_solenoidal(g, 12);
    const auto ref = to_physical(u);
    std::vector<double> worst(4, 0.0);
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < 4; ++w) {
            pool.emplace_back([&, w] {
                for (int rep = 0; rep < 5; ++rep) {
                    const auto p = to_physical(u);
                    for (std::size_t q = 0; q < p.values().size(); ++q)
                        worst[w] = std::max(worst[w], std::abs(p.values()[q] - ref.values()[q]));
                }
            });
        }
    }
    for (double v : worst) EXPECT_EQ(v, 0.0);
}
