#include <gtest/gtest.h>

#include "oracles.hpp"

#include <rsb/discrete_flow.hpp>

using namespace rsb;

namespace
{

const cplx I{0.0, 1.0};

std::vector<cplx> draw(std::mt19937_64& rng, int n, cplx tau, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::vector<cplx> v(static_cast<std::size_t>(n));
    for (auto& x : v) {
        x = scale * (u(rng) + u(rng) * tau);
    }
    return v;
}

std::optional<WeightVector> generic_weights(std::mt19937_64& rng, const ModelParams& p)
{
    const auto v = draw(rng, p.n(), p.tau());
    for (int i = 0; i < p.n(); ++i) {
        for (int j = i + 1; j < p.n(); ++j) {
            if (p.torus().lattice_distance(v[i] - v[j]) < 0.1) {
                return std::nullopt;
            }
        }
    }
    return WeightVector(v, p);
}

// mu* near lambda - eta/n, where the solver's default guess starts.
WeightVector nearby_mu(std::mt19937_64& rng, const WeightVector& lam, double radius)
{
    auto d = draw(rng, lam.size(), I, 2.0 * radius);
    for (int k = 0; k < lam.size(); ++k) {
        d[k] += lam[k] - lam.params().shift();
    }
    return {d, lam.params()};
}

PhaseConfig fixture_phase()
{
    const ModelParams p(3, 0.23, TorusParams(I));
    const WeightVector lam({0.11, cplx{0.43, 0.05}, cplx{-0.37, 0.1}}, p);
    auto mu0 = std::vector<cplx>(lam.values().begin(), lam.values().end());
    for (auto& x : mu0) {
        x += -p.shift() + 0.03;
    }
    return {lam, backlund_t(lam, WeightVector(mu0, p), 0.1)};
}

Trajectory fixture_trajectory(int steps)
{
    auto traj = start_trajectory(fixture_phase(), 0.1);
    for (int a = 0; a < steps; ++a) {
        traj = step(std::move(traj), 0.1, SolverConfig{});
    }
    return traj;
}

} // namespace

TEST(SolverConfig, Validation)
{
    EXPECT_NO_THROW(SolverConfig{}.validate());
    SolverConfig c;
    c.tol = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.max_iter = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.damping = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.multistart = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Assignment, RecoversPermutationModuloLattice)
{
    const TorusParams t(I);
    const std::vector<cplx> a{0.1, cplx{0.3, 0.2}, cplx{-0.2, -0.3}};
    const std::vector<cplx> b{cplx{-0.2, -0.3} + 1.0, 0.1 + I, cplx{0.3, 0.2}};
    const auto perm = nearest_assignment(a, b, t);
    EXPECT_EQ(perm, (std::vector<int>{1, 2, 0}));
    EXPECT_LT(matched_distance(a, b, t), 1e-15);
}

TEST(SolveNext, RoundTrip)
{
    std::mt19937_64 rng(2024);
    int trials = 0;
    for (const int n : {1, 2, 3, 4}) {
        const ModelParams p(n, 0.23, TorusParams(I));
        for (int k = 0; k < 10;) {
            const auto lam = generic_weights(rng, p);
            if (!lam) {
                continue;
            }
            const auto mu = nearby_mu(rng, *lam, 0.05);
            const cplx c{0.1, -0.05};
            const auto t = backlund_t(*lam, mu, c);
            const auto got = solve_next(*lam, t, c, SolverConfig{});
            EXPECT_LT(matched_distance(mu.values(), got.values(), p.torus()), 1e-9) << "n=" << n << " k=" << k;
            ++k;
            ++trials;
        }
    }
    EXPECT_EQ(trials, 40);
}

TEST(SolveNext, FiniteDifferenceJacobianAgrees)
{
    std::mt19937_64 rng(7);
    const ModelParams p(3, cplx{0.1, 0.05}, TorusParams(cplx{0.3, 1.2}));
    std::optional<WeightVector> lam;
    while (!lam) {
        lam = generic_weights(rng, p);
    }
    const auto mu = nearby_mu(rng, *lam, 0.05);
    const auto t = backlund_t(*lam, mu, 0.2);
    SolverConfig fd;
    fd.fd_jacobian = true;
    fd.tol = 1e-10;
    const auto a = solve_next(*lam, t, 0.2, SolverConfig{});
    const auto b = solve_next(*lam, t, 0.2, fd);
    EXPECT_LT(matched_distance(a.values(), b.values(), p.torus()), 1e-8);
    EXPECT_LT(matched_distance(mu.values(), b.values(), p.torus()), 1e-8);
}

TEST(SolveNext, ScalarAgreesWithSearch)
{
    const ModelParams p(1, 0.23, TorusParams(I));
    const WeightVector lam({cplx{0.2, 0.1}}, p);
    const std::vector<cplx> t{cplx{1.3, 0.4}};
    const cplx c = 0.1;
    const auto got = solve_next(lam, t, c, SolverConfig{});
    const auto f = [&](cplx m) {
        const cplx d = lam[0] - m;
        return std::abs(t[0] - std::exp(c) * oracle::odd_direct(d + 0.23, I) / oracle::odd_direct(d, I));
    };
    const cplx found = oracle::scalar_search(f, got[0], 0.05);
    EXPECT_LT(f(got[0]), 1e-10);
    EXPECT_LT(std::abs(found - got[0]), 1e-8);
}

TEST(SolveNext, RejectsBadMomenta)
{
    const ModelParams p(2, 0.23, TorusParams(I));
    const WeightVector lam({0.1, cplx{0.3, 0.2}}, p);
    const std::vector<cplx> zero{1.0, 0.0};
    const std::vector<cplx> short_t{1.0};
    EXPECT_THROW(solve_next(lam, zero, 0.1, SolverConfig{}), std::invalid_argument);
    EXPECT_THROW(solve_next(lam, short_t, 0.1, SolverConfig{}), std::invalid_argument);
    SolverConfig bad;
    bad.max_iter = 0;
    const std::vector<cplx> t{1.0, 1.0};
    EXPECT_THROW(solve_next(lam, t, 0.1, bad), std::invalid_argument);
}

TEST(SolveNext, ReportsNoConvergence)
{
    // tol below the attainable floor: every start fails.
    const ModelParams p(2, 0.23, TorusParams(I));
    const WeightVector lam({0.1, cplx{0.3, 0.2}}, p);
    const std::vector<cplx> t{cplx{1.1, 0.2}, cplx{0.9, -0.1}};
    SolverConfig cfg;
    cfg.tol = 1e-300;
    cfg.multistart = 2;
    EXPECT_THROW(solve_next(lam, t, 0.1, cfg), no_convergence);
}

TEST(SolveNext, OverflowIsNotConvergence)
{
    // Tiny t pulls Newton far up the imaginary axis where theta overflows; NaN iterates
    // must never be accepted.
    const ModelParams p(3, 0.23, TorusParams(I));
    const WeightVector lam({0.11, cplx{0.43, 0.05}, cplx{-0.37, 0.1}}, p);
    const std::vector<cplx> t{1e-30, 1e-30, 1e-30};
    SolverConfig cfg;
    cfg.multistart = 3;
    EXPECT_THROW(solve_next(lam, t, 0.1, cfg), no_convergence);

    cvector f(2);
    f << cplx{1.0, 0.0}, cplx{std::nan(""), 0.0};
    const std::vector<cplx> tt{1.0, 1.0};
    EXPECT_EQ(detail::relative_residual(f, tt), std::numeric_limits<double>::infinity());
}

TEST(Trajectory, FailedStepLeavesTrajectory)
{
    auto traj = fixture_trajectory(2);
    traj.steps.back().c = 70.0;
    SolverConfig cfg;
    cfg.multistart = 3;
    EXPECT_THROW(traj = step(traj, 0.1, cfg), no_convergence);
    EXPECT_EQ(traj.steps.size(), 3u);
}

TEST(Trajectory, TenStepsSatisfyDiscreteEquation)
{
    const auto traj = fixture_trajectory(10);
    ASSERT_EQ(traj.steps.size(), 11u);
    ASSERT_EQ(traj.u_sequence.size(), 10u);
    for (std::size_t a = 1; a + 1 < traj.steps.size(); ++a) {
        const auto& s = traj.steps;
        EXPECT_LT(discrete_rs_residual(s[a - 1].lambda, s[a].lambda, s[a + 1].lambda, s[a - 1].c, s[a].c), 1e-9)
            << "a=" << a;
    }
}

TEST(Trajectory, MomentaStayOnShell)
{
    // t(a) from the previous step's t~ must also be what lambda(a+1) reproduces.
    const auto traj = fixture_trajectory(6);
    for (std::size_t a = 1; a + 1 < traj.steps.size(); ++a) {
        const auto& cur = traj.steps[a];
        const auto t = backlund_t(cur.lambda, traj.steps[a + 1].lambda, cur.c);
        for (int k = 0; k < cur.lambda.size(); ++k) {
            EXPECT_LT(oracle::rel(t[k], cur.t[k]), 1e-9);
        }
    }
}

TEST(Trajectory, ShiftSequence)
{
    const auto traj = fixture_trajectory(4);
    for (std::size_t a = 0; a < traj.u_sequence.size(); ++a) {
        const cplx want = traj.v - (traj.steps[a].lambda.total() - traj.steps[a + 1].lambda.total());
        EXPECT_EQ(traj.u_sequence[a], want);
        EXPECT_LT(std::abs(shift_relation(traj.u_sequence[a], traj.steps[a].lambda, traj.steps[a + 1].lambda) - traj.v),
                  1e-14);
    }
}

TEST(Trajectory, PerturbedNeighbourBreaksEquation)
{
    const auto traj = fixture_trajectory(3);
    const auto& s = traj.steps;
    auto bumped = std::vector<cplx>(s[2].lambda.values().begin(), s[2].lambda.values().end());
    bumped[0] += 1e-3;
    const WeightVector next(bumped, traj.params);
    EXPECT_GT(discrete_rs_residual(s[0].lambda, s[1].lambda, next, s[0].c, s[1].c), 1e-5);
}

TEST(Trajectory, Deterministic)
{
    const auto a = fixture_trajectory(5);
    const auto b = fixture_trajectory(5);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(a.steps[i].lambda[k], b.steps[i].lambda[k]);
            EXPECT_EQ(a.steps[i].t[k], b.steps[i].t[k]);
        }
    }
}

TEST(Commutativity, TwoDifferentParameters)
{
    std::mt19937_64 rng(99);
    for (const int n : {2, 3}) {
        const ModelParams p(n, 0.23, TorusParams(I));
        for (int k = 0; k < 15;) {
            const auto lam = generic_weights(rng, p);
            if (!lam) {
                continue;
            }
            const auto mu = nearby_mu(rng, *lam, 0.025);
            const auto t = backlund_t(*lam, mu, 0.05);
            EXPECT_LT(backlund_commutativity_residual(*lam, t, 0.1, -0.07, SolverConfig{}), 1e-9) << "n=" << n;
            ++k;
        }
    }
}

TEST(Commutativity, EqualParametersTrivial)
{
    const auto ph = fixture_phase();
    EXPECT_EQ(backlund_commutativity_residual(ph.lambda(), ph.t(), 0.1, 0.1, SolverConfig{}), 0.0);
}
