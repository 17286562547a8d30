// One Backlund step for three particles, then a short evolution.
// Prints the solved mu, the residuals, and rs_residual along the trajectory.

#include <rsb/discrete_flow.hpp>

#include <cstdio>

using namespace rsb;

int main()
{
    const ModelParams p(3, 0.23, TorusParams(cplx{0.0, 1.0}));
    const WeightVector lam({0.11, cplx{0.43, 0.05}, cplx{-0.37, 0.1}}, p);

    // seed momenta from a nearby mu0 so the step has a known answer
    std::vector<cplx> m0(lam.values().begin(), lam.values().end());
    for (auto& x : m0) {
        x += 0.03 - p.shift();
    }
    const cplx c = 0.1;
    const PhaseConfig start(lam, backlund_t(lam, WeightVector(m0, p), c));

    const SolverConfig cfg;
    const WeightVector mu = solve_next(start.lambda(), start.t(), c, cfg);
    const auto st = BacklundStep::from_weights(lam, mu, c, 0.3);

    std::printf("mu:\n");
    for (int k = 0; k < 3; ++k) {
        std::printf("  %+.12f %+.12fi   (mu0 %+.6f %+.6fi)\n", mu[k].real(), mu[k].imag(), m0[k].real(), m0[k].imag());
    }
    std::printf("lax      %.3e\n", lax_equation_residual(cplx{0.31, 0.17}, st));
    std::printf("eigen    %.3e\n", eigenvector_residual(st));
    std::printf("kernel   %.3e\n", kernel_residual(st));

    auto traj = start_trajectory(start, c);
    for (int a = 0; a < 8; ++a) {
        traj = step(std::move(traj), c, cfg);
    }
    const auto& s = traj.steps;
    std::printf("\n a   lambda_0(a)                      rs_residual\n");
    for (std::size_t a = 0; a < s.size(); ++a) {
        const double r = (a == 0 || a + 1 == s.size())
            ? 0.0
            : discrete_rs_residual(s[a - 1].lambda, s[a].lambda, s[a + 1].lambda, s[a - 1].c, s[a].c);
        std::printf("%2zu  %+.10f %+.10fi  %.2e\n", a, s[a].lambda[0].real(), s[a].lambda[0].imag(), r);
    }
    return 0;
}
