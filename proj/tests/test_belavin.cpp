#include <gtest/gtest.h>

#include "oracles.hpp"

#include <rsb/belavin.hpp>

using namespace rsb;

namespace
{

const cplx I{0.0, 1.0};

// theta^{(j)} straight from the series, no library theta.
cplx band_direct(int j, cplx z, int n, cplx tau)
{
    const int jj = ((j % n) + n) % n;
    return oracle::theta_direct(0.5 - static_cast<double>(jj) / n, 0.0, z + 0.5, static_cast<double>(n) * tau);
}

// Entry formula with the theta^{(i-j')}(z) denominator kept.
cplx entry_direct(int i, int j, int ip, int jp, cplx z, int n, cplx eta, cplx tau)
{
    const auto w = [n](int k) { return ((k % n) + n) % n; };
    if (w(i + j) != w(ip + jp)) {
        return 0.0;
    }
    cplx num = 1.0;
    for (int k = 0; k < n; ++k) {
        num *= band_direct(k, z, n, tau);
    }
    cplx den = 1.0;
    for (int k = 1; k < n; ++k) {
        den *= band_direct(k, 0.0, n, tau);
    }
    return band_direct(ip - jp, z + eta, n, tau) / (band_direct(ip - i, eta, n, tau) * band_direct(i - jp, z, n, tau))
        * num / den;
}

} // namespace

TEST(RMatrix, EntriesMatchDirectFormula)
{
    for (const int n : {2, 3, 4}) {
        const cplx tau{0.3, 1.2};
        const cplx eta{0.1, 0.05};
        const ModelParams p(n, eta, TorusParams(tau));
        const cplx z{0.27, 0.31};
        const auto r = r_matrix(z, p);
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int ip = 0; ip < n; ++ip)
                    for (int jp = 0; jp < n; ++jp) {
                        const cplx want = entry_direct(i, j, ip, jp, z, n, eta, tau);
                        if (want == cplx{}) {
                            continue;
                        }
                        worst = std::max(worst, oracle::rel(r(i, j, ip, jp), want));
                    }
        EXPECT_LT(worst, 1e-11) << "n=" << n;
    }
}

TEST(RMatrix, ExactChargeConservation)
{
    const ModelParams p(3, 0.23, TorusParams(I));
    const auto r = r_matrix(cplx{0.2, 0.1}, p);
    int nonzero = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int ip = 0; ip < 3; ++ip)
                for (int jp = 0; jp < 3; ++jp) {
                    if ((i + j) % 3 != (ip + jp) % 3) {
                        EXPECT_EQ(r(i, j, ip, jp), cplx{});
                    } else if (r(i, j, ip, jp) != cplx{}) {
                        ++nonzero;
                    }
                }
    EXPECT_EQ(nonzero, 27);
}

TEST(RMatrix, ScalarCase)
{
    // n = 1: R(z) = theta(z + eta)/theta(eta).
    const ModelParams p(1, 0.23, TorusParams(I));
    const cplx z{0.3, -0.2};
    const auto r = r_matrix(z, p);
    ASSERT_EQ(r.entries.rows(), 1);
    EXPECT_LT(oracle::rel(r(0, 0, 0, 0), oracle::odd_direct(z + 0.23, I) / oracle::odd_direct(0.23, I)), 1e-12);
    EXPECT_LT(ybe_residual(0.3, cplx{0.1, 0.2}, p), 1e-14);
}

TEST(RMatrix, PermutationAtOrigin)
{
    for (const int n : {2, 3}) {
        const ModelParams p(n, cplx{0.1, 0.05}, TorusParams(cplx{0.3, 1.2}));
        const auto r = r_matrix(0.0, p);
        cmatrix perm = cmatrix::Zero(n * n, n * n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                perm(i * n + j, j * n + i) = 1.0;
            }
        }
        EXPECT_LT((r.entries - perm).cwiseAbs().maxCoeff(), 1e-12) << "n=" << n;
    }
}

TEST(RMatrix, EntireAcrossDenominatorZeros)
{
    // theta^{(1)} vanishes at tau; the cancelled form stays finite and continuous there.
    const ModelParams p(2, 0.23, TorusParams(I));
    const auto at = r_matrix(I, p).entries;
    const auto near = r_matrix(I + cplx{1e-7, 0.0}, p).entries;
    EXPECT_TRUE(at.allFinite());
    EXPECT_LT((at - near).cwiseAbs().maxCoeff() / at.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(YangBaxter, RankTwoAndThree)
{
    for (const int n : {2, 3}) {
        for (const cplx tau : {I, cplx{0.3, 1.2}}) {
            const ModelParams p(n, 0.23, TorusParams(tau));
            std::mt19937_64 rng(7 + n);
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (int k = 0; k < 5; ++k) {
                const cplx z = u(rng) + u(rng) * tau;
                const cplx w = u(rng) + u(rng) * tau;
                EXPECT_LT(ybe_residual(z, w, p), 1e-10) << "n=" << n << " k=" << k;
            }
        }
    }
}

TEST(YangBaxter, CoincidentArguments)
{
    const ModelParams p(2, 0.23, TorusParams(I));
    EXPECT_LT(ybe_residual(cplx{0.2, 0.1}, cplx{0.2, 0.1}, p), 1e-12);
}

TEST(YangBaxter, MatchesIndexLoops)
{
    const ModelParams p(2, cplx{0.1, 0.05}, TorusParams(cplx{0.3, 1.2}));
    const cplx z{0.21, 0.13};
    const cplx w{-0.17, 0.3};
    const auto [lhs, rhs] = oracle::ybe_naive(r_matrix(z - w, p), r_matrix(z, p), r_matrix(w, p));
    const auto [l2, r2] = ybe_sides(z, w, p);
    double scale = 0.0;
    double dl = 0.0;
    double dr = 0.0;
    double defect = 0.0;
    for (int row = 0; row < 8; ++row) {
        for (int col = 0; col < 8; ++col) {
            const std::size_t k = static_cast<std::size_t>(row * 8 + col);
            scale = std::max(scale, std::abs(lhs[k]));
            dl = std::max(dl, std::abs(lhs[k] - l2(row, col)));
            dr = std::max(dr, std::abs(rhs[k] - r2(row, col)));
            defect = std::max(defect, std::abs(lhs[k] - rhs[k]));
        }
    }
    EXPECT_LT(dl / scale, 1e-13);
    EXPECT_LT(dr / scale, 1e-13);
    EXPECT_LT(defect / scale, 1e-10);
}

TEST(YangBaxter, BrokenCouplingFails)
{
    // Mixing two couplings must break the relation; guards against a vacuous residual.
    const ModelParams p(2, 0.23, TorusParams(I));
    const ModelParams q(2, 0.31, TorusParams(I));
    const cplx z{0.21, 0.13};
    const cplx w{-0.17, 0.3};
    const int n = 2;
    const cmatrix r12 = detail::embed_pair(r_matrix(z - w, p).entries, n, 0, 1);
    const cmatrix r13 = detail::embed_pair(r_matrix(z, q).entries, n, 0, 2);
    const cmatrix r23 = detail::embed_pair(r_matrix(w, p).entries, n, 1, 2);
    const cmatrix lhs = r12 * r13 * r23;
    const cmatrix rhs = r23 * r13 * r12;
    EXPECT_GT((lhs - rhs).cwiseAbs().maxCoeff() / lhs.cwiseAbs().maxCoeff(), 1e-4);
}
