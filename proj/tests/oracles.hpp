#pragma once

// Independent reference computations for the tests. Nothing here calls the library's
// theta evaluation except where a test compares two library paths on purpose.

#include <rsb/belavin.hpp>

#include <array>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle
{

using rsb::cplx;
using rsb::pi;

// Plain partial sum over |m| <= M, no argument reduction.
inline cplx theta_direct(double a, double b, cplx z, cplx tau, int M = 60)
{
    const cplx i{0.0, 1.0};
    cplx s{};
    for (int m = -M; m <= M; ++m) {
        const double ma = m + a;
        s += std::exp(pi * i * ma * ma * tau + 2.0 * pi * i * ma * (z + b));
    }
    return s;
}

inline cplx theta_direct_deriv(double a, double b, cplx z, cplx tau, int M = 60)
{
    const cplx i{0.0, 1.0};
    cplx s{};
    for (int m = -M; m <= M; ++m) {
        const double ma = m + a;
        s += 2.0 * pi * i * ma * std::exp(pi * i * ma * ma * tau + 2.0 * pi * i * ma * (z + b));
    }
    return s;
}

inline cplx odd_direct(cplx z, cplx tau)
{
    return theta_direct(0.5, 0.5, z, tau);
}

inline cplx central_diff(const std::function<cplx(cplx)>& f, cplx z, double h)
{
    return (f(z + h) - f(z - h)) / (2.0 * h);
}

inline rsb::cmatrix cofactor_inverse_2x2(const rsb::cmatrix& a)
{
    const cplx det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    rsb::cmatrix inv(2, 2);
    inv << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
    return inv / det;
}

// Adjugate via cofactors, any n.
inline rsb::cmatrix adjugate(const rsb::cmatrix& a)
{
    const int n = static_cast<int>(a.rows());
    rsb::cmatrix adj(n, n);
    if (n == 1) {
        adj(0, 0) = 1.0;
        return adj;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            rsb::cmatrix minor(n - 1, n - 1);
            for (int r = 0, rr = 0; r < n; ++r) {
                if (r == i) {
                    continue;
                }
                for (int c = 0, cc = 0; c < n; ++c) {
                    if (c == j) {
                        continue;
                    }
                    minor(rr, cc++) = a(r, c);
                }
                ++rr;
            }
            adj(j, i) = (((i + j) % 2) ? -1.0 : 1.0) * minor.determinant();
        }
    }
    return adj;
}

// theta(z) phibar(z) at z = 0 exactly: adj(phi(0)) over the theta-free part of det phi.
inline rsb::cmatrix phi_tilde0_adjugate(const rsb::WeightVector& lam)
{
    const auto& p = lam.params();
    const int n = lam.size();
    cplx d = 1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            d *= odd_direct(lam[j] - lam[i], p.tau());
        }
    }
    d /= std::pow(p.norm(), 1 + n * (n - 1) / 2);
    return adjugate(rsb::phi_matrix(0.0, lam).entries) / d;
}

// R12(z-w) R13(z) R23(w) and the reverse product by explicit index loops, n = 2.
inline std::pair<std::vector<cplx>, std::vector<cplx>> ybe_naive(const rsb::RTensor& r12, const rsb::RTensor& r13,
                                                                 const rsb::RTensor& r23)
{
    constexpr int n = 2;
    const auto idx = [](int a, int b, int c, int d, int e, int f) {
        return ((((a * n + b) * n + c) * n + d) * n + e) * n + f;
    };
    std::vector<cplx> lhs(64, 0.0);
    std::vector<cplx> rhs(64, 0.0);
    // (out a b c) <- (in d e f)
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d)
                    for (int e = 0; e < n; ++e)
                        for (int f = 0; f < n; ++f) {
                            cplx sl{};
                            cplx sr{};
                            for (int a1 = 0; a1 < n; ++a1)
                                for (int b1 = 0; b1 < n; ++b1)
                                    for (int c1 = 0; c1 < n; ++c1) {
                                        // lhs: R12 then R13 then R23 acting right to left
                                        // (R12 R13 R23)_{abc,def} = sum R12_{ab,a1b1} R13_{a1c,d c1} R23_{b1c1,ef}
                                        sl += r12(a, b, a1, b1) * r13(a1, c, d, c1) * r23(b1, c1, e, f);
                                        // (R23 R13 R12)_{abc,def} = sum R23_{bc,b1c1} R13_{ac1,a1f} R12_{a1b1,de}
                                        sr += r23(b, c, b1, c1) * r13(a, c1, a1, f) * r12(a1, b1, d, e);
                                    }
                            lhs[idx(a, b, c, d, e, f)] = sl;
                            rhs[idx(a, b, c, d, e, f)] = sr;
                        }
    return {lhs, rhs};
}

// Grid-then-refine minimisation of |t - e^c theta(lambda - mu + eta)/theta(lambda - mu)| over
// mu in a box around a centre, n = 1.
inline cplx scalar_search(const std::function<double(cplx)>& f, cplx centre, double half)
{
    cplx best = centre;
    double bv = f(centre);
    double h = half;
    for (int round = 0; round < 40; ++round) {
        const cplx c0 = best;
        for (int i = -10; i <= 10; ++i) {
            for (int j = -10; j <= 10; ++j) {
                const cplx m = c0 + cplx{i * h / 10.0, j * h / 10.0};
                const double v = f(m);
                if (v < bv) {
                    bv = v;
                    best = m;
                }
            }
        }
        h *= 0.3;
    }
    return best;
}

// 40-digit reference values.
namespace frozen
{
inline const cplx theta_odd_03_i{-0.73719716371868159764, 0.0};
inline const cplx theta_odd_025_04i_tau{-0.80782323534663558246, -1.1006743072339373174};
inline const cplx theta_odd_deriv_0_i{-2.8486946039877873161, 0.0};
inline const cplx theta_odd_deriv_041_01i_i{-0.85679770204002869828, 0.89008848294464963007};
inline const cplx theta00_03_i{0.97328668708831650794, 0.0};
inline const cplx band_n3_j0_02{-0.11142083556829138933, 0.0};
inline const cplx level_n3_j1_01{-0.23927482705159801517, 0.73199688358530925165};
inline const double eta_i = 0.768225422326056659;
inline const double eta_2i = 0.59238278133241588529;
inline const cplx zeta_023_011i_tau{2.7718565992613522867, -2.0831512392788395304};
} // namespace frozen

inline double rel(cplx a, cplx b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace oracle
