#ifndef RSB_BELAVIN_HPP
#define RSB_BELAVIN_HPP

// Belavin's Z_n-symmetric elliptic R-matrix
//
//   R(z)^{ij}_{i'j'} = delta_{i+j, i'+j'} theta^{(i'-j')}(z+eta) / (theta^{(i'-i)}(eta) theta^{(i-j')}(z))
//                      * prod_{k=0}^{n-1} theta^{(k)}(z) / prod_{k=1}^{n-1} theta^{(k)}(0)
//
// stored as an n^2 x n^2 matrix, row (i, j) -> i*n + j, column (i', j') -> i'*n + j'.
// R acts on C^n (x) C^n as (R v)_{ij} = sum R^{ij}_{i'j'} v_{i'j'}.

#include <algorithm>
#include <array>
#include <vector>

#include "intertwiners.hpp"

namespace rsb
{

struct RTensor {
    cmatrix entries;
    cplx z;
    ModelParams params;

    cplx operator()(int i, int j, int ip, int jp) const
    {
        const int n = params.n();
        return entries(i * n + j, ip * n + jp);
    }
};

namespace detail
{

// theta^{(j)} vanishes exactly on j tau + (Z + n tau Z).
inline bool band_zero(int j, cplx z, const ModelParams& p)
{
    const TorusParams coarse(static_cast<double>(p.n()) * p.tau(), p.tol());
    return coarse.near_lattice(z - static_cast<double>(p.wrap(j)) * p.tau());
}

} // namespace detail

// The theta^{(i-j')}(z) denominator is cancelled against the matching factor of
// prod_k theta^{(k)}(z), so entries are entire in z.
inline RTensor r_matrix(cplx z, const ModelParams& params)
{
    const int n = params.n();
    const cplx eta = params.eta();

    std::vector<cplx> band_z(static_cast<std::size_t>(n));
    std::vector<cplx> band_zeta(static_cast<std::size_t>(n));
    std::vector<cplx> band_eta(static_cast<std::size_t>(n));
    cplx denom0 = 1.0;
    for (int k = 0; k < n; ++k) {
        band_z[k] = theta_band(k, z, params);
        band_zeta[k] = theta_band(k, z + eta, params);
        if (detail::band_zero(k, eta, params)) {
            throw pole_at_lattice_point("r_matrix: theta^{(" + std::to_string(k) + ")}(eta) vanishes");
        }
        band_eta[k] = theta_band(k, eta, params);
        if (k >= 1) {
            denom0 *= theta_band(k, 0.0, params);
        }
    }
    // prod_{k != m} theta^{(k)}(z) for each m.
    std::vector<cplx> others(static_cast<std::size_t>(n), 1.0);
    for (int m = 0; m < n; ++m) {
        for (int k = 0; k < n; ++k) {
            if (k != m) {
                others[m] *= band_z[k];
            }
        }
    }

    cmatrix r = cmatrix::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int ip = 0; ip < n; ++ip) {
                const int jp = params.wrap(i + j - ip);
                r(i * n + j, ip * n + jp) = band_zeta[params.wrap(ip - jp)] / band_eta[params.wrap(ip - i)]
                    * others[params.wrap(i - jp)] / denom0;
            }
        }
    }
    return {std::move(r), z, params};
}

namespace detail
{

// Embed a two-leg operator on legs (a, b) of (C^n)^{(x)3}, a < b.
inline cmatrix embed_pair(const cmatrix& r, int n, int a, int b)
{
    const int dim = n * n * n;
    cmatrix out = cmatrix::Zero(dim, dim);
    const int c = 3 - a - b;
    std::array<int, 3> o{};
    std::array<int, 3> in{};
    const auto flat = [n](const std::array<int, 3>& x) { return (x[0] * n + x[1]) * n + x[2]; };
    for (o[a] = 0; o[a] < n; ++o[a]) {
        for (o[b] = 0; o[b] < n; ++o[b]) {
            for (in[a] = 0; in[a] < n; ++in[a]) {
                for (in[b] = 0; in[b] < n; ++in[b]) {
                    const cplx v = r(o[a] * n + o[b], in[a] * n + in[b]);
                    if (v == cplx{}) {
                        continue;
                    }
                    for (int s = 0; s < n; ++s) {
                        o[c] = s;
                        in[c] = s;
                        out(flat(o), flat(in)) = v;
                    }
                }
            }
        }
    }
    return out;
}

} // namespace detail

// Both sides of R12(z-w) R13(z) R23(w) = R23(w) R13(z) R12(z-w) as n^3 x n^3 matrices.
inline std::pair<cmatrix, cmatrix> ybe_sides(cplx z, cplx w, const ModelParams& params)
{
    const int n = params.n();
    const cmatrix r12 = detail::embed_pair(r_matrix(z - w, params).entries, n, 0, 1);
    const cmatrix r13 = detail::embed_pair(r_matrix(z, params).entries, n, 0, 2);
    const cmatrix r23 = detail::embed_pair(r_matrix(w, params).entries, n, 1, 2);
    return {r12 * r13 * r23, r23 * r13 * r12};
}

// Max-norm of the YBE defect relative to the largest entry of either side.
inline double ybe_residual(cplx z, cplx w, const ModelParams& params)
{
    const auto [lhs, rhs] = ybe_sides(z, w, params);
    const double scale = std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
    return (lhs - rhs).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
}

} // namespace rsb

#endif
