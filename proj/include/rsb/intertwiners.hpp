#ifndef RSB_INTERTWINERS_HPP
#define RSB_INTERTWINERS_HPP

// Intertwining vectors phi(z)_{lambda,i}^{lambda + eta epsbar_k} as an n x n matrix.
// Convention used everywhere: row i is the vector component (theta_i, i in Z/nZ,
// stored 0..n-1), column k is the weight direction. phi_inverse returns phibar with
// phibar(k, i), so phibar * phi = phi * phibar = identity.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elliptic.hpp"

namespace rsb
{

using cmatrix = Eigen::MatrixXcd;
using cvector = Eigen::VectorXcd;

// lambda in C^n together with the model it lives in.
class WeightVector
{
public:
    WeightVector(std::vector<cplx> lambda, ModelParams params) : lambda_(std::move(lambda)), params_(std::move(params))
    {
        if (static_cast<int>(lambda_.size()) != params_.n()) {
            throw std::invalid_argument("WeightVector: size must equal n");
        }
        const auto& torus = params_.torus();
        for (std::size_t i = 0; i < lambda_.size(); ++i) {
            for (std::size_t j = i + 1; j < lambda_.size(); ++j) {
                if (torus.near_lattice(lambda_[i] - lambda_[j])) {
                    throw degenerate_weights("WeightVector: lambda_" + std::to_string(i) + " - lambda_"
                                             + std::to_string(j) + " lies on the lattice");
                }
            }
        }
        for (const auto& x : lambda_) {
            total_ += x;
        }
    }

    int size() const { return static_cast<int>(lambda_.size()); }
    cplx operator[](int k) const { return lambda_[static_cast<std::size_t>(k)]; }
    std::span<const cplx> values() const { return lambda_; }
    const ModelParams& params() const { return params_; }

    // Lambda = sum_j lambda_j.
    cplx total() const { return total_; }
    // <lambda, epsbar_k> = lambda_k - Lambda/n.
    cplx pairing(int k) const { return (*this)[k] - total_ / static_cast<double>(size()); }
    // lambda_{ij} = lambda_i - lambda_j.
    cplx diff(int i, int j) const { return (*this)[i] - (*this)[j]; }

    WeightVector shifted(cplx delta) const
    {
        auto v = lambda_;
        for (auto& x : v) {
            x += delta;
        }
        return {std::move(v), params_};
    }

    WeightVector negated() const
    {
        auto v = lambda_;
        for (auto& x : v) {
            x = -x;
        }
        return {std::move(v), params_};
    }

private:
    std::vector<cplx> lambda_;
    ModelParams params_;
    cplx total_{};
};

struct IntertwinerMatrix {
    cmatrix entries;
    cplx z;
    WeightVector lambda;
};

inline IntertwinerMatrix phi_matrix(cplx z, const WeightVector& lam)
{
    const auto& p = lam.params();
    const int n = p.n();
    const cplx norm = p.norm();
    cmatrix m(n, n);
    for (int k = 0; k < n; ++k) {
        const cplx arg = z / static_cast<double>(n) - lam.pairing(k);
        for (int i = 0; i < n; ++i) {
            m(i, k) = theta_level(i, arg, p) / norm;
        }
    }
    return {std::move(m), z, lam};
}

inline constexpr double singular_condition_threshold = 1e12;

// Inverse by LU with partial pivoting. Throws near_singular when the 1-norm
// condition number exceeds 1e12.
inline cmatrix invert_checked(const cmatrix& a, const char* what)
{
    const Eigen::PartialPivLU<cmatrix> lu(a);
    const cmatrix inv = lu.inverse();
    const double anorm = a.cwiseAbs().colwise().sum().maxCoeff();
    const double inorm = inv.cwiseAbs().colwise().sum().maxCoeff();
    const double cond = anorm * inorm;
    if (!std::isfinite(cond) || cond > singular_condition_threshold) {
        throw near_singular(std::string(what) + ": condition estimate above 1e12");
    }
    return inv;
}

inline cmatrix phi_inverse(cplx z, const WeightVector& lam)
{
    return invert_checked(phi_matrix(z, lam).entries, "phi_inverse");
}

// lim_{z -> 0} theta(z) phibar(z). theta(z) phibar(z) is analytic at 0, so its mean over
// r i^m, m = 0..3, equals the value at 0 up to O(r^4). r = 1e-3 keeps cond(phi) near 1e3.
inline cmatrix phi_tilde0(const WeightVector& lam, double r = 1e-3)
{
    const auto& torus = lam.params().torus();
    const int n = lam.size();
    cmatrix acc = cmatrix::Zero(n, n);
    for (const cplx z : {cplx{r, 0.0}, cplx{0.0, r}, cplx{-r, 0.0}, cplx{0.0, -r}}) {
        acc += theta_odd(z, torus) * phi_inverse(z, lam);
    }
    return acc / 4.0;
}

// (i eta_D)^(-(n-1)(n-2)/2) theta(sum z_j) prod_{i<j} theta(z_i - z_j): the closed form
// of det(theta_r(z_j))_{r = 0..n-1, j = 1..n}.
inline cplx theta_level_det_closed_form(std::span<const cplx> zs, const ModelParams& params)
{
    const int n = params.n();
    const auto& torus = params.torus();
    cplx sum{};
    for (auto z : zs) {
        sum += z;
    }
    cplx out = theta_odd(sum, torus);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            out *= theta_odd(zs[i] - zs[j], torus);
        }
    }
    const int power = (n - 1) * (n - 2) / 2;
    return out / std::pow(params.norm(), power);
}

inline cplx theta_level_det(std::span<const cplx> zs, const ModelParams& params)
{
    const int n = params.n();
    cmatrix m(n, n);
    for (int j = 0; j < n; ++j) {
        for (int r = 0; r < n; ++r) {
            m(r, j) = theta_level(r, zs[j], params);
        }
    }
    return m.determinant();
}

// det phi(z) = theta(z) prod_{i<j} theta(lambda_j - lambda_i) / (i eta_D)^(1 + n(n-1)/2).
inline cplx det_phi_closed_form(cplx z, const WeightVector& lam)
{
    const auto& p = lam.params();
    const int n = p.n();
    cplx out = theta_odd(z, p.torus());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            out *= theta_odd(lam.diff(j, i), p.torus());
        }
    }
    return out / std::pow(p.norm(), 1 + n * (n - 1) / 2);
}

inline double det_residual(cplx z, const WeightVector& lam)
{
    const cplx lhs = phi_matrix(z, lam).entries.determinant();
    return std::abs(lhs - det_phi_closed_form(z, lam));
}

// Closed form of sum_i phibar(z)_mu^{k,i} phi(z+u)_{lambda,i}^{k2}.
inline cplx cross_sum_closed_form(cplx z, cplx u, const WeightVector& lam, const WeightVector& mu, int k, int k2)
{
    const auto& torus = lam.params().torus();
    const int n = lam.size();
    const cplx un = u / static_cast<double>(n);
    cplx out = theta_odd(z + un + mu.pairing(k) - lam.pairing(k2), torus) / theta_odd(z, torus);
    for (int l = 0; l < n; ++l) {
        if (l != k) {
            out *= theta_odd(un + mu.pairing(l) - lam.pairing(k2), torus)
                / theta_odd(mu.pairing(l) - mu.pairing(k), torus);
        }
    }
    return out;
}

// |LHS - RHS| / max(1, |LHS| + |RHS|) for the cross-sum formula at (k, k2).
inline double cross_sum_residual(cplx z, cplx u, const WeightVector& lam, const WeightVector& mu, int k, int k2)
{
    if (lam.params().torus().near_lattice(z)) {
        throw near_singular("cross_sum: z on the lattice");
    }
    const cmatrix pb = phi_inverse(z, mu);
    const cmatrix ph = phi_matrix(z + u, lam).entries;
    cplx lhs{};
    for (int i = 0; i < lam.size(); ++i) {
        lhs += pb(k, i) * ph(i, k2);
    }
    const cplx rhs = cross_sum_closed_form(z, u, lam, mu, k, k2);
    return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs) + std::abs(rhs));
}

} // namespace rsb

#endif
