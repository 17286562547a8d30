#ifndef RSB_RS_LAX_HPP
#define RSB_RS_LAX_HPP

// Classical factorized Lax operator of the elliptic Ruijsenaars-Schneider model,
// its gauge form, the Backlund map (lambda, t) -> (mu, t~) and the M-matrix of the
// discrete Lax equation M L = L~ M.
//
// Gauge-frame matrices are indexed [k'][k] exactly as written in the formulas, so the
// Lax equation reads G_M * G_L = G_L~ * G_M and the eigenvector relation reads
// G_L(u) s = e^c s with s_k = s_mu(lambda_k + eta/n).

#include <span>
#include <vector>

#include "intertwiners.hpp"
#include "quadrature.hpp"

namespace rsb
{

// One point (lambda, t) of phase space.
class PhaseConfig
{
public:
    PhaseConfig(WeightVector lambda, std::vector<cplx> t) : lambda_(std::move(lambda)), t_(std::move(t))
    {
        if (static_cast<int>(t_.size()) != lambda_.size()) {
            throw std::invalid_argument("PhaseConfig: t must have n entries");
        }
        for (const auto& tk : t_) {
            if (tk == cplx{} || !std::isfinite(std::abs(tk))) {
                throw std::invalid_argument("PhaseConfig: t_k must be finite and nonzero");
            }
        }
    }

    const WeightVector& lambda() const { return lambda_; }
    std::span<const cplx> t() const { return t_; }
    const ModelParams& params() const { return lambda_.params(); }
    int size() const { return lambda_.size(); }

private:
    WeightVector lambda_;
    std::vector<cplx> t_;
};

namespace detail
{

inline cplx theta_checked(cplx x, const TorusParams& torus, const char* what)
{
    if (torus.near_lattice(x)) {
        throw pole_at_lattice_point(std::string(what) + ": theta denominator vanishes");
    }
    return theta_odd(x, torus);
}

} // namespace detail

// t_k = e^c prod_s theta(lambda_k - mu_s + eta/n) / theta(lambda_k - mu_s).
inline std::vector<cplx> backlund_t(const WeightVector& lam, const WeightVector& mu, cplx c)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    std::vector<cplx> t(static_cast<std::size_t>(n), std::exp(c));
    for (int k = 0; k < n; ++k) {
        for (int s = 0; s < n; ++s) {
            const cplx d = lam[k] - mu[s];
            t[k] *= theta_odd(d + h, torus) / detail::theta_checked(d, torus, "backlund_t");
        }
    }
    return t;
}

// t~_k = e^c prod_{m != k} theta(mu_mk - eta/n) / theta(mu_mk + eta/n)
//            prod_s theta(lambda_s - mu_k + eta/n) / theta(lambda_s - mu_k).
inline std::vector<cplx> backlund_ttilde(const WeightVector& lam, const WeightVector& mu, cplx c)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    std::vector<cplx> t(static_cast<std::size_t>(n), std::exp(c));
    for (int k = 0; k < n; ++k) {
        for (int m = 0; m < n; ++m) {
            if (m != k) {
                t[k] *= theta_odd(mu.diff(m, k) - h, torus)
                    / detail::theta_checked(mu.diff(m, k) + h, torus, "backlund_ttilde");
            }
        }
        for (int s = 0; s < n; ++s) {
            const cplx d = lam[s] - mu[k];
            t[k] *= theta_odd(d + h, torus) / detail::theta_checked(d, torus, "backlund_ttilde");
        }
    }
    return t;
}

// C_k = prod_s theta(mu_sk - eta/n) / theta(lambda_s - mu_k).
inline std::vector<cplx> backlund_C(const WeightVector& lam, const WeightVector& mu)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    std::vector<cplx> c(static_cast<std::size_t>(n), 1.0);
    for (int k = 0; k < n; ++k) {
        for (int s = 0; s < n; ++s) {
            c[k] *= theta_odd(mu.diff(s, k) - h, torus)
                / detail::theta_checked(lam[s] - mu[k], torus, "backlund_C");
        }
    }
    return c;
}

inline cplx shift_relation(cplx u, const WeightVector& lam, const WeightVector& mu)
{
    return u + lam.total() - mu.total();
}

inline constexpr double shift_tolerance = 1e-10;

// Record of one completed transformation. Construct through from_weights, or
// directly when the pieces come from elsewhere (the constructor re-checks them).
class BacklundStep
{
public:
    BacklundStep(PhaseConfig source, WeightVector mu, std::vector<cplx> t_tilde, std::vector<cplx> C, cplx c,
                 cplx u, cplx v)
        : source_(std::move(source)),
          mu_(std::move(mu)),
          t_tilde_(std::move(t_tilde)),
          C_(std::move(C)),
          c_(c),
          u_(u),
          v_(v)
    {
        if (std::abs(v_ - shift_relation(u_, source_.lambda(), mu_)) > shift_tolerance) {
            throw shift_mismatch("BacklundStep: v != u + sum(lambda - mu)");
        }
        const auto& lam = source_.lambda();
        const auto check = [](std::span<const cplx> got, const std::vector<cplx>& want, const char* what) {
            for (std::size_t k = 0; k < want.size(); ++k) {
                if (std::abs(got[k] - want[k]) > 1e-10 * std::max(1.0, std::abs(want[k]))) {
                    throw std::invalid_argument(std::string("BacklundStep: ") + what
                                                + " inconsistent with (lambda, mu, c)");
                }
            }
        };
        if (t_tilde_.size() != static_cast<std::size_t>(lam.size())
            || C_.size() != static_cast<std::size_t>(lam.size())) {
            throw std::invalid_argument("BacklundStep: size mismatch");
        }
        check(source_.t(), backlund_t(lam, mu_, c_), "t");
        check(t_tilde_, backlund_ttilde(lam, mu_, c_), "t_tilde");
        check(C_, backlund_C(lam, mu_), "C");
    }

    static BacklundStep from_weights(const WeightVector& lam, const WeightVector& mu, cplx c, cplx u)
    {
        PhaseConfig src(lam, backlund_t(lam, mu, c));
        return {std::move(src), mu, backlund_ttilde(lam, mu, c), backlund_C(lam, mu), c, u,
                shift_relation(u, lam, mu)};
    }

    const PhaseConfig& source() const { return source_; }
    const WeightVector& lambda() const { return source_.lambda(); }
    std::span<const cplx> t() const { return source_.t(); }
    const WeightVector& mu() const { return mu_; }
    std::span<const cplx> t_tilde() const { return t_tilde_; }
    std::span<const cplx> C() const { return C_; }
    cplx c() const { return c_; }
    cplx u() const { return u_; }
    cplx v() const { return v_; }
    PhaseConfig target() const { return {mu_, t_tilde_}; }

private:
    PhaseConfig source_;
    WeightVector mu_;
    std::vector<cplx> t_tilde_;
    std::vector<cplx> C_;
    cplx c_;
    cplx u_;
    cplx v_;
};

// L(z)_i^j = sum_k phibar(z-v-eta)^{k,j} phi(z-v)_i^k t_k, returned as [i][j].
inline cmatrix lax_classical(cplx z, const PhaseConfig& cfg, cplx v)
{
    const auto& lam = cfg.lambda();
    const int n = lam.size();
    const cplx eta = cfg.params().eta();
    cmatrix diag = cmatrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        diag(k, k) = cfg.t()[k];
    }
    return phi_matrix(z - v, lam).entries * diag * phi_inverse(z - v - eta, lam);
}

// L_{k',k}(z) = Phi_{z-v-eta}(lambda_kk' + eta/n) prod_l theta(lambda_lk' + eta/n)
//              / prod_{l != k} theta(lambda_lk) * t_k'.
// Evaluated as theta(w + lambda_kk' + eta/n)/theta(w) * prod_{l != k}(...) so that the
// l = k factor cancels the Phi denominator exactly.
inline cmatrix lax_gauge(cplx z, const WeightVector& lam, std::span<const cplx> t, cplx v)
{
    const auto& p = lam.params();
    const auto& torus = p.torus();
    const int n = lam.size();
    const cplx h = p.shift();
    const cplx w = z - v - p.eta();
    const cplx tw = detail::theta_checked(w, torus, "lax_gauge");
    cmatrix out(n, n);
    for (int kp = 0; kp < n; ++kp) {
        for (int k = 0; k < n; ++k) {
            cplx e = theta_odd(w + lam.diff(k, kp) + h, torus) / tw;
            for (int l = 0; l < n; ++l) {
                if (l != k) {
                    e *= theta_odd(lam.diff(l, kp) + h, torus) / theta_odd(lam.diff(l, k), torus);
                }
            }
            out(kp, k) = e * t[kp];
        }
    }
    return out;
}

inline cmatrix lax_gauge(cplx z, const PhaseConfig& cfg, cplx v)
{
    return lax_gauge(z, cfg.lambda(), cfg.t(), v);
}

// M_{k',k}(z) = Phi_{z-v-eta}(lambda_k - mu_k' + eta/n) prod_l theta(lambda_l - mu_k' + eta/n)
//              / prod_{l != k} theta(lambda_lk) * C_k'.
inline cmatrix m_matrix(cplx z, const WeightVector& lam, const WeightVector& mu, cplx u, cplx v)
{
    if (std::abs(v - shift_relation(u, lam, mu)) > shift_tolerance) {
        throw shift_mismatch("m_matrix: v != u + sum(lambda - mu)");
    }
    const auto& p = lam.params();
    const auto& torus = p.torus();
    const int n = lam.size();
    const cplx h = p.shift();
    const cplx w = z - v - p.eta();
    const cplx tw = detail::theta_checked(w, torus, "m_matrix");
    const auto C = backlund_C(lam, mu);
    cmatrix out(n, n);
    for (int kp = 0; kp < n; ++kp) {
        for (int k = 0; k < n; ++k) {
            cplx e = theta_odd(w + lam[k] - mu[kp] + h, torus) / tw;
            for (int l = 0; l < n; ++l) {
                if (l != k) {
                    e *= theta_odd(lam[l] - mu[kp] + h, torus) / theta_odd(lam.diff(l, k), torus);
                }
            }
            out(kp, k) = e * C[kp];
        }
    }
    return out;
}

namespace detail
{

inline double rel_maxnorm(const cmatrix& a, const cmatrix& b)
{
    const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / std::max(scale, 1e-300);
}

} // namespace detail

// s_mu(lambda_k + eta/n) = prod_l theta(lambda_k + eta/n - mu_l), k = 1..n.
inline cvector kernel_vector(const WeightVector& lam, const WeightVector& mu)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    cvector s(n);
    for (int k = 0; k < n; ++k) {
        s(k) = 1.0;
        for (int l = 0; l < n; ++l) {
            s(k) *= theta_odd(lam[k] + h - mu[l], torus);
        }
    }
    return s;
}

// Relative max-norm of M(z) L(z) - L~(z) M(z) in the gauge frame.
inline double lax_equation_residual(cplx z, const BacklundStep& step)
{
    const cmatrix l = lax_gauge(z, step.lambda(), step.t(), step.v());
    const cmatrix lt = lax_gauge(z, step.mu(), step.t_tilde(), step.v());
    const cmatrix m = m_matrix(z, step.lambda(), step.mu(), step.u(), step.v());
    return detail::rel_maxnorm(m * l, lt * m);
}

// max_k' |sum_k L(u)_{k',k} s_k - e^c s_k'| / max_k' |e^c s_k'|.
inline double eigenvector_residual(const BacklundStep& step)
{
    const cmatrix l = lax_gauge(step.u(), step.lambda(), step.t(), step.v());
    const cvector s = kernel_vector(step.lambda(), step.mu());
    const cvector want = std::exp(step.c()) * s;
    return (l * s - want).cwiseAbs().maxCoeff() / std::max(want.cwiseAbs().maxCoeff(), 1e-300);
}

// max_k' |sum_k M(u)_{k',k} s_k| / max(1, sum_k |M(u)_{k',k} s_k|). For n = 1, M(u) itself vanishes.
inline double kernel_residual(const BacklundStep& step)
{
    const cmatrix m = m_matrix(step.u(), step.lambda(), step.mu(), step.u(), step.v());
    const cvector s = kernel_vector(step.lambda(), step.mu());
    const cmatrix terms = m * s.asDiagonal();
    const double scale = terms.cwiseAbs().rowwise().sum().maxCoeff();
    return (m * s).cwiseAbs().maxCoeff() / std::max(scale, 1.0);
}

// phibar(w) L phi(w) with w = z - v - eta, transposed to [k'][k]: the gauge transformation
// applied to the factorized operator.
inline cmatrix gauge_transform(cplx z, const PhaseConfig& cfg, cplx v)
{
    const cplx w = z - v - cfg.params().eta();
    const cmatrix l = lax_classical(z, cfg, v);
    return (phi_inverse(w, cfg.lambda()) * l * phi_matrix(w, cfg.lambda()).entries).transpose();
}

inline double gauge_consistency_residual(cplx z, const PhaseConfig& cfg, cplx v)
{
    return detail::rel_maxnorm(gauge_transform(z, cfg, v), lax_gauge(z, cfg, v));
}

// Conjugation of L(z) = sum_k phibar(z)^{k,j} phi(z+eta)_i^k t_k (the v = -eta case)
// against theta(z + eta/n + lambda_kk')/theta(z) prod_{j != k} theta(lambda_jk' + eta/n)/theta(lambda_jk) t_k'.
inline double conjugation_residual(cplx z, const PhaseConfig& cfg)
{
    const auto& lam = cfg.lambda();
    const auto& p = lam.params();
    const auto& torus = p.torus();
    const int n = lam.size();
    const cplx h = p.shift();
    const cmatrix conj = gauge_transform(z, cfg, -p.eta());
    cmatrix shown(n, n);
    for (int kp = 0; kp < n; ++kp) {
        for (int k = 0; k < n; ++k) {
            cplx e = theta_odd(z + h + lam.diff(k, kp), torus) / theta_odd(z, torus);
            for (int j = 0; j < n; ++j) {
                if (j != k) {
                    e *= theta_odd(lam.diff(j, kp) + h, torus) / theta_odd(lam.diff(j, k), torus);
                }
            }
            shown(kp, k) = e * cfg.t()[kp];
        }
    }
    return detail::rel_maxnorm(conj, shown);
}

// |LHS - theta(z) prod_s theta(x_k' - y_s)| / (|LHS| + |RHS|) for
// sum_k theta(z + x_k'k - xi) prod_s theta(x_k - y_s + xi) prod_{l != k} theta(x_k'l - xi)/theta(x_kl),
// z = n xi + sum_k (x_k - y_k).
inline double ks_identity_residual(std::span<const cplx> x, std::span<const cplx> y, cplx xi, int kprime,
                                   const TorusParams& torus)
{
    const int n = static_cast<int>(x.size());
    if (static_cast<int>(y.size()) != n || kprime < 0 || kprime >= n) {
        throw std::invalid_argument("ks_identity_residual: bad sizes");
    }
    cplx z = static_cast<double>(n) * xi;
    for (int k = 0; k < n; ++k) {
        z += x[k] - y[k];
    }
    cplx lhs{};
    for (int k = 0; k < n; ++k) {
        cplx term = theta_odd(z + x[kprime] - x[k] - xi, torus);
        for (int s = 0; s < n; ++s) {
            term *= theta_odd(x[k] - y[s] + xi, torus);
        }
        for (int l = 0; l < n; ++l) {
            if (l != k) {
                term *= theta_odd(x[kprime] - x[l] - xi, torus)
                    / detail::theta_checked(x[k] - x[l], torus, "ks_identity");
            }
        }
        lhs += term;
    }
    cplx rhs = theta_odd(z, torus);
    for (int s = 0; s < n; ++s) {
        rhs *= theta_odd(x[kprime] - y[s], torus);
    }
    return std::abs(lhs - rhs) / std::max(std::abs(lhs) + std::abs(rhs), 1e-300);
}

// F(lambda, mu) = sum_{k,k'} [S(lambda_k - mu_k' + eta/n) - S(lambda_k - mu_k')]
//               - 1/2 sum_{k != k'} [S(mu_kk' + eta/n) - S(mu_kk' - eta/n)]
//               + c (u + sum_k (lambda_k - mu_k)),      S(x) = int_{1/2}^x log theta.
// The mu-mu term carries the sign for which exp(-dF/dmu_k) reproduces t~_k.
inline cplx generating_function(const WeightVector& lam, const WeightVector& mu, cplx c, cplx u)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    const auto S = [&](cplx x) { return log_theta_integral(x, torus); };
    cplx f{};
    for (int k = 0; k < n; ++k) {
        for (int kp = 0; kp < n; ++kp) {
            f += S(lam[k] - mu[kp] + h) - S(lam[k] - mu[kp]);
            if (k != kp) {
                f -= 0.5 * (S(mu.diff(k, kp) + h) - S(mu.diff(k, kp) - h));
            }
        }
    }
    return f + c * shift_relation(u, lam, mu);
}

} // namespace rsb

#endif
