#ifndef RSB_IDENTITY_SUITE_HPP
#define RSB_IDENTITY_SUITE_HPP

// Randomized checks of the theta identities. Every check evaluates the two sides along
// separate call paths and reports the worst residual over its draws.

#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "belavin.hpp"
#include "discrete_flow.hpp"

namespace rsb
{

struct IdentityReport {
    std::string name;
    int draws = 0;
    double max_residual = 0.0;
    std::string worst_params = "{}";
    std::uint64_t seed = 0;
    double tol = 0.0;
    bool passed = false;
    std::string note;
};

// Model point for a check. n is ignored by torus-only identities.
struct SuiteCase {
    int n = 2;
    cplx tau{0.0, 1.0};
    cplx eta{0.23, 0.0};

    ModelParams model() const { return {n, eta, TorusParams(tau)}; }
    TorusParams torus() const { return TorusParams(tau); }
};

inline constexpr double denominator_clearance = 0.02;
inline constexpr int max_rejections_per_draw = 1000;

namespace detail
{

inline double rel(cplx a, cplx b)
{
    return std::abs(a - b) / (std::abs(a) + std::abs(b) + 1e-300);
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline nlohmann::json cjson(cplx z)
{
    return nlohmann::json::array({z.real(), z.imag()});
}

inline nlohmann::json cjson(std::span<const cplx> v)
{
    auto out = nlohmann::json::array();
    for (const auto& z : v) {
        out.push_back(cjson(z));
    }
    return out;
}

// Uniform draws in the centered fundamental cell, u + v tau with u, v in [-1/2, 1/2).
class Sampler
{
public:
    Sampler(std::uint64_t seed, const TorusParams& torus) : rng_(seed), torus_(torus) {}

    cplx point() { return (unit_(rng_) - 0.5) + (unit_(rng_) - 0.5) * torus_.tau(); }

    std::vector<cplx> points(int n)
    {
        std::vector<cplx> v(static_cast<std::size_t>(n));
        for (auto& x : v) {
            x = point();
        }
        return v;
    }

    double real(double lo, double hi) { return lo + (hi - lo) * unit_(rng_); }
    int index(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }

    bool clear(cplx x) const { return torus_.lattice_distance(x) >= denominator_clearance; }

    const TorusParams& torus() const { return torus_; }

private:
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    TorusParams torus_;
};

struct Sample {
    double residual;
    nlohmann::json params;
};

// Draws until `draws` admissible samples are evaluated. The body returns nullopt to reject.
inline IdentityReport run_check(std::string name, int draws, std::uint64_t seed, double tol, const TorusParams& torus,
                                const std::function<std::optional<Sample>(Sampler&)>& body)
{
    IdentityReport rep;
    rep.name = std::move(name);
    rep.seed = seed;
    rep.tol = tol;
    Sampler s(seed, torus);
    nlohmann::json worst = nlohmann::json::object();
    long rejected = 0;
    const long budget = static_cast<long>(max_rejections_per_draw) * std::max(draws, 1);
    while (rep.draws < draws) {
        std::optional<Sample> got;
        try {
            got = body(s);
        } catch (const error&) {
            got.reset();
        }
        if (!got) {
            if (++rejected > budget) {
                rep.note = "rejection budget exhausted";
                rep.max_residual = std::numeric_limits<double>::infinity();
                break;
            }
            continue;
        }
        ++rep.draws;
        const double r = std::isfinite(got->residual) ? got->residual : std::numeric_limits<double>::infinity();
        if (rep.draws == 1 || r > rep.max_residual) {
            rep.max_residual = r;
            worst = std::move(got->params);
        }
    }
    rep.worst_params = worst.dump();
    rep.passed = rep.max_residual < tol;
    return rep;
}

inline std::string case_label(const SuiteCase& sc, bool with_n, bool with_eta)
{
    char buf[160];
    std::string out;
    if (with_n) {
        std::snprintf(buf, sizeof buf, " n=%d", sc.n);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, " tau=%g%+gi", sc.tau.real(), sc.tau.imag());
    out += buf;
    if (with_eta) {
        std::snprintf(buf, sizeof buf, " eta=%g%+gi", sc.eta.real(), sc.eta.imag());
        out += buf;
    }
    return out;
}

inline bool all_clear(const Sampler& s, std::initializer_list<cplx> xs)
{
    return std::all_of(xs.begin(), xs.end(), [&](cplx x) { return s.clear(x); });
}

inline bool pairwise_clear(const Sampler& s, std::span<const cplx> v)
{
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
            if (!s.clear(v[i] - v[j])) {
                return false;
            }
        }
    }
    return true;
}

} // namespace detail

// Phi_z(x) Phi_z(y) theta'(0) = Phi_z(x+y) (zeta(z) + zeta(x) + zeta(y) - zeta(z+x+y)).
inline IdentityReport check_functional_relation(int draws, std::uint64_t seed, const SuiteCase& sc = {},
                                                double tol = 1e-9)
{
    const auto torus = sc.torus();
    const cplx d0 = theta_odd_prime_zero(torus);
    return detail::run_check(
        "functional_relation" + detail::case_label(sc, false, false), draws, seed, tol, torus,
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const cplx z = s.point();
            const cplx x = s.point();
            const cplx y = s.point();
            if (!detail::all_clear(s, {z, x, y, x + y, z + x + y})) {
                return std::nullopt;
            }
            const cplx lhs = phi_kernel(z, x, torus) * phi_kernel(z, y, torus) * d0;
            const cplx rhs = phi_kernel(z, x + y, torus)
                * (zeta_log(z, torus) + zeta_log(x, torus) + zeta_log(y, torus) - zeta_log(z + x + y, torus));
            return detail::Sample{detail::rel(lhs, rhs),
                                  {{"z", detail::cjson(z)}, {"x", detail::cjson(x)}, {"y", detail::cjson(y)}}};
        });
}

// theta'(0) prod_i theta(z - x_i)/theta(z - y_i)
//   = sum_i (zeta(z - y_i) - zeta(x - y_i)) prod_j theta(y_i - x_j) / prod_{j != i} theta(y_ij),
// x = x_1, sum(x_i - y_i) = 0 enforced through x_N.
inline IdentityReport check_lagrange(int N, int draws, std::uint64_t seed, const SuiteCase& sc = {},
                                     double tol = 1e-9)
{
    const auto torus = sc.torus();
    const std::string name = "lagrange N=" + std::to_string(N) + detail::case_label(sc, false, false);
    if (N == 1) {
        // x_1 = y_1 is forced: both sides degenerate (1 against 0/0).
        IdentityReport rep{name, draws, 0.0, "{}", seed, tol, true, "degenerate case N=1: x_1 = y_1 forced"};
        return rep;
    }
    const cplx d0 = theta_odd_prime_zero(torus);
    return detail::run_check(name, draws, seed, tol, torus, [&](detail::Sampler& s) -> std::optional<detail::Sample> {
        auto xs = s.points(N);
        const auto ys = s.points(N);
        const cplx z = s.point();
        cplx shift{};
        for (int i = 0; i < N; ++i) {
            shift += ys[i] - xs[i];
        }
        xs[N - 1] += shift;
        if (!detail::pairwise_clear(s, ys)) {
            return std::nullopt;
        }
        for (int i = 0; i < N; ++i) {
            if (!detail::all_clear(s, {z - ys[i], xs[0] - ys[i]})) {
                return std::nullopt;
            }
        }
        cplx lhs = d0;
        for (int i = 0; i < N; ++i) {
            lhs *= theta_odd(z - xs[i], torus) / theta_odd(z - ys[i], torus);
        }
        cplx rhs{};
        for (int i = 0; i < N; ++i) {
            cplx term = zeta_log(z - ys[i], torus) - zeta_log(xs[0] - ys[i], torus);
            for (int j = 0; j < N; ++j) {
                term *= theta_odd(ys[i] - xs[j], torus);
                if (j != i) {
                    term /= theta_odd(ys[i] - ys[j], torus);
                }
            }
            rhs += term;
        }
        return detail::Sample{detail::rel(lhs, rhs),
                              {{"x", detail::cjson(xs)}, {"y", detail::cjson(ys)}, {"z", detail::cjson(z)}}};
    });
}

// sum_i prod_j theta(y_i - x_j) / prod_{j != i} theta(y_ij) = 0 when sum(x - y) = 0.
// Reported as |sum| / max(1, sum of |terms|).
inline IdentityReport check_null_sum(int N, int draws, std::uint64_t seed, const SuiteCase& sc = {},
                                     double tol = 1e-9)
{
    const auto torus = sc.torus();
    return detail::run_check(
        "null_sum N=" + std::to_string(N) + detail::case_label(sc, false, false), draws, seed, tol, torus,
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            auto xs = s.points(N);
            const auto ys = s.points(N);
            cplx shift{};
            for (int i = 0; i < N; ++i) {
                shift += ys[i] - xs[i];
            }
            xs[N - 1] += shift;
            if (!detail::pairwise_clear(s, ys)) {
                return std::nullopt;
            }
            cplx sum{};
            double scale = 0.0;
            for (int i = 0; i < N; ++i) {
                cplx term = 1.0;
                for (int j = 0; j < N; ++j) {
                    term *= theta_odd(ys[i] - xs[j], torus);
                    if (j != i) {
                        term /= theta_odd(ys[i] - ys[j], torus);
                    }
                }
                sum += term;
                scale += std::abs(term);
            }
            return detail::Sample{std::abs(sum) / std::max(1.0, scale),
                                  {{"x", detail::cjson(xs)}, {"y", detail::cjson(ys)}}};
        });
}

// The three lemma identities, with
//   A_j = prod_{m != j} theta(y_jm - xi)/theta(y_jm) prod_s theta(x_s - y_j - xi)/theta(x_s - y_j)
//   B_j = prod_{m != j} theta(x_jm + xi)/theta(x_jm) prod_s theta(x_j - y_s - xi)/theta(x_j - y_s):
//   idphi: sum_j Phi_z(y_ij + xi) Phi_z(y_j - x_k + xi) A_j = sum_j Phi_z(y_i - x_j + xi) Phi_z(x_jk + xi) B_j
//   one:   same with Phi_z(a) Phi_z(b) replaced by zeta(a) + zeta(b)
//   two:   sum_j A_j = sum_j B_j
inline std::vector<IdentityReport> check_lemma(int N, int draws, std::uint64_t seed, const SuiteCase& sc = {},
                                               double tol = 1e-9)
{
    const auto torus = sc.torus();
    const std::string label = " N=" + std::to_string(N) + detail::case_label(sc, false, false);
    // Fixed small xi probes the xi -> 0 regime of "two".
    struct Part {
        const char* name;
        int which;
    };
    std::vector<IdentityReport> out;
    for (const Part part : {Part{"lemma_idphi", 0}, Part{"lemma_one", 1}, Part{"lemma_two", 2}}) {
        out.push_back(detail::run_check(
            part.name + label, draws, seed, tol, torus, [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                const auto xs = s.points(N);
                const auto ys = s.points(N);
                const cplx xi = s.point();
                const cplx z = s.point();
                const int i = s.index(N);
                const int k = s.index(N);
                if (!detail::pairwise_clear(s, xs) || !detail::pairwise_clear(s, ys) || !s.clear(z)) {
                    return std::nullopt;
                }
                for (int a = 0; a < N; ++a) {
                    for (int b = 0; b < N; ++b) {
                        if (!detail::all_clear(s, {xs[a] - ys[b], ys[a] - ys[b] + xi, ys[a] - xs[b] + xi,
                                                   xs[a] - xs[b] + xi})) {
                            return std::nullopt;
                        }
                    }
                }
                const auto A = [&](int j) {
                    cplx v = 1.0;
                    for (int m = 0; m < N; ++m) {
                        if (m != j) {
                            v *= theta_odd(ys[j] - ys[m] - xi, torus) / theta_odd(ys[j] - ys[m], torus);
                        }
                    }
                    for (int q = 0; q < N; ++q) {
                        v *= theta_odd(xs[q] - ys[j] - xi, torus) / theta_odd(xs[q] - ys[j], torus);
                    }
                    return v;
                };
                const auto B = [&](int j) {
                    cplx v = 1.0;
                    for (int m = 0; m < N; ++m) {
                        if (m != j) {
                            v *= theta_odd(xs[j] - xs[m] + xi, torus) / theta_odd(xs[j] - xs[m], torus);
                        }
                    }
                    for (int q = 0; q < N; ++q) {
                        v *= theta_odd(xs[j] - ys[q] - xi, torus) / theta_odd(xs[j] - ys[q], torus);
                    }
                    return v;
                };
                const auto pair = [&](cplx a, cplx b) -> cplx {
                    switch (part.which) {
                    case 0:
                        return phi_kernel(z, a, torus) * phi_kernel(z, b, torus);
                    case 1:
                        return zeta_log(a, torus) + zeta_log(b, torus);
                    default:
                        return 1.0;
                    }
                };
                cplx lhs{};
                cplx rhs{};
                for (int j = 0; j < N; ++j) {
                    lhs += pair(ys[i] - ys[j] + xi, ys[j] - xs[k] + xi) * A(j);
                    rhs += pair(ys[i] - xs[j] + xi, xs[j] - xs[k] + xi) * B(j);
                }
                return detail::Sample{detail::rel(lhs, rhs),
                                      {{"x", detail::cjson(xs)},
                                       {"y", detail::cjson(ys)},
                                       {"xi", detail::cjson(xi)},
                                       {"z", detail::cjson(z)},
                                       {"i", i},
                                       {"k", k}}};
            }));
    }
    return out;
}

// (phibar_lambda(w) phi_lambda(w + eta))_{k,k'}
//   = prod_{m != k'} theta(lambda_k'm) / prod_{m != k} theta(lambda_mk)
//     * prod_l theta(lambda_lk' + eta/n) / theta(lambda_kl + eta/n)
//     * (phibar_{-lambda}(w) phi_{-lambda}(w + eta))_{k',k}
inline IdentityReport check_commute(int draws, std::uint64_t seed, const SuiteCase& sc = {}, double tol = 1e-8)
{
    const auto p = sc.model();
    const int n = p.n();
    const cplx h = p.shift();
    return detail::run_check(
        "commute" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const auto lv = s.points(n);
            const cplx w = s.point();
            if (!detail::pairwise_clear(s, lv) || !s.clear(w) || !s.clear(w + p.eta())) {
                return std::nullopt;
            }
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    if (!s.clear(lv[a] - lv[b] + h)) {
                        return std::nullopt;
                    }
                }
            }
            const WeightVector lam(lv, p);
            const WeightVector neg = lam.negated();
            const cmatrix left = phi_inverse(w, lam) * phi_matrix(w + p.eta(), lam).entries;
            const cmatrix right = phi_inverse(w, neg) * phi_matrix(w + p.eta(), neg).entries;
            const auto& torus = p.torus();
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                for (int kp = 0; kp < n; ++kp) {
                    cplx pre = 1.0;
                    for (int m = 0; m < n; ++m) {
                        if (m != kp) {
                            pre *= theta_odd(lam.diff(kp, m), torus);
                        }
                        if (m != k) {
                            pre /= theta_odd(lam.diff(m, k), torus);
                        }
                        pre *= theta_odd(lam.diff(m, kp) + h, torus) / theta_odd(lam.diff(k, m) + h, torus);
                    }
                    worst = std::max(worst, detail::rel(left(k, kp), pre * right(kp, k)));
                }
            }
            return detail::Sample{worst, {{"lambda", detail::cjson(lv)}, {"w", detail::cjson(w)}}};
        });
}

// det(theta_r(z_j)) against theta(sum z) prod_{i<j} theta(z_i - z_j) / (i eta_D)^((n-1)(n-2)/2).
inline IdentityReport check_det_formula(int n, int draws, std::uint64_t seed, const SuiteCase& sc = {},
                                        double tol = 1e-9)
{
    SuiteCase c = sc;
    c.n = n;
    const auto p = c.model();
    return detail::run_check("det_formula" + detail::case_label(c, true, false), draws, seed, tol, p.torus(),
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 const auto zs = s.points(n);
                                 cplx sum{};
                                 for (auto z : zs) {
                                     sum += z;
                                 }
                                 if (!detail::pairwise_clear(s, zs) || !s.clear(sum)) {
                                     return std::nullopt;
                                 }
                                 const cplx lhs = theta_level_det(zs, p);
                                 const cplx rhs = theta_level_det_closed_form(zs, p);
                                 return detail::Sample{detail::rel(lhs, rhs), {{"z", detail::cjson(zs)}}};
                             });
}

inline IdentityReport check_inverse(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-10)
{
    const auto p = sc.model();
    const int n = p.n();
    return detail::run_check("inverse" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 const auto lv = s.points(n);
                                 const cplx z = s.point();
                                 if (!detail::pairwise_clear(s, lv) || !s.clear(z)) {
                                     return std::nullopt;
                                 }
                                 const WeightVector lam(lv, p);
                                 const cmatrix ph = phi_matrix(z, lam).entries;
                                 const cmatrix pb = phi_inverse(z, lam);
                                 const cmatrix id = cmatrix::Identity(n, n);
                                 const double r = std::max((ph * pb - id).cwiseAbs().maxCoeff(),
                                                           (pb * ph - id).cwiseAbs().maxCoeff());
                                 return detail::Sample{r, {{"lambda", detail::cjson(lv)}, {"z", detail::cjson(z)}}};
                             });
}

inline IdentityReport check_cross_sum(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-9)
{
    const auto p = sc.model();
    const int n = p.n();
    return detail::run_check(
        "cross_sum" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const auto lv = s.points(n);
            const auto mv = s.points(n);
            const cplx z = s.point();
            const cplx u = s.point();
            if (!detail::pairwise_clear(s, lv) || !detail::pairwise_clear(s, mv) || !s.clear(z)) {
                return std::nullopt;
            }
            const WeightVector lam(lv, p);
            const WeightVector mu(mv, p);
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                for (int k2 = 0; k2 < n; ++k2) {
                    worst = std::max(worst, cross_sum_residual(z, u, lam, mu, k, k2));
                }
            }
            return detail::Sample{worst,
                                  {{"lambda", detail::cjson(lv)},
                                   {"mu", detail::cjson(mv)},
                                   {"z", detail::cjson(z)},
                                   {"u", detail::cjson(u)}}};
        });
}

inline IdentityReport check_det_phi(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-9)
{
    const auto p = sc.model();
    const int n = p.n();
    return detail::run_check("det_phi" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 const auto lv = s.points(n);
                                 const cplx z = s.point();
                                 if (!detail::pairwise_clear(s, lv) || !s.clear(z)) {
                                     return std::nullopt;
                                 }
                                 const WeightVector lam(lv, p);
                                 const cplx lhs = phi_matrix(z, lam).entries.determinant();
                                 const cplx rhs = det_phi_closed_form(z, lam);
                                 return detail::Sample{detail::rel(lhs, rhs),
                                                       {{"lambda", detail::cjson(lv)}, {"z", detail::cjson(z)}}};
                             });
}

// sum_m phibar(eta)^{k,m} theta_m((Lambda + eta)/n - x)
//   = i eta_D theta(eta + lambda_k - x)/theta(eta) prod_{l != k} theta(lambda_l - x)/theta(lambda_lk)
inline IdentityReport check_phibar_eta(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-9)
{
    const auto p = sc.model();
    const int n = p.n();
    const auto& torus = p.torus();
    return detail::run_check(
        "phibar_eta" + detail::case_label(sc, true, true), draws, seed, tol, torus,
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const auto lv = s.points(n);
            const cplx x = s.point();
            if (!detail::pairwise_clear(s, lv)) {
                return std::nullopt;
            }
            const WeightVector lam(lv, p);
            const cmatrix pb = phi_inverse(p.eta(), lam);
            const cplx arg = (lam.total() + p.eta()) / static_cast<double>(n) - x;
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                cplx lhs{};
                for (int m = 0; m < n; ++m) {
                    lhs += pb(k, m) * theta_level(m, arg, p);
                }
                cplx rhs = p.norm() * theta_odd(p.eta() + lam[k] - x, torus) / theta_odd(p.eta(), torus);
                for (int l = 0; l < n; ++l) {
                    if (l != k) {
                        rhs *= theta_odd(lam[l] - x, torus) / theta_odd(lam.diff(l, k), torus);
                    }
                }
                worst = std::max(worst, detail::rel(lhs, rhs));
            }
            return detail::Sample{worst, {{"lambda", detail::cjson(lv)}, {"x", detail::cjson(x)}}};
        });
}

// sum_j phitilde(0)^{k,j} theta_j(Lambda/n - x) = i eta_D prod_l theta(lambda_l - x) / prod_{l != k} theta(lambda_lk).
// phitilde(0) is a contour mean rather than an exact limit, hence the 1e-8 gate.
inline IdentityReport check_phi_tilde0(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-8)
{
    const auto p = sc.model();
    const int n = p.n();
    const auto& torus = p.torus();
    return detail::run_check(
        "phi_tilde0" + detail::case_label(sc, true, true), draws, seed, tol, torus,
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const auto lv = s.points(n);
            const cplx x = s.point();
            if (!detail::pairwise_clear(s, lv)) {
                return std::nullopt;
            }
            for (auto l : lv) {
                if (!s.clear(l - x)) {
                    return std::nullopt;
                }
            }
            const WeightVector lam(lv, p);
            const cmatrix pt = phi_tilde0(lam);
            const cplx arg = lam.total() / static_cast<double>(n) - x;
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                cplx lhs{};
                for (int j = 0; j < n; ++j) {
                    lhs += pt(k, j) * theta_level(j, arg, p);
                }
                cplx rhs = p.norm();
                for (int l = 0; l < n; ++l) {
                    rhs *= theta_odd(lam[l] - x, torus);
                    if (l != k) {
                        rhs /= theta_odd(lam.diff(l, k), torus);
                    }
                }
                worst = std::max(worst, detail::rel(lhs, rhs));
            }
            return detail::Sample{worst, {{"lambda", detail::cjson(lv)}, {"x", detail::cjson(x)}}};
        });
}

inline IdentityReport check_ks(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-9)
{
    const auto torus = sc.torus();
    const int n = sc.n;
    return detail::run_check("ks" + detail::case_label(sc, true, false), draws, seed, tol, torus,
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 const auto xs = s.points(n);
                                 const auto ys = s.points(n);
                                 const cplx xi = s.point();
                                 if (!detail::pairwise_clear(s, xs)) {
                                     return std::nullopt;
                                 }
                                 double worst = 0.0;
                                 for (int kp = 0; kp < n; ++kp) {
                                     worst = std::max(worst, ks_identity_residual(xs, ys, xi, kp, torus));
                                 }
                                 return detail::Sample{worst,
                                                       {{"x", detail::cjson(xs)},
                                                        {"y", detail::cjson(ys)},
                                                        {"xi", detail::cjson(xi)}}};
                             });
}

namespace detail
{

// Random generic Backlund data (lambda, mu, c, u) and a spectral point z.
inline std::optional<std::pair<BacklundStep, cplx>> draw_step(Sampler& s, const ModelParams& p, nlohmann::json& rec)
{
    const int n = p.n();
    const cplx h = p.shift();
    const auto lv = s.points(n);
    const auto mv = s.points(n);
    const cplx c{s.real(-0.5, 0.5), s.real(-0.5, 0.5)};
    const cplx u = s.point();
    const cplx z = s.point();
    if (!pairwise_clear(s, lv) || !pairwise_clear(s, mv)) {
        return std::nullopt;
    }
    cplx sum{};
    for (int a = 0; a < n; ++a) {
        sum += lv[a] - mv[a];
        for (int b = 0; b < n; ++b) {
            if (!all_clear(s, {lv[a] - mv[b], mv[a] - mv[b] + h})) {
                return std::nullopt;
            }
        }
    }
    // w = z - v - eta at z = u and at the sampled z.
    if (!all_clear(s, {sum + p.eta(), z - u - sum - p.eta()})) {
        return std::nullopt;
    }
    rec = {{"lambda", cjson(lv)}, {"mu", cjson(mv)}, {"c", cjson(c)}, {"u", cjson(u)}, {"z", cjson(z)}};
    return std::make_pair(BacklundStep::from_weights(WeightVector(lv, p), WeightVector(mv, p), c, u), z);
}

} // namespace detail

enum class step_residual { eigenvector, kernel, lax };

inline IdentityReport check_backlund(step_residual which, int draws, std::uint64_t seed, const SuiteCase& sc,
                                     double tol = 1e-8)
{
    const auto p = sc.model();
    const char* base = which == step_residual::eigenvector ? "eigenvector" : which == step_residual::kernel ? "kernel"
                                                                                                            : "lax";
    return detail::run_check(std::string(base) + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 nlohmann::json rec;
                                 const auto got = detail::draw_step(s, p, rec);
                                 if (!got) {
                                     return std::nullopt;
                                 }
                                 const auto& [st, z] = *got;
                                 double r = 0.0;
                                 switch (which) {
                                 case step_residual::eigenvector:
                                     r = eigenvector_residual(st);
                                     break;
                                 case step_residual::kernel:
                                     r = kernel_residual(st);
                                     break;
                                 case step_residual::lax:
                                     r = lax_equation_residual(z, st);
                                     break;
                                 }
                                 return detail::Sample{r, std::move(rec)};
                             });
}

// Gauge form against the conjugated factorized operator, at v = -eta and at a random v.
inline IdentityReport check_conjl(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-9)
{
    const auto p = sc.model();
    const int n = p.n();
    return detail::run_check(
        "conjl" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
        [&](detail::Sampler& s) -> std::optional<detail::Sample> {
            const auto lv = s.points(n);
            std::vector<cplx> t(static_cast<std::size_t>(n));
            for (auto& x : t) {
                x = cplx{s.real(0.5, 2.0), s.real(-1.0, 1.0)};
            }
            const cplx z = s.point();
            const cplx v = s.point();
            if (!detail::pairwise_clear(s, lv) || !detail::all_clear(s, {z, z + p.eta(), z - v, z - v - p.eta()})) {
                return std::nullopt;
            }
            const PhaseConfig cfg(WeightVector(lv, p), t);
            const double r = std::max(conjugation_residual(z, cfg), gauge_consistency_residual(z, cfg, v));
            return detail::Sample{r,
                                  {{"lambda", detail::cjson(lv)},
                                   {"t", detail::cjson(t)},
                                   {"z", detail::cjson(z)},
                                   {"v", detail::cjson(v)}}};
        });
}

inline IdentityReport check_ybe(int draws, std::uint64_t seed, const SuiteCase& sc, double tol = 1e-8)
{
    const auto p = sc.model();
    return detail::run_check("ybe" + detail::case_label(sc, true, true), draws, seed, tol, p.torus(),
                             [&](detail::Sampler& s) -> std::optional<detail::Sample> {
                                 const cplx z = s.point();
                                 const cplx w = s.point();
                                 return detail::Sample{ybe_residual(z, w, p),
                                                       {{"z", detail::cjson(z)}, {"w", detail::cjson(w)}}};
                             });
}

struct SuiteConfig {
    std::uint64_t seed = 42;
    int draws = 50;
    std::optional<double> tol;
    std::vector<int> ns{1, 2, 3, 4};
    std::vector<cplx> taus{{0.0, 1.0}, {0.0, 1.5}, {0.3, 1.2}};
    std::vector<cplx> etas{{0.23, 0.0}, {0.1, 0.05}};
    int threads = 0; // 0: hardware concurrency, capped by RS_BACKLUND_THREADS
};

inline int suite_threads(int requested)
{
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RS_BACKLUND_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) {
            n = std::min(n, cap);
        }
    }
    return std::max(n, 1);
}

// Every check over the configured grid. Report order is fixed by the task list, not by
// completion order, and each task seeds its own generator from (seed, task name).
inline std::vector<IdentityReport> run_all(const SuiteConfig& cfg)
{
    using task = std::function<std::vector<IdentityReport>(std::uint64_t)>;
    std::vector<std::pair<std::string, task>> tasks;
    const auto add = [&](std::string key, task fn) { tasks.emplace_back(std::move(key), std::move(fn)); };
    const auto one = [](auto fn) {
        return [fn](std::uint64_t s) { return std::vector<IdentityReport>{fn(s)}; };
    };
    const int d = cfg.draws;
    for (const cplx tau : cfg.taus) {
        const SuiteCase base{2, tau, cfg.etas.empty() ? cplx{0.23} : cfg.etas.front()};
        const std::string tl = detail::case_label(base, false, false);
        add("functional_relation" + tl, one([=](auto s) { return check_functional_relation(d, s, base); }));
        for (const int n : cfg.ns) {
            SuiteCase sn = base;
            sn.n = n;
            const std::string nl = detail::case_label(sn, true, false);
            add("lagrange" + nl, one([=](auto s) { return check_lagrange(n, d, s, sn); }));
            add("null_sum" + nl, one([=](auto s) { return check_null_sum(n, d, s, sn); }));
            add("lemma" + nl, [=](auto s) { return check_lemma(n, d, s, sn); });
            add("det_formula" + nl, one([=](auto s) { return check_det_formula(n, d, s, sn); }));
            add("ks" + nl, one([=](auto s) { return check_ks(d, s, sn); }));
            for (const cplx eta : cfg.etas) {
                SuiteCase sc = sn;
                sc.eta = eta;
                const std::string el = detail::case_label(sc, true, true);
                add("inverse" + el, one([=](auto s) { return check_inverse(d, s, sc); }));
                add("cross_sum" + el, one([=](auto s) { return check_cross_sum(d, s, sc); }));
                add("det_phi" + el, one([=](auto s) { return check_det_phi(d, s, sc); }));
                add("phibar_eta" + el, one([=](auto s) { return check_phibar_eta(d, s, sc); }));
                add("phi_tilde0" + el, one([=](auto s) { return check_phi_tilde0(d, s, sc); }));
                add("commute" + el, one([=](auto s) { return check_commute(d, s, sc); }));
                add("conjl" + el, one([=](auto s) { return check_conjl(d, s, sc); }));
                add("eigenvector" + el,
                    one([=](auto s) { return check_backlund(step_residual::eigenvector, d, s, sc); }));
                add("kernel" + el, one([=](auto s) { return check_backlund(step_residual::kernel, d, s, sc); }));
                add("lax" + el, one([=](auto s) { return check_backlund(step_residual::lax, d, s, sc); }));
                if (n <= 3) {
                    add("ybe" + el, one([=](auto s) { return check_ybe(d, s, sc); }));
                }
            }
        }
    }

    std::vector<std::vector<IdentityReport>> results(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const std::uint64_t s = detail::splitmix(cfg.seed ^ detail::fnv1a(tasks[i].first));
            results[i] = tasks[i].second(s);
        }
    };
    const int nt = std::min<int>(suite_threads(cfg.threads), static_cast<int>(tasks.size()));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < nt; ++i) {
            pool.emplace_back(worker);
        }
    }

    std::vector<IdentityReport> out;
    for (auto& r : results) {
        for (auto& rep : r) {
            if (cfg.tol) {
                rep.tol = *cfg.tol;
                rep.passed = rep.max_residual < rep.tol;
            }
            out.push_back(std::move(rep));
        }
    }
    return out;
}

} // namespace rsb

#endif
