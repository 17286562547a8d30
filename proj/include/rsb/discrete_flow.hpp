#ifndef RSB_DISCRETE_FLOW_HPP
#define RSB_DISCRETE_FLOW_HPP

// The Backlund map as discrete time: lambda(a+1) solves
//   t_k(a) = e^{c(a)} prod_s theta(lambda_k(a) - lambda_s(a+1) + eta/n) / theta(lambda_k(a) - lambda_s(a+1))
// and t(a+1) is t~ of that step.

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "rs_lax.hpp"

namespace rsb
{

struct SolverConfig {
    double tol = 1e-11;
    int max_iter = 50;
    double damping = 1.0;
    int multistart = 5;
    std::uint64_t seed = 0;
    bool fd_jacobian = false;

    void validate() const
    {
        if (!(tol > 0.0)) {
            throw std::invalid_argument("SolverConfig: tol must be > 0");
        }
        if (max_iter < 1) {
            throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
        }
        if (!(damping > 0.0 && damping <= 1.0)) {
            throw std::invalid_argument("SolverConfig: damping must lie in (0, 1]");
        }
        if (multistart < 0) {
            throw std::invalid_argument("SolverConfig: multistart must be >= 0");
        }
    }
};

// Best matching of b onto a: returns perm with b[perm[i]] paired to a[i], minimizing the
// summed lattice distance. Exhaustive for n <= 8, greedy above.
inline std::vector<int> nearest_assignment(std::span<const cplx> a, std::span<const cplx> b, const TorusParams& torus)
{
    const int n = static_cast<int>(a.size());
    std::vector<std::vector<double>> d(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            d[i][j] = torus.lattice_distance(a[i] - b[j]);
        }
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    if (n <= 8) {
        auto best = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (int i = 0; i < n && cost < best_cost; ++i) {
                cost += d[i][perm[i]];
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    for (int round = 0; round < n; ++round) {
        int bi = -1;
        int bj = -1;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (!done[i] && !used[j] && (bi < 0 || d[i][j] < d[bi][bj])) {
                    bi = i;
                    bj = j;
                }
            }
        }
        done[bi] = true;
        used[bj] = true;
        perm[bi] = bj;
    }
    return perm;
}

// max_i dist(a_i, b_perm(i)) after matching, distances taken mod the lattice.
inline double matched_distance(std::span<const cplx> a, std::span<const cplx> b, const TorusParams& torus)
{
    const auto perm = nearest_assignment(a, b, torus);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, torus.lattice_distance(a[i] - b[perm[i]]));
    }
    return worst;
}

namespace detail
{

inline cvector forward_t(const WeightVector& lam, const std::vector<cplx>& mu, cplx c)
{
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    const int n = lam.size();
    cvector f(n);
    for (int k = 0; k < n; ++k) {
        f(k) = std::exp(c);
        for (int s = 0; s < n; ++s) {
            const cplx d = lam[k] - mu[s];
            f(k) *= theta_odd(d + h, torus) / theta_checked(d, torus, "solve_next");
        }
    }
    return f;
}

inline double relative_residual(const cvector& f, std::span<const cplx> t)
{
    // std::max would silently drop a NaN component, so test each one.
    double r = 0.0;
    for (int k = 0; k < f.size(); ++k) {
        const double e = std::abs(f(k) - t[k]) / std::abs(t[k]);
        if (!std::isfinite(e)) {
            return std::numeric_limits<double>::infinity();
        }
        r = std::max(r, e);
    }
    return r;
}

inline cmatrix forward_jacobian(const WeightVector& lam, const std::vector<cplx>& mu, const cvector& f, cplx c,
                                bool finite_difference)
{
    const int n = lam.size();
    cmatrix jac(n, n);
    if (finite_difference) {
        constexpr double step = 1e-7;
        for (int s = 0; s < n; ++s) {
            auto up = mu;
            auto dn = mu;
            up[s] += step;
            dn[s] -= step;
            jac.col(s) = (forward_t(lam, up, c) - forward_t(lam, dn, c)) / (2.0 * step);
        }
        return jac;
    }
    const auto& torus = lam.params().torus();
    const cplx h = lam.params().shift();
    for (int k = 0; k < n; ++k) {
        for (int s = 0; s < n; ++s) {
            const cplx d = lam[k] - mu[s];
            jac(k, s) = f(k) * (zeta_log(d, torus) - zeta_log(d + h, torus));
        }
    }
    return jac;
}

inline double safe_residual(const WeightVector& lam, const std::vector<cplx>& mu, cplx c, std::span<const cplx> t,
                            cvector& f)
{
    try {
        f = forward_t(lam, mu, c);
    } catch (const error&) {
        return std::numeric_limits<double>::infinity();
    }
    return relative_residual(f, t);
}

// One damped Newton run. Returns the iterate on success.
inline std::optional<std::vector<cplx>> newton_run(const WeightVector& lam, std::span<const cplx> t, cplx c,
                                                   std::vector<cplx> mu, const SolverConfig& cfg)
{
    constexpr int max_halvings = 20;
    cvector f;
    double res = safe_residual(lam, mu, c, t, f);
    if (!std::isfinite(res)) {
        return std::nullopt;
    }
    const int n = lam.size();
    for (int it = 0; it <= cfg.max_iter; ++it) {
        if (res < cfg.tol) {
            return mu;
        }
        if (it == cfg.max_iter) {
            break;
        }
        cmatrix jac;
        try {
            jac = forward_jacobian(lam, mu, f, c, cfg.fd_jacobian);
        } catch (const error&) {
            return std::nullopt;
        }
        cvector r(n);
        for (int k = 0; k < n; ++k) {
            r(k) = f(k) - t[k];
        }
        const cvector delta = jac.partialPivLu().solve(r);
        if (!delta.allFinite()) {
            return std::nullopt;
        }
        double alpha = cfg.damping;
        bool accepted = false;
        for (int hv = 0; hv <= max_halvings; ++hv, alpha *= 0.5) {
            auto trial = mu;
            for (int s = 0; s < n; ++s) {
                trial[s] -= alpha * delta(s);
            }
            cvector ft;
            const double rt = safe_residual(lam, trial, c, t, ft);
            if (rt < res) {
                mu = std::move(trial);
                f = std::move(ft);
                res = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Follows the root from mu0 while t moves geometrically from F(mu0) to the target,
// t(s) = F(mu0) exp(s log(t / F(mu0))), with short Newton corrections per substep.
inline std::optional<std::vector<cplx>> continuation_run(const WeightVector& lam, std::span<const cplx> t, cplx c,
                                                         std::vector<cplx> mu, const SolverConfig& cfg)
{
    constexpr int corrector_iter = 6;
    constexpr double min_substep = 1e-4;
    constexpr double max_jump = 0.02;
    const int n = lam.size();
    cvector f0;
    if (!std::isfinite(safe_residual(lam, mu, c, t, f0))) {
        return std::nullopt;
    }
    std::vector<cplx> logs(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        logs[k] = std::log(t[k] / f0(k));
    }
    SolverConfig inner = cfg;
    inner.max_iter = corrector_iter;
    inner.tol = std::max(cfg.tol, 1e-9);
    double sigma = 0.0;
    double ds = 0.25;
    std::vector<cplx> target(static_cast<std::size_t>(n));
    while (sigma < 1.0) {
        if (ds < min_substep) {
            return std::nullopt;
        }
        const double next = std::min(1.0, sigma + ds);
        for (int k = 0; k < n; ++k) {
            target[k] = f0(k) * std::exp(next * logs[k]);
        }
        auto got = newton_run(lam, target, c, mu, inner);
        bool ok = got.has_value();
        for (int k = 0; ok && k < n; ++k) {
            ok = std::abs((*got)[k] - mu[k]) < max_jump;
        }
        if (!ok) {
            ds *= 0.5;
            continue;
        }
        mu = std::move(*got);
        sigma = next;
        ds = std::min(0.5, 1.5 * ds);
    }
    return newton_run(lam, t, c, std::move(mu), cfg);
}

} // namespace detail

// Solves for mu given (lambda, t, c). The first attempt continues the root from the guess;
// later attempts are plain damped Newton from perturbed guesses. Components are ordered
// to match the guess.
inline WeightVector solve_next(const WeightVector& lam, std::span<const cplx> t, cplx c, const SolverConfig& cfg,
                               std::optional<std::vector<cplx>> guess = std::nullopt)
{
    cfg.validate();
    const int n = lam.size();
    if (static_cast<int>(t.size()) != n) {
        throw std::invalid_argument("solve_next: t must have n entries");
    }
    for (const auto& tk : t) {
        if (tk == cplx{} || !std::isfinite(std::abs(tk))) {
            throw std::invalid_argument("solve_next: t_k must be finite and nonzero");
        }
    }
    std::vector<cplx> start;
    if (guess) {
        if (static_cast<int>(guess->size()) != n) {
            throw std::invalid_argument("solve_next: guess must have n entries");
        }
        start = *guess;
    } else {
        start.assign(lam.values().begin(), lam.values().end());
        for (auto& x : start) {
            x -= lam.params().shift();
        }
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const auto& torus = lam.params().torus();
    bool degenerate = false;
    for (int attempt = 0; attempt <= cfg.multistart; ++attempt) {
        auto x0 = start;
        if (attempt > 0) {
            for (auto& x : x0) {
                const double re = unit(rng);
                const double im = unit(rng);
                x += 0.05 * cplx{re, im};
            }
        }
        auto mu = attempt == 0 ? detail::continuation_run(lam, t, c, x0, cfg) : std::nullopt;
        if (!mu) {
            mu = detail::newton_run(lam, t, c, std::move(x0), cfg);
        }
        if (!mu) {
            continue;
        }
        const auto perm = nearest_assignment(start, *mu, torus);
        std::vector<cplx> ordered(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            ordered[i] = (*mu)[perm[i]];
        }
        try {
            return {std::move(ordered), lam.params()};
        } catch (const degenerate_weights&) {
            degenerate = true;
        }
    }
    if (degenerate) {
        throw degenerate_solution("solve_next: converged to coincident mu components");
    }
    throw no_convergence("solve_next: Newton failed from all " + std::to_string(cfg.multistart + 1) + " starts");
}

struct TrajectoryPoint {
    int a;
    WeightVector lambda;
    std::vector<cplx> t;
    cplx c;
};

// The zero v of L is held fixed along the flow; u(a) = v - sum(lambda(a) - lambda(a+1)).
struct Trajectory {
    ModelParams params;
    std::vector<TrajectoryPoint> steps;
    std::vector<cplx> u_sequence;
    cplx v{};
};

inline Trajectory start_trajectory(const PhaseConfig& cfg, cplx c0, cplx v = {})
{
    Trajectory traj{cfg.params(), {}, {}, v};
    traj.steps.push_back({0, cfg.lambda(), {cfg.t().begin(), cfg.t().end()}, c0});
    return traj;
}

inline Trajectory step(Trajectory traj, cplx c_next, const SolverConfig& cfg)
{
    if (traj.steps.empty()) {
        throw std::invalid_argument("step: empty trajectory");
    }
    const auto& cur = traj.steps.back();
    std::optional<std::vector<cplx>> guess;
    if (traj.steps.size() >= 2) {
        const auto& prev = traj.steps[traj.steps.size() - 2];
        std::vector<cplx> g(cur.lambda.values().begin(), cur.lambda.values().end());
        for (int k = 0; k < cur.lambda.size(); ++k) {
            g[k] = 2.0 * cur.lambda[k] - prev.lambda[k];
        }
        guess = std::move(g);
    }
    WeightVector next = solve_next(cur.lambda, cur.t, cur.c, cfg, guess);
    auto t_next = backlund_ttilde(cur.lambda, next, cur.c);
    traj.u_sequence.push_back(traj.v - (cur.lambda.total() - next.total()));
    const int a = cur.a + 1;
    traj.steps.push_back({a, std::move(next), std::move(t_next), c_next});
    return traj;
}

// max_k |LHS_k - RHS_k| / (|LHS_k| + |RHS_k|) with
//   LHS_k = e^{c(a) - c(a-1)} prod_{m != k} theta(lambda_mk(a) + eta/n) / theta(lambda_mk(a) - eta/n)
//   RHS_k = prod_s theta(lambda_k(a) - lambda_s(a+1)) / theta(lambda_k(a) - lambda_s(a+1) + eta/n)
//                * theta(lambda_k(a) - lambda_s(a-1) - eta/n) / theta(lambda_k(a) - lambda_s(a-1)).
inline double discrete_rs_residual(const WeightVector& prev, const WeightVector& cur, const WeightVector& next,
                                   cplx c_prev, cplx c_cur)
{
    const auto& torus = cur.params().torus();
    const cplx h = cur.params().shift();
    const int n = cur.size();
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        cplx lhs = std::exp(c_cur - c_prev);
        for (int m = 0; m < n; ++m) {
            if (m != k) {
                lhs *= theta_odd(cur.diff(m, k) + h, torus)
                    / detail::theta_checked(cur.diff(m, k) - h, torus, "discrete_rs_residual");
            }
        }
        cplx rhs = 1.0;
        for (int s = 0; s < n; ++s) {
            rhs *= theta_odd(cur[k] - next[s], torus)
                / detail::theta_checked(cur[k] - next[s] + h, torus, "discrete_rs_residual");
            rhs *= theta_odd(cur[k] - prev[s] - h, torus)
                / detail::theta_checked(cur[k] - prev[s], torus, "discrete_rs_residual");
        }
        worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-300));
    }
    return worst;
}

// B_c(lambda, t) = (mu, t~) with mu = solve_next(lambda, t, c).
inline std::pair<WeightVector, std::vector<cplx>> backlund_apply(const WeightVector& lam, std::span<const cplx> t,
                                                                 cplx c, const SolverConfig& cfg,
                                                                 std::optional<std::vector<cplx>> guess = std::nullopt)
{
    WeightVector mu = solve_next(lam, t, c, cfg, std::move(guess));
    auto tt = backlund_ttilde(lam, mu, c);
    return {std::move(mu), std::move(tt)};
}

// Compare B_c2 B_c1 and B_c1 B_c2 applied to (lambda, t): positions by lattice distance
// after matching, weights relative to max(1, |t|).
inline double backlund_commutativity_residual(const WeightVector& lam, std::span<const cplx> t, cplx c1, cplx c2,
                                              const SolverConfig& cfg)
{
    const auto [m1, t1] = backlund_apply(lam, t, c1, cfg);
    const auto [m2, t2] = backlund_apply(lam, t, c2, cfg);
    // The map is multivalued; both second legs start from the corner the square predicts,
    // m1 + m2 - lambda, so they follow the same branch.
    const auto corner = [&](const WeightVector& first, const WeightVector& other) {
        const auto perm = nearest_assignment(first.values(), other.values(), lam.params().torus());
        std::vector<cplx> g(first.values().begin(), first.values().end());
        for (int i = 0; i < lam.size(); ++i) {
            g[i] += other[perm[i]] - lam[i];
        }
        return g;
    };
    const auto [m12, t12] = backlund_apply(m1, t1, c2, cfg, corner(m1, m2));
    const auto [m21, t21] = backlund_apply(m2, t2, c1, cfg, corner(m2, m1));

    const auto& torus = lam.params().torus();
    const auto perm = nearest_assignment(m12.values(), m21.values(), torus);
    double worst = 0.0;
    for (int i = 0; i < lam.size(); ++i) {
        const int j = perm[i];
        worst = std::max(worst, torus.lattice_distance(m12[i] - m21[j]));
        worst = std::max(worst, std::abs(t12[i] - t21[j]) / std::max(1.0, std::abs(t12[i])));
    }
    return worst;
}

} // namespace rsb

#endif
