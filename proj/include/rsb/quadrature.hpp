#ifndef RSB_QUADRATURE_HPP
#define RSB_QUADRATURE_HPP

// Integral of log theta(x) along a polygonal path in the complex plane, with the
// branch of the logarithm carried continuously from the base point.

#include <array>
#include <cmath>
#include <vector>

#include "elliptic.hpp"

namespace rsb
{

template <int N>
struct gauss_legendre_rule {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    gauss_legendre_rule()
    {
        // Newton iteration on P_N from the Chebyshev-like initial guess.
        for (int i = 0; i < (N + 1) / 2; ++i) {
            double x = std::cos(pi * (i + 0.75) / (N + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0;
                double p1 = x;
                for (int k = 2; k <= N; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[N - 1 - i] = x;
            weights[i] = weights[N - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    static const gauss_legendre_rule& get()
    {
        static const gauss_legendre_rule rule;
        return rule;
    }
};

namespace detail
{

inline cplx unwrap_log(cplx value, cplx previous)
{
    cplx l = std::log(value);
    const double turns = std::round((previous.imag() - l.imag()) / (2.0 * pi));
    return l + cplx{0.0, 2.0 * pi * turns};
}

struct log_segment {
    cplx integral;
    cplx log_end;
    double max_jump;
};

inline log_segment log_theta_gl(cplx a, cplx b, cplx log_a, const TorusParams& torus)
{
    const auto& rule = gauss_legendre_rule<16>::get();
    const cplx half = 0.5 * (b - a);
    const cplx mid = 0.5 * (a + b);
    log_segment out{{}, log_a, 0.0};
    cplx prev = log_a;
    for (int i = 0; i < 16; ++i) {
        const cplx l = unwrap_log(theta_odd(mid + half * rule.nodes[i], torus), prev);
        out.max_jump = std::max(out.max_jump, std::abs(l.imag() - prev.imag()));
        out.integral += rule.weights[i] * l;
        prev = l;
    }
    out.integral *= half;
    out.log_end = unwrap_log(theta_odd(b, torus), prev);
    out.max_jump = std::max(out.max_jump, std::abs(out.log_end.imag() - prev.imag()));
    return out;
}

inline log_segment log_theta_adaptive(cplx a, cplx b, cplx log_a, const TorusParams& torus, int depth)
{
    constexpr int max_depth = 30;
    const auto whole = log_theta_gl(a, b, log_a, torus);
    const cplx m = 0.5 * (a + b);
    const auto left = log_theta_gl(a, m, log_a, torus);
    const auto right = log_theta_gl(m, b, left.log_end, torus);
    const cplx refined = left.integral + right.integral;
    const double tol = 1e-14 * std::max(1.0, std::abs(refined));
    if (depth >= max_depth
        || (std::abs(refined - whole.integral) < tol && std::max(left.max_jump, right.max_jump) < 0.5)) {
        return {refined, right.log_end, std::max(left.max_jump, right.max_jump)};
    }
    const auto l = log_theta_adaptive(a, m, log_a, torus, depth + 1);
    const auto r = log_theta_adaptive(m, b, l.log_end, torus, depth + 1);
    return {l.integral + r.integral, r.log_end, std::max(l.max_jump, r.max_jump)};
}

// Distance from the segment [a, b] to the nearest lattice point.
inline double segment_lattice_distance(cplx a, cplx b, const TorusParams& torus)
{
    const double len = std::abs(b - a);
    const int samples = std::max(8, static_cast<int>(std::ceil(len / 1e-3)));
    // Sampled, then refined at the best sample by ternary search.
    double best = torus.lattice_distance(a);
    double best_s = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double s = static_cast<double>(i) / samples;
        const double d = torus.lattice_distance(a + s * (b - a));
        if (d < best) {
            best = d;
            best_s = s;
        }
    }
    double lo = std::max(0.0, best_s - 1.0 / samples);
    double hi = std::min(1.0, best_s + 1.0 / samples);
    for (int it = 0; it < 60; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (torus.lattice_distance(a + m1 * (b - a)) < torus.lattice_distance(a + m2 * (b - a))) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    return std::min(best, torus.lattice_distance(a + 0.5 * (lo + hi) * (b - a)));
}

} // namespace detail

inline constexpr double path_clearance = 1e-3;

// S(x) = int_{1/2}^{x} log theta(t) dt. The straight segment is used unless it passes
// within 1e-3 of a zero of theta, in which case the midpoint is pushed sideways
// (+-0.01 i, +-0.02 i, ...) until both halves clear.
inline cplx log_theta_integral(cplx x, const TorusParams& torus)
{
    const cplx base = 0.5;
    if (torus.lattice_distance(x) < path_clearance) {
        throw path_through_zero("log_theta_integral: endpoint within 1e-3 of a zero of theta");
    }
    std::vector<cplx> path{base, x};
    if (detail::segment_lattice_distance(base, x, torus) < path_clearance) {
        const cplx mid = 0.5 * (base + x);
        const cplx dir = (x == base) ? cplx{1.0} : (x - base) / std::abs(x - base);
        const cplx normal = imag_unit * dir;
        bool routed = false;
        for (int k = 1; k <= 20 && !routed; ++k) {
            for (const double sgn : {1.0, -1.0}) {
                const cplx bump = mid + sgn * 0.01 * k * normal;
                if (detail::segment_lattice_distance(base, bump, torus) >= path_clearance
                    && detail::segment_lattice_distance(bump, x, torus) >= path_clearance) {
                    path = {base, bump, x};
                    routed = true;
                    break;
                }
            }
        }
        if (!routed) {
            throw path_through_zero("log_theta_integral: no admissible path");
        }
    }
    cplx total{};
    cplx log_here = std::log(theta_odd(base, torus));
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto seg = detail::log_theta_adaptive(path[i], path[i + 1], log_here, torus, 0);
        total += seg.integral;
        log_here = seg.log_end;
    }
    return total;
}

} // namespace rsb

#endif
