#ifndef RSB_ELLIPTIC_HPP
#define RSB_ELLIPTIC_HPP

// Theta functions with rational characteristics on the torus C/(Z + tau Z),
// and the kernels built from them:
//
//   theta[a,b](z, tau) = sum_m exp(pi i (m+a)^2 tau + 2 pi i (m+a)(z+b))
//   theta(z)           = theta[1/2,1/2](z, tau)              (odd, zeros on the lattice)
//   theta^{(j)}(z)     = theta[1/2 - j/n, 0](z + 1/2, n tau)
//   theta_j(z)         = theta[1/2 - j/n, 0](n (z + 1/2), n tau)
//   zeta(z)            = theta'(z) / theta(z)
//   Phi_z(x)           = theta(z + x) / (theta(z) theta(x))
//
// Every evaluation first moves z into the strip |Im z| <= Im(tau)/2 with the
// exact quasi-periodicity factor, then sums the series outward from its peak.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "errors.hpp"

namespace rsb
{

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx imag_unit{0.0, 1.0};

// Exact fraction num/den with den > 0, always reduced.
class rational
{
public:
    constexpr rational() = default;

    constexpr rational(std::int64_t num, std::int64_t den = 1)
    {
        if (den == 0) {
            throw std::invalid_argument("rational: zero denominator");
        }
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const auto g = std::gcd(num < 0 ? -num : num, den);
        num_ = num / (g == 0 ? 1 : g);
        den_ = den / (g == 0 ? 1 : g);
    }

    constexpr std::int64_t num() const { return num_; }
    constexpr std::int64_t den() const { return den_; }
    constexpr double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend constexpr rational operator+(rational x, rational y)
    {
        return {x.num_ * y.den_ + y.num_ * x.den_, x.den_ * y.den_};
    }
    friend constexpr rational operator-(rational x, rational y)
    {
        return {x.num_ * y.den_ - y.num_ * x.den_, x.den_ * y.den_};
    }
    friend constexpr rational operator*(rational x, std::int64_t k) { return {x.num_ * k, x.den_}; }
    friend constexpr bool operator==(rational, rational) = default;

    // Representative of x mod 1 in [0, 1).
    constexpr rational frac() const
    {
        auto r = num_ % den_;
        if (r < 0) {
            r += den_;
        }
        return {r, den_};
    }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

// exp(2 pi i x) for rational x, with the angle reduced exactly first.
inline cplx exact_phase(rational x)
{
    const auto f = x.frac();
    if (f.num() == 0) {
        return 1.0;
    }
    if (f.den() == 2) {
        return -1.0;
    }
    if (f.den() == 4) {
        return f.num() == 1 ? imag_unit : -imag_unit;
    }
    const double angle = 2.0 * pi * f.value();
    return {std::cos(angle), std::sin(angle)};
}

struct Characteristic {
    rational a;
    rational b;
};

inline constexpr Characteristic odd_characteristic{rational{1, 2}, rational{1, 2}};

class TorusParams
{
public:
    explicit TorusParams(cplx tau, double reduction_tol = 1e-10) : tau_(tau), tol_(reduction_tol)
    {
        if (!(tau.imag() > 0.0) || !std::isfinite(tau.real()) || !std::isfinite(tau.imag())) {
            throw std::invalid_argument("TorusParams: Im(tau) must be > 0");
        }
        if (!(reduction_tol > 0.0)) {
            throw std::invalid_argument("TorusParams: reduction_tol must be > 0");
        }
    }

    cplx tau() const { return tau_; }
    double reduction_tol() const { return tol_; }

    // Distance from z to the nearest point of Z + tau Z.
    double lattice_distance(cplx z) const
    {
        const double n0 = std::round(z.imag() / tau_.imag());
        double best = std::abs(z);
        for (double dn = -1.0; dn <= 1.0; dn += 1.0) {
            const cplx w = z - (n0 + dn) * tau_;
            const double m0 = std::round(w.real());
            for (double dm = -1.0; dm <= 1.0; dm += 1.0) {
                best = std::min(best, std::abs(w - (m0 + dm)));
            }
        }
        return best;
    }

    bool near_lattice(cplx z) const { return lattice_distance(z) < tol_; }

    // Representative of z mod (Z + tau Z) with |Im| <= Im(tau)/2 and |Re| <= 1/2 after the shear.
    cplx reduce(cplx z) const
    {
        const double n = std::round(z.imag() / tau_.imag());
        const cplx w = z - n * tau_;
        return w - std::round(w.real());
    }

private:
    cplx tau_;
    double tol_;
};

enum class argument_reduction { on, off };

namespace detail
{

struct theta_pair {
    cplx value;
    cplx deriv;
};

inline constexpr int series_cap = 500;

// Plain series at w. The magnitude of term m is exp(-pi Im(tau) (m+a)^2 - 2 pi (m+a) Im(w)),
// a Gaussian in m, so summing outward from its peak and stopping once both tails drop
// below 1e-17 of the largest term is safe.
inline theta_pair theta_series(double a, double b, cplx w, cplx tau, bool want_deriv)
{
    const double im_tau = tau.imag();
    const double peak = -w.imag() / im_tau - a;
    const auto m0 = static_cast<std::int64_t>(std::llround(peak));

    const auto term = [&](std::int64_t m, cplx& d) {
        const double ma = static_cast<double>(m) + a;
        const cplx t = std::exp(imag_unit * pi * (ma * ma * tau + 2.0 * ma * (w + b)));
        if (want_deriv) {
            d = 2.0 * pi * imag_unit * ma * t;
        }
        return t;
    };
    const auto bound = [&](std::int64_t m) {
        const double ma = static_cast<double>(m) + a;
        return std::exp(-pi * im_tau * ma * ma - 2.0 * pi * ma * w.imag());
    };

    cplx d0{};
    theta_pair out{term(m0, d0), d0};
    double max_term = bound(m0);
    bool up_done = false;
    bool down_done = false;
    for (int k = 1; !(up_done && down_done); ++k) {
        if (k > series_cap) {
            throw nonconvergent_series("theta series: truncation cap |m| <= 500 reached");
        }
        for (const std::int64_t m : {m0 + k, m0 - k}) {
            bool& done = (m > m0) ? up_done : down_done;
            if (done) {
                continue;
            }
            const double bm = bound(m);
            max_term = std::max(max_term, bm);
            cplx d{};
            out.value += term(m, d);
            out.deriv += d;
            if (bm < 1e-17 * max_term) {
                done = true;
            }
        }
    }
    return out;
}

inline theta_pair theta_eval(const Characteristic& ch, cplx z, cplx tau, argument_reduction red, bool want_deriv)
{
    if (!(tau.imag() > 0.0)) {
        throw std::invalid_argument("theta: Im(tau) must be > 0");
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw std::invalid_argument("theta: non-finite argument");
    }
    const double a = ch.a.value();
    const double b = ch.b.value();
    if (red == argument_reduction::off) {
        return theta_series(a, b, z, tau, want_deriv);
    }
    // z = w + M + N tau:
    // theta(z) = exp(2 pi i (a M - N b)) exp(-pi i N^2 tau - 2 pi i N w) theta(w)
    const double nf = std::round(z.imag() / tau.imag());
    const cplx w1 = z - nf * tau;
    const double mf = std::round(w1.real());
    const cplx w = w1 - mf;
    const auto n = static_cast<std::int64_t>(nf);
    const auto m = static_cast<std::int64_t>(mf);

    const auto base = theta_series(a, b, w, tau, want_deriv);
    if (n == 0 && m == 0) {
        return base;
    }
    const cplx factor = exact_phase(ch.a * m - ch.b * n)
        * std::exp(-imag_unit * pi * (nf * nf * tau + 2.0 * nf * w));
    theta_pair out{factor * base.value, {}};
    if (want_deriv) {
        out.deriv = factor * (base.deriv - 2.0 * pi * imag_unit * nf * base.value);
    }
    return out;
}

} // namespace detail

inline cplx theta_char(const Characteristic& ch, cplx z, cplx tau,
                       argument_reduction red = argument_reduction::on)
{
    return detail::theta_eval(ch, z, tau, red, false).value;
}

// d/dz theta[a,b](z, tau), term-wise differentiated.
inline cplx theta_char_deriv(const Characteristic& ch, cplx z, cplx tau,
                             argument_reduction red = argument_reduction::on)
{
    return detail::theta_eval(ch, z, tau, red, true).deriv;
}

inline cplx theta_odd(cplx z, const TorusParams& torus)
{
    return theta_char(odd_characteristic, z, torus.tau());
}

inline cplx theta_odd_deriv(cplx z, const TorusParams& torus)
{
    return theta_char_deriv(odd_characteristic, z, torus.tau());
}

// exp(pi i tau / 12) prod_{m >= 1} (1 - q^m), q = exp(2 pi i tau).
inline cplx dedekind_eta(cplx tau)
{
    if (!(tau.imag() > 0.0)) {
        throw std::invalid_argument("dedekind_eta: Im(tau) must be > 0");
    }
    const cplx q = std::exp(2.0 * pi * imag_unit * tau);
    cplx prod = 1.0;
    cplx qm = q;
    for (int m = 1; m < 100000 && std::abs(qm) >= 1e-16; ++m) {
        prod *= 1.0 - qm;
        qm *= q;
    }
    return std::exp(imag_unit * pi * tau / 12.0) * prod;
}

class ModelParams
{
public:
    ModelParams(int n, cplx eta, TorusParams torus) : n_(n), eta_(eta), torus_(torus)
    {
        if (n < 1) {
            throw std::invalid_argument("ModelParams: n must be >= 1");
        }
        if (torus.near_lattice(eta)) {
            throw std::invalid_argument("ModelParams: eta lies on the lattice");
        }
        if (torus.near_lattice(eta / static_cast<double>(n))) {
            throw std::invalid_argument("ModelParams: eta/n lies on the lattice");
        }
        eta_dedekind_ = dedekind_eta(torus.tau());
    }

    int n() const { return n_; }
    cplx eta() const { return eta_; }
    // eta / n, the offset appearing throughout the Lax formulas.
    cplx shift() const { return eta_ / static_cast<double>(n_); }
    const TorusParams& torus() const { return torus_; }
    cplx tau() const { return torus_.tau(); }
    double tol() const { return torus_.reduction_tol(); }
    // Dedekind eta of tau (not the coupling).
    cplx eta_dedekind() const { return eta_dedekind_; }
    // sqrt(-1) * eta_D(tau), the intertwiner normalization.
    cplx norm() const { return imag_unit * eta_dedekind_; }

    int wrap(int j) const { return ((j % n_) + n_) % n_; }

    Characteristic level_characteristic(int j) const
    {
        return {rational{1, 2} - rational{wrap(j), n_}, rational{0}};
    }

private:
    int n_;
    cplx eta_;
    TorusParams torus_;
    cplx eta_dedekind_;
};

// theta^{(j)}(z) = theta[1/2 - j/n, 0](z + 1/2, n tau).
inline cplx theta_band(int j, cplx z, const ModelParams& params)
{
    return theta_char(params.level_characteristic(j), z + 0.5, static_cast<double>(params.n()) * params.tau());
}

// theta_j(z) = theta[1/2 - j/n, 0](n (z + 1/2), n tau).
inline cplx theta_level(int j, cplx z, const ModelParams& params)
{
    const double n = params.n();
    return theta_char(params.level_characteristic(j), n * (z + 0.5), n * params.tau());
}

inline cplx zeta_log(cplx z, const TorusParams& torus)
{
    if (torus.near_lattice(z)) {
        throw pole_at_lattice_point("zeta: argument on the lattice");
    }
    const auto p = detail::theta_eval(odd_characteristic, z, torus.tau(), argument_reduction::on, true);
    return p.deriv / p.value;
}

inline cplx phi_kernel(cplx z, cplx x, const TorusParams& torus)
{
    if (torus.near_lattice(z) || torus.near_lattice(x)) {
        throw pole_at_lattice_point("Phi: argument on the lattice");
    }
    return theta_odd(z + x, torus) / (theta_odd(z, torus) * theta_odd(x, torus));
}

// theta'(0), the normalization that makes theta(z)/theta'(0) ~ z near the origin.
inline cplx theta_odd_prime_zero(const TorusParams& torus)
{
    return theta_odd_deriv(0.0, torus);
}

} // namespace rsb

#endif
