#pragma once

// Closed-form entropy exponents, the bracketing-integral / modulus calculus for
// the monotone-density MLE, and the log-log regression used by every rate test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace monoent {

enum class Regime { subcritical, critical, supercritical };

inline const char* to_string(Regime r) {
    switch (r) {
    case Regime::subcritical: return "subcritical";
    case Regime::critical: return "critical";
    case Regime::supercritical: return "supercritical";
    }
    return "?";
}

// scale^power * (log 1/scale)^log_power; scale is eps for gap/entropy rates.
struct PowerLogRate {
    double power = 0.0;
    double log_power = 0.0;

    double operator()(double scale) const {
        double v = std::pow(scale, power);
        if (log_power != 0.0) v *= std::pow(std::log(1.0 / scale), log_power);
        return v;
    }
};

// Tolerance for deciding (d-1)p == d in floating point (p = 4/3 is not exact).
inline constexpr double kCriticalTol = 1e-9;

inline Regime classify(int d, double p) {
    const double s = (d - 1) * p - d;
    if (std::abs(s) <= kCriticalTol * d) return Regime::critical;
    return s < 0 ? Regime::subcritical : Regime::supercritical;
}

// beta = (d - 1 + 1/(p-1)) / 2, defined for p > 1.
inline double beta_exponent(int d, double p) {
    if (!(p > 1.0)) throw DomainError("beta is undefined for p = 1");
    return 0.5 * (d - 1 + 1.0 / (p - 1.0));
}

struct RegimeRates {
    int d = 1;
    double p = 1.0;
    double alpha = 1.0;
    Regime regime = Regime::subcritical;
    PowerLogRate gap_rate;     // ||upper - lower||_p of the constructed bracket
    PowerLogRate entropy_rate; // upper bound on log N_[](eps)
};

inline RegimeRates entropy_exponent(int d, double p) {
    if (d < 1) throw DomainError("d must be >= 1");
    if (p < 1.0) throw DomainError("p must be >= 1");
    RegimeRates r;
    r.d = d;
    r.p = p;
    r.regime = classify(d, p);
    r.alpha = r.regime == Regime::critical ? d : std::max<double>(d, (d - 1) * p);
    switch (r.regime) {
    case Regime::subcritical:
        r.gap_rate = {1.0, 0.0};
        r.entropy_rate = {-static_cast<double>(d), 0.0};
        break;
    case Regime::critical:
        r.gap_rate = {1.0, 1.0 / p};
        r.entropy_rate = {-static_cast<double>(d), 1.0 + d / p};
        break;
    case Regime::supercritical: {
        const double b = beta_exponent(d, p);
        r.gap_rate = {(b + 1.0) / (p * b), 0.0};
        r.entropy_rate = {-(d - 1) * p, 0.0};
        break;
    }
    }
    return r;
}

// log |S| growth of the envelope net: eps^-d, eps^-d log(1/eps), eps^-(beta+1)(d-1)/beta.
inline PowerLogRate net_cardinality_rate(int d, double p) {
    switch (classify(d, p)) {
    case Regime::subcritical: return {-static_cast<double>(d), 0.0};
    case Regime::critical: return {-static_cast<double>(d), 1.0};
    case Regime::supercritical: {
        const double b = beta_exponent(d, p);
        return {-(b + 1.0) * (d - 1) / b, 0.0};
    }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Quadrature

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive Simpson with an absolute tolerance per call.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 60) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Integrates over [a, b] split geometrically, so that steep integrands near a
// (here eps^-(d-1)) get panels matched to their scale. Relative tolerance.
template <class F>
double integrate_geometric(const F& f, double a, double b, double rel_tol) {
    std::vector<double> knots{a};
    while (knots.back() * 2.0 < b) knots.push_back(knots.back() * 2.0);
    knots.push_back(b);
    // crude magnitude estimate for an absolute tolerance
    double scale = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        scale += std::abs(f(0.5 * (knots[i] + knots[i + 1]))) * (knots[i + 1] - knots[i]);
    const double tol = rel_tol * scale / static_cast<double>(knots.size());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) total += adaptive_simpson(f, knots[i], knots[i + 1], tol);
    return total;
}

struct BracketingIntegralOptions {
    double c = 1.0;         // lower limit c * delta^2
    double c2 = 1.0;        // entropy constant
    bool include_one = true; // drop the "1 +" to compare against antiderivatives
    double rel_tol = 1e-8;
};

// log N_[](eps, P, h) bound used under the square root.
inline double hellinger_entropy_bound(int d, double B, double c2, double eps) {
    if (d > 2) return c2 * std::pow(B, d - 1) * std::pow(eps, -2.0 * (d - 1));
    const double L = std::log(1.0 / eps);
    return c2 * B * L * L / (eps * eps);
}

// J(delta) = int_{c delta^2}^{delta} sqrt(1 + log N_[](eps)) d eps. The interval is
// split where the entropy term crosses 1 and then geometrically.
inline double bracketing_integral(int d, double delta, double B, const BracketingIntegralOptions& opt = {}) {
    if (d < 2) throw DomainError("bracketing integral is defined for d >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    const double lo = opt.c * delta * delta;
    if (!(lo > 0.0 && lo < delta)) throw DomainError("degenerate integration interval");
    const double one = opt.include_one ? 1.0 : 0.0;
    auto integrand = [&](double e) { return std::sqrt(one + hellinger_entropy_bound(d, B, opt.c2, e)); };
    if (opt.c2 == 0.0) return (delta - lo) * std::sqrt(one);

    double cross = std::numeric_limits<double>::quiet_NaN();
    if (d > 2) cross = std::pow(opt.c2 * std::pow(B, d - 1), 1.0 / (2.0 * (d - 1)));
    if (cross > lo && cross < delta)
        return integrate_geometric(integrand, lo, cross, opt.rel_tol) +
               integrate_geometric(integrand, cross, delta, opt.rel_tol);
    return integrate_geometric(integrand, lo, delta, opt.rel_tol);
}

// Antiderivative of the integrand without the "1 +", for checking the quadrature.
inline double bracketing_integral_closed_form(int d, double delta, double B, double c = 1.0, double c2 = 1.0) {
    const double lo = c * delta * delta;
    if (d > 2) {
        const double a = std::sqrt(c2 * std::pow(B, d - 1));
        return a / (d - 2) * (std::pow(lo, -(d - 2.0)) - std::pow(delta, -(d - 2.0)));
    }
    if (d == 2) {
        const double a = std::sqrt(c2 * B);
        const double L1 = std::log(1.0 / lo), L2 = std::log(1.0 / delta);
        return 0.5 * a * (L1 * L1 - L2 * L2);
    }
    throw DomainError("closed form is defined for d >= 2");
}

// The envelope J is claimed to be of order delta^-2(d-2) (d > 2) or (log 1/delta)^2 (d = 2).
inline double bracketing_integral_order(int d, double delta) {
    if (d > 2) return std::pow(delta, -2.0 * (d - 2));
    const double L = std::log(1.0 / delta);
    return L * L;
}

// ---------------------------------------------------------------------------
// Modulus phi_n and the rate fixed point r_n^2 phi_n(1/r_n) <~ sqrt(n), all constants 1.

// phi_n evaluated at delta = 1/r.
inline double phi_n_at_inverse(int d, double n, double r) {
    const double sn = std::sqrt(n);
    if (d > 2) {
        const double j = std::pow(r, 2.0 * (d - 2));
        return j * (1.0 + j * r * r / sn);
    }
    if (d == 2) {
        const double L = std::log(r);
        const double j = L * L;
        return j * (1.0 + j * r * r / sn);
    }
    throw DomainError("phi_n is defined for d >= 2");
}

inline double phi_n(int d, double n, double delta) { return phi_n_at_inverse(d, n, 1.0 / delta); }

struct RateCheck {
    double r_n = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

// r_n = n^{1/(4(d-1))} for d > 2, n^{1/4}/log n for d = 2.
inline double mle_rate_r(int d, std::uint64_t n) {
    const double nn = static_cast<double>(n);
    if (d > 2) {
        const int k = 4 * (d - 1);
        double r = std::pow(nn, 1.0 / k);
        // snap to the exact root when n is a perfect k-th power
        const double rr = std::round(r);
        if (std::pow(rr, k) == nn) r = rr;
        return r;
    }
    return std::pow(nn, 0.25) / std::log(nn);
}

inline RateCheck phi_and_rate_check(int d, std::uint64_t n) {
    if (d < 2) throw DomainError("rate check is defined for d >= 2");
    if (n < 2) throw DomainError("n must be >= 2");
    if (d == 2 && n < 3) throw DomainError("d = 2 needs n >= 3 so that log n > 1");
    RateCheck c;
    c.r_n = mle_rate_r(d, n);
    c.lhs = c.r_n * c.r_n * phi_n_at_inverse(d, static_cast<double>(n), c.r_n);
    c.rhs = std::sqrt(static_cast<double>(n));
    c.ratio = c.lhs / c.rhs;
    return c;
}

struct MleRate {
    int d = 2;
    double hellinger_exponent = 0.0; // h(f_hat, f) = O_p(n^-exponent * log^log_power n)
    double log_power = 0.0;
    double minimax_l1_exponent = 0.0;
};

inline MleRate predicted_mle_rate(int d) {
    if (d < 2) throw DomainError("MLE rate is stated for d >= 2 (d = 1 is the classical n^{1/3})");
    MleRate r;
    r.d = d;
    r.minimax_l1_exponent = 1.0 / (2.0 + d);
    if (d == 2) {
        r.hellinger_exponent = 0.25;
        r.log_power = 1.0;
    } else {
        r.hellinger_exponent = 1.0 / (4.0 * (d - 1));
    }
    return r;
}

// ---------------------------------------------------------------------------

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double std_error = 0.0;
};

// OLS of log(value) on log(scale).
inline SlopeFit loglog_slope_fit(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 3) throw DomainError("slope fit needs at least 3 points");
    const double k = static_cast<double>(pairs.size());
    double sx = 0, sy = 0;
    std::vector<double> xs, ys;
    for (const auto& [s, v] : pairs) {
        if (!(s > 0.0) || !(v > 0.0)) throw DomainError("slope fit needs positive scales and values");
        xs.push_back(std::log(s));
        ys.push_back(std::log(v));
        sx += xs.back();
        sy += ys.back();
    }
    const double mx = sx / k, my = sy / k;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw DomainError("slope fit needs at least two distinct scales");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - f.intercept - f.slope * xs[i];
        rss += e * e;
    }
    f.std_error = std::sqrt(rss / (k - 2.0) / sxx);
    return f;
}

} // namespace monoent
