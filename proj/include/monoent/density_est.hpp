#pragma once

// Block-decreasing densities on [0,1]^d: sampling, Hellinger/L1 risk, the
// grid-restricted MLE (EM over mixtures of corner boxes), a fixed-grid histogram
// with a monotone projection, and seeded risk experiments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid_fn.hpp"
#include "rates.hpp"
#include "seeding.hpp"

namespace monoent {

using Point = std::array<double, kMaxDim>;

struct BlockDecreasingDensity {
    int d = 1;
    int m = 0;
    std::vector<double> cell_mass; // sums to 1

    GridShape shape() const { return {d, m}; }
    double density(std::uint64_t cell) const { return cell_mass[cell] * std::ldexp(1.0, m * d); }
    double bound() const {
        double b = 0.0;
        for (std::size_t c = 0; c < cell_mass.size(); ++c) b = std::max(b, density(c));
        return b;
    }
};

// Masses sum to 1 within tol_mass and are nonincreasing along every axis.
inline bool is_block_decreasing(const BlockDecreasingDensity& f, double tol_mass = 1e-9) {
    if (f.cell_mass.size() != f.shape().cells()) return false;
    double total = 0.0;
    for (double v : f.cell_mass) {
        if (!(v >= 0.0)) return false;
        total += v;
    }
    if (std::abs(total - 1.0) > tol_mass) return false;
    const MonotoneGridFunction view{f.d, f.m, std::vector<Orientation>(f.d, Orientation::nonincreasing), f.cell_mass};
    return monotonicity_violations(view) == 0;
}

// Exact refinement of a piecewise-constant density to a finer grid.
inline BlockDecreasingDensity refine(const BlockDecreasingDensity& f, int m_out) {
    if (m_out < f.m) throw ResolutionError("cannot refine to a coarser grid");
    if (m_out == f.m) return f;
    const GridShape in = f.shape(), out{f.d, m_out};
    const int shift = m_out - f.m;
    const double split = std::ldexp(1.0, -shift * f.d);
    BlockDecreasingDensity g{f.d, m_out, std::vector<double>(out.cells())};
    CellIndex k{};
    std::uint64_t idx = 0;
    do {
        CellIndex parent{};
        for (int i = 0; i < f.d; ++i) parent[i] = k[i] >> shift;
        g.cell_mass[idx++] = f.cell_mass[in.flat(parent)] * split;
    } while (out.next(k));
    return g;
}

// Density values (not masses) read as a bounded block-decreasing shape; rescaled to mass 1.
inline BlockDecreasingDensity density_from_function(const MonotoneGridFunction& f) {
    const MonotoneGridFunction g = canonicalize(f);
    BlockDecreasingDensity out{g.d, g.m, g.values};
    double total = 0.0;
    for (double v : out.cell_mass) total += v;
    if (!(total > 0.0)) throw ValidationError("density shape has zero mass");
    for (double& v : out.cell_mass) v /= total;
    return out;
}

// Sum of w_j * Uniform([0, t_j)); corners in cells of resolution m, weights sum to 1.
struct MixtureOfBoxes {
    int d = 1;
    int m = 0;
    std::vector<BoxAtom> atoms;

    double box_volume(const BoxAtom& a) const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= std::ldexp(static_cast<double>(a.corner[i]), -m);
        return v;
    }

    double density_at(const Point& x) const {
        double f = 0.0;
        for (const auto& a : atoms) {
            bool in = true;
            for (int i = 0; i < d && in; ++i) in = x[i] < std::ldexp(static_cast<double>(a.corner[i]), -m);
            if (in) f += a.weight / box_volume(a);
        }
        return f;
    }
};

inline void validate_mixture(const MixtureOfBoxes& mix, double tol = 1e-9) {
    check_shape(mix.d, mix.m);
    double total = 0.0;
    for (const auto& a : mix.atoms) {
        if (!(a.weight >= 0.0)) throw DomainError("negative mixture weight");
        for (int i = 0; i < mix.d; ++i)
            if (a.corner[i] < 1 || a.corner[i] > GridShape{mix.d, mix.m}.side())
                throw DomainError("mixture corner outside (0, 1]");
        total += a.weight;
    }
    if (std::abs(total - 1.0) > tol) throw DomainError("mixture weights do not sum to 1");
}

inline BlockDecreasingDensity to_density(const MixtureOfBoxes& mix, int m_out) {
    if (m_out < mix.m) throw ResolutionError("density grid coarser than mixture corners");
    const GridShape s{mix.d, m_out};
    const int shift = m_out - mix.m;
    BlockDecreasingDensity out{mix.d, m_out, std::vector<double>(s.cells(), 0.0)};
    const double cell_vol = s.cell_volume();
    for (const auto& a : mix.atoms) {
        if (a.weight == 0.0) continue;
        const double mass = a.weight / mix.box_volume(a) * cell_vol;
        CellIndex k{};
        std::uint64_t idx = 0;
        do {
            bool in = true;
            for (int i = 0; i < mix.d && in; ++i) in = (k[i] >> shift) < a.corner[i];
            if (in) out.cell_mass[idx] += mass;
            ++idx;
        } while (s.next(k));
    }
    return out;
}

inline MixtureOfBoxes truth_preset(const std::string& name, int d) {
    check_dimension(d);
    auto atom = [d](std::uint32_t c, double w) {
        BoxAtom a;
        for (int i = 0; i < d; ++i) a.corner[i] = c;
        a.weight = w;
        return a;
    };
    if (name == "uniform") return {d, 0, {atom(1, 1.0)}};
    if (name == "box") return {d, 1, {atom(1, 1.0)}};
    if (name == "staircase") return {d, 2, {atom(4, 0.5), atom(2, 0.3), atom(1, 0.2)}};
    throw ValidationError("unknown truth preset '" + name + "' (uniform, box, staircase)");
}

// ---------------------------------------------------------------------------
// Sampling

inline std::vector<Point> sample(const MixtureOfBoxes& mix, std::size_t n, std::uint64_t seed) {
    validate_mixture(mix);
    Rng rng = make_rng(seed, "sample_mixture");
    std::vector<double> w;
    for (const auto& a : mix.atoms) w.push_back(a.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point> out(n);
    for (auto& x : out) {
        const auto& a = mix.atoms[pick(rng)];
        for (int i = 0; i < mix.d; ++i) {
            const double t = std::ldexp(static_cast<double>(a.corner[i]), -mix.m);
            x[i] = std::min(u(rng) * t, std::nextafter(t, 0.0));
        }
    }
    return out;
}

inline std::vector<Point> sample(const BlockDecreasingDensity& f, std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, "sample_grid");
    std::discrete_distribution<std::uint64_t> pick(f.cell_mass.begin(), f.cell_mass.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const GridShape s = f.shape();
    const double h = std::ldexp(1.0, -f.m);
    std::vector<Point> out(n);
    for (auto& x : out) {
        const CellIndex k = s.unflat(pick(rng));
        for (int i = 0; i < f.d; ++i) {
            const double hi = (k[i] + 1) * h;
            x[i] = std::min((k[i] + u(rng)) * h, std::nextafter(hi, 0.0));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distances

inline void require_same_grid(const BlockDecreasingDensity& p, const BlockDecreasingDensity& q) {
    if (p.d != q.d || p.m != q.m || p.cell_mass.size() != q.cell_mass.size())
        throw ShapeError("densities live on different grids");
}

// h^2 = int (sqrt p - sqrt q)^2; on a grid the cell volume cancels against the
// density scaling, leaving sum (sqrt(mass_p) - sqrt(mass_q))^2.
inline double hellinger(const BlockDecreasingDensity& p, const BlockDecreasingDensity& q) {
    require_same_grid(p, q);
    double acc = 0.0;
    for (std::size_t c = 0; c < p.cell_mass.size(); ++c) {
        const double t = std::sqrt(p.cell_mass[c]) - std::sqrt(q.cell_mass[c]);
        acc += t * t;
    }
    return std::sqrt(acc);
}

inline double l1_distance(const BlockDecreasingDensity& p, const BlockDecreasingDensity& q) {
    require_same_grid(p, q);
    double acc = 0.0;
    for (std::size_t c = 0; c < p.cell_mass.size(); ++c) acc += std::abs(p.cell_mass[c] - q.cell_mass[c]);
    return acc;
}

// ---------------------------------------------------------------------------
// EM over explicit candidate boxes (one responsibility per sample and atom).

inline double log_likelihood(const MixtureOfBoxes& mix, const std::vector<Point>& samples) {
    double ll = 0.0;
    for (const auto& x : samples) {
        const double f = mix.density_at(x);
        if (!(f > 0.0)) throw CoverageError("sample lies outside every box with positive weight");
        ll += std::log(f);
    }
    return ll;
}

inline MixtureOfBoxes em_step(const MixtureOfBoxes& current, const std::vector<Point>& samples) {
    if (samples.empty()) throw DomainError("EM needs at least one sample");
    MixtureOfBoxes next = current;
    std::vector<double> acc(current.atoms.size(), 0.0), comp(current.atoms.size());
    for (const auto& x : samples) {
        double f = 0.0;
        for (std::size_t j = 0; j < current.atoms.size(); ++j) {
            const auto& a = current.atoms[j];
            bool in = true;
            for (int i = 0; i < current.d && in; ++i) in = x[i] < std::ldexp(double(a.corner[i]), -current.m);
            comp[j] = in ? a.weight / current.box_volume(a) : 0.0;
            f += comp[j];
        }
        if (!(f > 0.0)) throw CoverageError("sample lies outside every candidate box");
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += comp[j] / f;
    }
    for (std::size_t j = 0; j < acc.size(); ++j) next.atoms[j].weight = acc[j] / static_cast<double>(samples.size());
    return next;
}

struct EmOptions {
    double tolerance = 1e-8; // absolute log-likelihood gain
    int max_iters = 5000;
    double prune_below = 1e-12;
};

struct EmResult {
    MixtureOfBoxes mixture;
    int iterations = 0;
    double loglik = 0.0;
    std::vector<double> trace; // log-likelihood after 0, 1, ... iterations
    bool converged = false;
};

namespace detail {

inline void check_ascent(double before, double after) {
    if (!std::isfinite(after)) throw NumericError("non-finite log-likelihood");
    if (after < before - 1e-9 * (1.0 + std::abs(before)))
        throw NumericError("EM log-likelihood decreased from " + std::to_string(before) + " to " + std::to_string(after));
}

inline void prune(MixtureOfBoxes& mix, double below) {
    std::erase_if(mix.atoms, [below](const BoxAtom& a) { return a.weight < below; });
    double total = 0.0;
    for (const auto& a : mix.atoms) total += a.weight;
    for (auto& a : mix.atoms) a.weight /= total;
}

} // namespace detail

// Explicit-atom EM from a given start; the reference path for grid_mle.
inline EmResult mixture_em(const std::vector<Point>& samples, MixtureOfBoxes start, const EmOptions& opt = {}) {
    EmResult res;
    res.mixture = std::move(start);
    double ll = log_likelihood(res.mixture, samples);
    res.trace.push_back(ll);
    for (int it = 0; it < opt.max_iters; ++it) {
        res.mixture = em_step(res.mixture, samples);
        const double next = log_likelihood(res.mixture, samples);
        detail::check_ascent(ll, next);
        res.trace.push_back(next);
        ++res.iterations;
        const double gain = next - ll;
        ll = next;
        if (gain < opt.tolerance) {
            res.converged = true;
            break;
        }
    }
    res.loglik = ll;
    detail::prune(res.mixture, opt.prune_below);
    return res;
}

// Grid rule m = ceil(log2 n^{1/(d+2)}), at least 1.
inline int grid_rule(std::size_t n, int d) {
    const double m = std::ceil(std::log2(static_cast<double>(n)) / (d + 2.0) - 1e-12);
    return std::max(1, static_cast<int>(m));
}

namespace detail {

// In-place sum over the upper dominance cone: v[k] <- sum_{j >= k} v[j].
inline void suffix_sum(std::vector<double>& v, const GridShape& s) {
    for (int axis = 0; axis < s.d; ++axis) {
        const std::uint64_t stride = s.stride(axis);
        CellIndex k{};
        std::uint64_t idx = 0;
        // visit cells in reverse so that idx + stride is already final on this axis
        for (std::uint64_t r = s.cells(); r-- > 0;) {
            k = s.unflat(r);
            idx = r;
            if (k[axis] + 1 < s.side()) v[idx] += v[idx + stride];
        }
    }
}

// In-place sum over the lower dominance cone: v[k] <- sum_{j <= k} v[j].
inline void prefix_sum(std::vector<double>& v, const GridShape& s) {
    for (int axis = 0; axis < s.d; ++axis) {
        const std::uint64_t stride = s.stride(axis);
        CellIndex k{};
        std::uint64_t idx = 0;
        do {
            if (k[axis] > 0) v[idx] += v[idx - stride];
            ++idx;
        } while (s.next(k));
    }
}

} // namespace detail

// MLE over all mixtures of corner boxes with corners on the resolution-m grid.
// Every atom is indexed by the cell just below its corner, so both the density
// (a suffix sum of w/vol) and the EM update (a prefix sum of count/f) are
// d passes over the grid.
inline EmResult grid_mle(const std::vector<Point>& samples, int d, int m, const EmOptions& opt = {}) {
    check_shape(d, m);
    if (d * m > 24) throw DomainError("grid MLE candidate set too large");
    if (samples.empty()) throw DomainError("grid MLE needs at least one sample");
    const GridShape s{d, m};
    const std::uint64_t N = s.cells();
    const double side = static_cast<double>(s.side());

    std::vector<double> counts(N, 0.0);
    for (const auto& x : samples) {
        CellIndex k{};
        for (int i = 0; i < d; ++i) {
            if (!(x[i] >= 0.0 && x[i] < 1.0)) throw CoverageError("sample outside [0,1)^d");
            k[i] = static_cast<std::uint32_t>(std::min(side - 1.0, std::floor(x[i] * side)));
        }
        counts[s.flat(k)] += 1.0;
    }
    std::vector<double> inv_vol(N);
    {
        CellIndex k{};
        std::uint64_t idx = 0;
        do {
            double v = 1.0;
            for (int i = 0; i < d; ++i) v *= (k[i] + 1) / side;
            inv_vol[idx++] = 1.0 / v;
        } while (s.next(k));
    }

    const double n = static_cast<double>(samples.size());
    std::vector<double> w(N, 1.0 / static_cast<double>(N)), f(N), g(N);
    auto density = [&] {
        for (std::uint64_t j = 0; j < N; ++j) f[j] = w[j] * inv_vol[j];
        detail::suffix_sum(f, s);
    };
    auto loglik = [&] {
        double ll = 0.0;
        for (std::uint64_t k = 0; k < N; ++k)
            if (counts[k] > 0) {
                if (!(f[k] > 0.0)) throw CoverageError("occupied cell has zero density");
                ll += counts[k] * std::log(f[k]);
            }
        return ll;
    };

    EmResult res;
    density();
    double ll = loglik();
    res.trace.push_back(ll);
    for (int it = 0; it < opt.max_iters; ++it) {
        for (std::uint64_t k = 0; k < N; ++k) g[k] = counts[k] > 0 ? counts[k] / f[k] : 0.0;
        detail::prefix_sum(g, s);
        for (std::uint64_t j = 0; j < N; ++j) w[j] = w[j] * inv_vol[j] * g[j] / n;
        density();
        const double next = loglik();
        detail::check_ascent(ll, next);
        res.trace.push_back(next);
        ++res.iterations;
        const double gain = next - ll;
        ll = next;
        if (gain < opt.tolerance) {
            res.converged = true;
            break;
        }
    }
    res.loglik = ll;
    res.mixture = {d, m, {}};
    double total = 0.0;
    for (double x : w) total += x;
    for (std::uint64_t j = 0; j < N; ++j) {
        BoxAtom a;
        const CellIndex k = s.unflat(j);
        for (int i = 0; i < d; ++i) a.corner[i] = k[i] + 1;
        a.weight = w[j] / total;
        res.mixture.atoms.push_back(a);
    }
    detail::prune(res.mixture, opt.prune_below);
    return res;
}

// ---------------------------------------------------------------------------
// Histogram + monotone projection

// Pool-adjacent-violators for a nonincreasing fit with equal weights, in place
// along a strided line.
inline void isotonic_nonincreasing(double* v, std::size_t len, std::size_t stride) {
    std::vector<double> mean;
    std::vector<std::size_t> size;
    for (std::size_t i = 0; i < len; ++i) {
        mean.push_back(v[i * stride]);
        size.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
            const double total = mean.back() * size.back() + mean[mean.size() - 2] * size[size.size() - 2];
            const std::size_t cnt = size.back() + size[size.size() - 2];
            mean.pop_back();
            size.pop_back();
            mean.back() = total / cnt;
            size.back() = cnt;
        }
    }
    std::size_t i = 0;
    for (std::size_t b = 0; b < mean.size(); ++b)
        for (std::size_t r = 0; r < size[b]; ++r) v[(i++) * stride] = mean[b];
}

// Cyclic axis-wise isotonic regression, then an exact repair by the running
// minimum over the lower dominance cone (a no-op once the cycle has converged),
// then renormalization. The result is feasible but need not be the L2
// projection onto the monotone cone when d >= 2.
inline void project_block_decreasing(std::vector<double>& v, const GridShape& s, int max_cycles = 200) {
    const MonotoneGridFunction probe{s.d, s.m, std::vector<Orientation>(s.d, Orientation::nonincreasing), {}};
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        for (int axis = 0; axis < s.d; ++axis) {
            const std::uint64_t stride = s.stride(axis);
            CellIndex k{};
            std::uint64_t idx = 0;
            do {
                if (k[axis] == 0) isotonic_nonincreasing(&v[idx], s.side(), stride);
                ++idx;
            } while (s.next(k));
        }
        MonotoneGridFunction view = probe;
        view.values = v;
        if (monotonicity_violations(view) == 0) break;
    }
    for (int axis = 0; axis < s.d; ++axis) {
        const std::uint64_t stride = s.stride(axis);
        CellIndex k{};
        std::uint64_t idx = 0;
        do {
            if (k[axis] > 0) v[idx] = std::min(v[idx], v[idx - stride]);
            ++idx;
        } while (s.next(k));
    }
}

inline BlockDecreasingDensity histogram_estimator(const std::vector<Point>& samples, int d, int m) {
    check_shape(d, m);
    if (samples.empty()) throw DomainError("histogram needs at least one sample");
    const GridShape s{d, m};
    const double side = static_cast<double>(s.side());
    std::vector<double> mass(s.cells(), 0.0);
    for (const auto& x : samples) {
        CellIndex k{};
        for (int i = 0; i < d; ++i) {
            if (!(x[i] >= 0.0 && x[i] < 1.0)) throw CoverageError("sample outside [0,1)^d");
            k[i] = static_cast<std::uint32_t>(std::min(side - 1.0, std::floor(x[i] * side)));
        }
        mass[s.flat(k)] += 1.0;
    }
    for (double& x : mass) x /= static_cast<double>(samples.size());
    project_block_decreasing(mass, s);
    double total = 0.0;
    for (double x : mass) total += x;
    for (double& x : mass) x /= total;
    return {d, m, std::move(mass)};
}

// ---------------------------------------------------------------------------
// Risk experiments

enum class EstimatorKind { mle, histogram };

inline const char* to_string(EstimatorKind e) { return e == EstimatorKind::mle ? "mle" : "histogram"; }

struct Estimate {
    BlockDecreasingDensity density;
    int iterations = 0;
    double loglik = std::numeric_limits<double>::quiet_NaN();
    bool ascent_ok = true;
};

struct RiskRow {
    std::size_t n = 0;
    std::size_t rep = 0;
    int grid_m = 0;
    double h = 0.0;
    double l1 = 0.0;
    int iterations = 0;
    double loglik = 0.0;
};

struct RiskSummary {
    std::size_t n = 0;
    double mean_h = 0.0;
    double mean_l1 = 0.0;
    double mean_iterations = 0.0;
    double mean_loglik = 0.0;
};

struct RiskReport {
    int d = 1;
    std::string estimator;
    std::size_t replications = 0;
    std::vector<RiskRow> rows;        // indexed by (n position, rep)
    std::vector<RiskSummary> summary; // one per n
    std::optional<SlopeFit> slope;    // log mean h vs log n; empty when degenerate
    bool degenerate = false;
    bool ascent_ok = true;

    // number of adjacent pairs where mean h fails to strictly decrease
    int inversions() const {
        int k = 0;
        for (std::size_t i = 1; i < summary.size(); ++i) k += !(summary[i].mean_h < summary[i - 1].mean_h);
        return k;
    }
};

// est(samples, n) -> Estimate. Replication r at sample size n draws from the
// stream derived from (seed, n, r), so results do not depend on evaluation order.
template <class Est>
RiskReport risk_experiment(const BlockDecreasingDensity& truth, Est&& est, const std::string& name,
                           const std::vector<std::size_t>& n_list, std::size_t replications, std::uint64_t seed) {
    if (replications < 1) throw DomainError("need at least one replication");
    RiskReport rep;
    rep.d = truth.d;
    rep.estimator = name;
    rep.replications = replications;
    rep.rows.resize(n_list.size() * replications);
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const std::size_t n = n_list[ni];
        for (std::size_t r = 0; r < replications; ++r) {
            const auto xs = sample(truth, n, derive_seed(seed, "risk_replication", n, r));
            Estimate e = est(xs, n);
            const int M = std::max(e.density.m, truth.m);
            const auto a = refine(e.density, M), b = refine(truth, M);
            RiskRow& row = rep.rows[ni * replications + r];
            row = {n, r, e.density.m, hellinger(a, b), l1_distance(a, b), e.iterations, e.loglik};
            rep.ascent_ok = rep.ascent_ok && e.ascent_ok;
        }
        RiskSummary s;
        s.n = n;
        for (std::size_t r = 0; r < replications; ++r) {
            const auto& row = rep.rows[ni * replications + r];
            s.mean_h += row.h;
            s.mean_l1 += row.l1;
            s.mean_iterations += row.iterations;
            s.mean_loglik += row.loglik;
        }
        const double R = static_cast<double>(replications);
        s.mean_h /= R;
        s.mean_l1 /= R;
        s.mean_iterations /= R;
        s.mean_loglik /= R;
        rep.summary.push_back(s);
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : rep.summary) {
        if (!(s.mean_h > 0.0)) rep.degenerate = true;
        pts.emplace_back(static_cast<double>(s.n), s.mean_h);
    }
    if (!rep.degenerate && pts.size() >= 3) rep.slope = loglog_slope_fit(pts);
    else rep.degenerate = true;
    return rep;
}

struct RiskOptions {
    std::optional<int> grid; // fixed m; grid_rule(n, d) when empty
    EmOptions em;
};

inline RiskReport risk_experiment(const BlockDecreasingDensity& truth, EstimatorKind kind,
                                  const std::vector<std::size_t>& n_list, std::size_t replications,
                                  std::uint64_t seed, const RiskOptions& opt = {}) {
    const int d = truth.d;
    auto est = [&](const std::vector<Point>& xs, std::size_t n) {
        const int m = opt.grid ? *opt.grid : grid_rule(n, d);
        Estimate e;
        if (kind == EstimatorKind::mle) {
            const EmResult r = grid_mle(xs, d, m, opt.em);
            e.density = to_density(r.mixture, m);
            e.iterations = r.iterations;
            e.loglik = r.loglik;
        } else {
            e.density = histogram_estimator(xs, d, m);
            double ll = 0.0;
            for (const auto& x : xs) {
                CellIndex k{};
                for (int i = 0; i < d; ++i) k[i] = static_cast<std::uint32_t>(std::floor(x[i] * std::ldexp(1.0, m)));
                ll += std::log(e.density.density(e.density.shape().flat(k)));
            }
            e.loglik = ll;
        }
        return e;
    };
    return risk_experiment(truth, est, to_string(kind), n_list, replications, seed);
}

} // namespace monoent
