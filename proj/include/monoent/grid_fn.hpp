#pragma once

// Bounded monotone functions on [0,1]^d, stored as constants on the cells of a
// uniform dyadic grid. Cells are half-open: cell k is prod_i [k_i 2^-m, (k_i+1) 2^-m).

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "seeding.hpp"

namespace monoent {

inline constexpr int kMaxDim = 4;

using CellIndex = std::array<std::uint32_t, kMaxDim>;

enum class Orientation { nonincreasing, nondecreasing };

inline const char* to_string(Orientation o) {
    return o == Orientation::nonincreasing ? "nonincreasing" : "nondecreasing";
}

inline Orientation orientation_from_string(const std::string& s) {
    if (s == "nonincreasing") return Orientation::nonincreasing;
    if (s == "nondecreasing") return Orientation::nondecreasing;
    throw ValidationError("unknown orientation '" + s + "'");
}

struct GridShape {
    int d = 1;
    int m = 0;

    std::uint64_t side() const { return std::uint64_t{1} << m; }
    std::uint64_t cells() const { return std::uint64_t{1} << (m * d); }
    double cell_volume() const { return std::ldexp(1.0, -m * d); }
    std::uint64_t stride(int axis) const { return std::uint64_t{1} << (m * (d - 1 - axis)); }

    std::uint64_t flat(const CellIndex& k) const {
        std::uint64_t idx = 0;
        for (int i = 0; i < d; ++i) idx = (idx << m) | k[i];
        return idx;
    }

    CellIndex unflat(std::uint64_t idx) const {
        CellIndex k{};
        const std::uint64_t mask = side() - 1;
        for (int i = d - 1; i >= 0; --i) {
            k[i] = static_cast<std::uint32_t>(idx & mask);
            idx >>= m;
        }
        return k;
    }

    // Advances k to the next cell in row-major order; false after the last cell.
    bool next(CellIndex& k) const {
        for (int i = d - 1; i >= 0; --i) {
            if (++k[i] < side()) return true;
            k[i] = 0;
        }
        return false;
    }

    friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline void check_dimension(int d) {
    if (d < 1 || d > kMaxDim)
        throw DomainError("dimension must lie in [1, " + std::to_string(kMaxDim) + "], got " +
                          std::to_string(d));
}

inline void check_shape(int d, int m) {
    check_dimension(d);
    if (m < 0 || m > 31 || m * d > 62)
        throw DomainError("grid refinement m=" + std::to_string(m) + " out of range for d=" +
                          std::to_string(d));
}

struct MonotoneGridFunction {
    int d = 1;
    int m = 0;
    std::vector<Orientation> orientation;
    std::vector<double> values;

    GridShape shape() const { return {d, m}; }
    int dim() const { return d; }
    int resolution() const { return m; }
    Orientation axis_orientation(int axis) const { return orientation[axis]; }
    double at(const CellIndex& k) const { return values[shape().flat(k)]; }
    double& at(const CellIndex& k) { return values[shape().flat(k)]; }

    friend bool operator==(const MonotoneGridFunction&, const MonotoneGridFunction&) = default;
};

// Anything that can be read cell-by-cell like a monotone grid function. Lets the
// bracketing code run on lazily evaluated functions at resolutions where a dense
// array would not fit in memory.
template <class F>
concept MonotoneSource = requires(const F& f, const CellIndex& k, int axis) {
    { f.dim() } -> std::convertible_to<int>;
    { f.resolution() } -> std::convertible_to<int>;
    { f.axis_orientation(axis) } -> std::same_as<Orientation>;
    { f.at(k) } -> std::convertible_to<double>;
};

inline MonotoneGridFunction make_function(int d, int m, Orientation o, std::vector<double> values) {
    check_shape(d, m);
    GridShape s{d, m};
    if (m * d > 30) throw DomainError("dense grid with 2^" + std::to_string(m * d) + " cells is too large");
    if (values.size() != s.cells())
        throw ShapeError("expected " + std::to_string(s.cells()) + " values, got " +
                         std::to_string(values.size()));
    return {d, m, std::vector<Orientation>(d, o), std::move(values)};
}

inline MonotoneGridFunction constant_function(int d, int m, double value,
                                              Orientation o = Orientation::nonincreasing) {
    check_shape(d, m);
    if (m * d > 30) throw DomainError("dense grid too large");
    return make_function(d, m, o, std::vector<double>(GridShape{d, m}.cells(), value));
}

// Number of adjacent-cell pairs that go against the axis orientation.
inline std::uint64_t monotonicity_violations(const MonotoneGridFunction& f, double tol = 0.0) {
    const GridShape s = f.shape();
    std::uint64_t bad = 0;
    CellIndex k{};
    do {
        const double v = f.values[s.flat(k)];
        for (int i = 0; i < f.d; ++i) {
            if (k[i] + 1 >= s.side()) continue;
            const double w = f.values[s.flat(k) + s.stride(i)];
            const bool ok = f.orientation[i] == Orientation::nonincreasing ? w <= v + tol : w + tol >= v;
            if (!ok) ++bad;
        }
    } while (s.next(k));
    return bad;
}

// Membership in F_d: right length, values in [0,1], monotone along every axis.
inline bool is_valid(const MonotoneGridFunction& f) {
    if (f.d < 1 || f.d > kMaxDim || f.m < 0) return false;
    if (static_cast<int>(f.orientation.size()) != f.d) return false;
    if (f.values.size() != f.shape().cells()) return false;
    for (double v : f.values)
        if (!(v >= 0.0 && v <= 1.0)) return false;
    return monotonicity_violations(f) == 0;
}

inline void validate(const MonotoneGridFunction& f) {
    if (!is_valid(f)) throw ValidationError("function is not a valid bounded monotone grid function");
}

inline void require_same_grid(const MonotoneGridFunction& f, const MonotoneGridFunction& g) {
    if (f.d != g.d || f.m != g.m)
        throw ShapeError("grid mismatch: (d=" + std::to_string(f.d) + ", m=" + std::to_string(f.m) +
                         ") vs (d=" + std::to_string(g.d) + ", m=" + std::to_string(g.m) + ")");
    if (f.values.size() != g.values.size()) throw ShapeError("value arrays differ in length");
}

// (sum |a-b|^p * cell_volume)^(1/p)
inline double lp_norm_of_difference(const std::vector<double>& a, const std::vector<double>& b,
                                    double cell_volume, double p) {
    if (p < 1.0) throw DomainError("p must be >= 1");
    double acc = 0.0;
    if (p == 1.0) {
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
        return acc * cell_volume;
    }
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(std::abs(a[i] - b[i]), p);
    return std::pow(acc * cell_volume, 1.0 / p);
}

inline double lp_distance(const MonotoneGridFunction& f, const MonotoneGridFunction& g, double p) {
    require_same_grid(f, g);
    if (f.orientation != g.orientation) throw ShapeError("orientation mismatch");
    return lp_norm_of_difference(f.values, g.values, f.shape().cell_volume(), p);
}

// A cube of side 2^-level * eps with eps = 2^-base; anchor is the multi-index of
// the cube among cubes of the same size, i.e. at resolution base + level.
struct DyadicCube {
    int base = 0;
    int level = 0;
    CellIndex anchor{};

    int resolution() const { return base + level; }
    double side() const { return std::ldexp(1.0, -resolution()); }
    double volume(int d) const { return std::ldexp(1.0, -resolution() * d); }

    DyadicCube child(int d, unsigned which) const {
        DyadicCube c{base, level + 1, {}};
        for (int i = 0; i < d; ++i) c.anchor[i] = 2 * anchor[i] + ((which >> (d - 1 - i)) & 1u);
        return c;
    }

    friend bool operator==(const DyadicCube&, const DyadicCube&) = default;
};

// Cell-index bounds [lo, hi) of the cube on a grid of resolution m.
struct CellRange {
    CellIndex lo{};
    CellIndex hi{};
};

inline CellRange cells_of(const DyadicCube& cube, int d, int m) {
    const int r = cube.resolution();
    if (r < 0 || r > m)
        throw AlignmentError("cube resolution " + std::to_string(r) + " finer than grid " +
                             std::to_string(m));
    CellRange out;
    const int shift = m - r;
    for (int i = 0; i < d; ++i) {
        if ((std::uint64_t{cube.anchor[i]} >> r) != 0) throw AlignmentError("cube lies outside [0,1)^d");
        out.lo[i] = cube.anchor[i] << shift;
        out.hi[i] = (cube.anchor[i] + 1) << shift;
    }
    return out;
}

// (inf, sup) of a monotone function over the cube, read from the two extreme
// corner cells.
template <MonotoneSource F>
std::pair<double, double> cube_range(const F& f, const DyadicCube& cube) {
    const int d = f.dim();
    const CellRange r = cells_of(cube, d, f.resolution());
    CellIndex low{}, high{};
    for (int i = 0; i < d; ++i) {
        const bool dec = f.axis_orientation(i) == Orientation::nonincreasing;
        high[i] = dec ? r.lo[i] : r.hi[i] - 1;
        low[i] = dec ? r.hi[i] - 1 : r.lo[i];
    }
    return {f.at(low), f.at(high)};
}

// Same quantity by scanning every cell of the cube; no monotonicity assumed.
inline std::pair<double, double> cube_range_scan(const MonotoneGridFunction& f, const DyadicCube& cube) {
    const CellRange r = cells_of(cube, f.d, f.m);
    double lo = f.at(r.lo), hi = lo;
    CellIndex k = r.lo;
    for (;;) {
        const double v = f.at(k);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        int i = f.d - 1;
        for (; i >= 0; --i) {
            if (++k[i] < r.hi[i]) break;
            k[i] = r.lo[i];
        }
        if (i < 0) break;
    }
    return {lo, hi};
}

template <MonotoneSource F>
double oscillation(const F& f, const DyadicCube& cube) {
    const auto [lo, hi] = cube_range(f, cube);
    return hi - lo;
}

inline double oscillation_scan(const MonotoneGridFunction& f, const DyadicCube& cube) {
    const auto [lo, hi] = cube_range_scan(f, cube);
    return hi - lo;
}

// Reflects one axis (x_i -> 1 - x_i) and flips its orientation flag.
inline MonotoneGridFunction reflect_axis(const MonotoneGridFunction& f, int axis) {
    const GridShape s = f.shape();
    MonotoneGridFunction out = f;
    const std::uint32_t top = static_cast<std::uint32_t>(s.side() - 1);
    CellIndex k{};
    do {
        CellIndex r = k;
        r[axis] = top - k[axis];
        out.values[s.flat(r)] = f.values[s.flat(k)];
    } while (s.next(k));
    out.orientation[axis] = f.orientation[axis] == Orientation::nonincreasing ? Orientation::nondecreasing
                                                                             : Orientation::nonincreasing;
    return out;
}

inline MonotoneGridFunction orient_all(const MonotoneGridFunction& f, Orientation target) {
    MonotoneGridFunction out = f;
    for (int i = 0; i < f.d; ++i)
        if (out.orientation[i] != target) out = reflect_axis(out, i);
    return out;
}

// Canonical orientation is all-nonincreasing.
inline MonotoneGridFunction canonicalize(const MonotoneGridFunction& f) {
    return orient_all(f, Orientation::nonincreasing);
}

// A = {x : f(x) <= lambda}.
struct ThresholdSet {
    MonotoneGridFunction f;
    double lambda = 0.0;
};

inline std::vector<double> indicator(const ThresholdSet& a) {
    std::vector<double> out(a.f.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.f.values[i] <= a.lambda ? 1.0 : 0.0;
    return out;
}

// f_A on [0,1]^{d-1}: the length of the slice {t : (x, t) in A} along the last
// axis. After reflecting f to be nondecreasing every slice is a down-interval
// [0, t*), so this length is the slice's maximal t (0 for an empty slice).
inline MonotoneGridFunction slice_transform(const MonotoneGridFunction& f, double lambda) {
    if (f.d < 2) throw DomainError("slice transform needs d >= 2");
    const MonotoneGridFunction g = orient_all(f, Orientation::nondecreasing);
    const GridShape s = g.shape();
    const GridShape t{g.d - 1, g.m};
    std::vector<double> out(t.cells(), 0.0);
    const double h = std::ldexp(1.0, -g.m);
    for (std::uint64_t j = 0; j < t.cells(); ++j) {
        std::uint64_t count = 0;
        const std::uint64_t base = j << g.m;
        for (std::uint64_t last = 0; last < s.side(); ++last)
            if (g.values[base + last] <= lambda) ++count;
        out[j] = static_cast<double>(count) * h;
    }
    return {t.d, t.m, std::vector<Orientation>(t.d, Orientation::nonincreasing), std::move(out)};
}

struct IdentitySides {
    double lhs = 0.0; // ||1_A - 1_B||_p
    double rhs = 0.0; // ||f_A - f_B||_1^{1/p}
};

inline IdentitySides indicator_lp_identity_check(const ThresholdSet& a, const ThresholdSet& b, double p) {
    require_same_grid(a.f, b.f);
    if (a.f.orientation != b.f.orientation) throw ShapeError("threshold sets use different orientations");
    if (p < 1.0) throw DomainError("p must be >= 1");
    IdentitySides out;
    out.lhs = lp_norm_of_difference(indicator(a), indicator(b), a.f.shape().cell_volume(), p);
    const MonotoneGridFunction fa = slice_transform(a.f, a.lambda);
    const MonotoneGridFunction fb = slice_transform(b.f, b.lambda);
    out.rhs = std::pow(lp_norm_of_difference(fa.values, fb.values, fa.shape().cell_volume(), 1.0), 1.0 / p);
    return out;
}

// One term w * 1[x in [0, t)] with t given in cells of the owning grid.
struct BoxAtom {
    CellIndex corner{};
    double weight = 0.0;

    friend bool operator==(const BoxAtom&, const BoxAtom&) = default;
};

// f(x) = sum_j w_j 1[x in [0, t_j)], sum_j w_j <= 1. Evaluated lazily, so it can
// stand in for a grid function at any resolution >= m.
struct BoxMixture {
    int d = 1;
    int m = 0;          // resolution the corners are expressed in
    int eval_m = 0;     // resolution cells are addressed at (>= m)
    std::vector<BoxAtom> atoms;

    int dim() const { return d; }
    int resolution() const { return eval_m; }
    Orientation axis_orientation(int) const { return Orientation::nonincreasing; }

    double at(const CellIndex& k) const {
        const int shift = eval_m - m;
        double v = 0.0;
        for (const auto& a : atoms) {
            bool inside = true;
            for (int i = 0; i < d && inside; ++i) inside = (k[i] >> shift) < a.corner[i];
            if (inside) v += a.weight;
        }
        return std::min(v, 1.0);
    }

    BoxMixture at_resolution(int target) const {
        if (target < m) throw ResolutionError("cannot evaluate below the corner resolution");
        BoxMixture out = *this;
        out.eval_m = target;
        return out;
    }

    MonotoneGridFunction rasterize() const {
        check_shape(d, eval_m);
        if (d * eval_m > 30) throw DomainError("dense grid too large");
        const GridShape s{d, eval_m};
        std::vector<double> vals(s.cells());
        CellIndex k{};
        std::uint64_t idx = 0;
        do {
            vals[idx++] = at(k);
        } while (s.next(k));
        return make_function(d, eval_m, Orientation::nonincreasing, std::move(vals));
    }
};

// A grid function read at a finer resolution. Same function on [0,1)^d, so it
// can be bracketed at scales below its own grid.
struct RefinedView {
    const MonotoneGridFunction* f = nullptr;
    int eval_m = 0;

    int dim() const { return f->d; }
    int resolution() const { return eval_m; }
    Orientation axis_orientation(int axis) const { return f->orientation[axis]; }
    double at(const CellIndex& k) const {
        CellIndex c{};
        for (int i = 0; i < f->d; ++i) c[i] = k[i] >> (eval_m - f->m);
        return f->at(c);
    }
};

inline RefinedView refined_view(const MonotoneGridFunction& f, int target) {
    if (target < f.m) throw ResolutionError("cannot view a grid function below its own resolution");
    check_shape(f.d, target);
    return {&f, target};
}

// Random mixture of k corner boxes; corners uniform on {1..2^m}^d, weights are
// the first k coordinates of a flat Dirichlet on k+1 coordinates.
inline BoxMixture random_box_mixture(int d, int m, int k, Rng& rng) {
    check_shape(d, m);
    if (k < 1) throw DomainError("need at least one mixture atom");
    std::uniform_int_distribution<std::uint32_t> corner(1, static_cast<std::uint32_t>(GridShape{d, m}.side()));
    std::exponential_distribution<double> expo(1.0);
    BoxMixture mix{d, m, m, {}};
    std::vector<double> g(k + 1);
    double total = 0.0;
    for (auto& x : g) total += (x = expo(rng));
    for (int j = 0; j < k; ++j) {
        BoxAtom a;
        for (int i = 0; i < d; ++i) a.corner[i] = corner(rng);
        a.weight = g[j] / total;
        mix.atoms.push_back(a);
    }
    return mix;
}

inline MonotoneGridFunction sample_block_decreasing(int d, int m, int k, std::uint64_t seed) {
    Rng rng = make_rng(seed, "sample_block_decreasing");
    return random_box_mixture(d, m, k, rng).rasterize();
}

} // namespace monoent
