#pragma once

// Oscillation-adaptive eps-brackets for bounded monotone functions.
//
// Starting from the eps^-d cubes of side eps = 2^-n, a cube of side 2^-i eps is
// kept ("selected") when the oscillation of f on it is at most K^{i+1} eps and is
// split into 2^d children otherwise; at depth l every cube is kept. On a kept cube
// the envelopes are inf f and sup f rounded down/up to multiples of K^{i+1} eps;
// on depth-l cubes they are 0 and 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "grid_fn.hpp"
#include "rates.hpp"
#include "seeding.hpp"

namespace monoent {

// Relative slack on the selection threshold. It only ever selects more cubes,
// which keeps every counting bound valid and can only widen the gap.
inline constexpr double kSelectionGuard = 1e-12;

struct BracketConfig {
    int d = 1;
    double p = 1.0;
    int n = 1;
    double K = 2.0;
    double log2_K = 1.0;
    std::optional<double> beta; // empty when p == 1
    int l = 1;

    double eps() const { return std::ldexp(1.0, -n); }
    // K^{level+1} eps
    double quantum(int level) const { return std::exp2((level + 1) * log2_K - n); }
    int required_resolution() const { return n + l; }
};

inline BracketConfig make_config(int d, double p, int n) {
    check_dimension(d);
    if (p < 1.0) throw DomainError("p must be >= 1");
    if (n < 1) throw DomainError("n must be >= 1");
    BracketConfig c;
    c.d = d;
    c.p = p;
    c.n = n;
    if (p == 1.0) {
        c.log2_K = d;
    } else {
        c.beta = beta_exponent(d, p);
        c.log2_K = *c.beta;
    }
    c.K = std::exp2(c.log2_K);
    // smallest l with K^-l <= 2^-n, i.e. l * log2 K >= n
    c.l = static_cast<int>(std::ceil(n / c.log2_K - 1e-12));
    if (c.l < 1) c.l = 1;
    return c;
}

struct DyadicScale {
    int n = 1;
    bool exact = true; // false when eps was rounded down to 2^-n
};

inline DyadicScale dyadic_scale_for(double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
    int exp = 0;
    const double mant = std::frexp(eps, &exp); // eps = mant * 2^exp, mant in [0.5, 1)
    if (mant == 0.5) return {1 - exp, true};
    return {-exp + 1, false};
}

struct SelectedCube {
    DyadicCube cube;
    double inf = 0.0; // range of f on the cube
    double sup = 0.0;
};

struct LevelStats {
    std::uint64_t selected = 0;     // s_i
    std::uint64_t not_selected = 0; // n_i
    double measure = 0.0;           // |U_i|
};

struct PartitionResult {
    int d = 1;
    int n = 1;
    int l = 1;
    std::vector<std::vector<SelectedCube>> selected; // by level 0..l
    std::vector<LevelStats> stats;                   // by level 0..l

    int levels_used() const {
        int top = -1;
        for (int i = 0; i <= l; ++i)
            if (stats[i].selected > 0) top = i;
        return top + 1;
    }
};

template <MonotoneSource F>
void check_bracket_input(const F& f, const BracketConfig& cfg) {
    if (f.dim() != cfg.d)
        throw ShapeError("function has d=" + std::to_string(f.dim()) + ", config has d=" + std::to_string(cfg.d));
    if (f.resolution() < cfg.required_resolution())
        throw ResolutionError("grid refinement m=" + std::to_string(f.resolution()) + " is below n + l = " +
                              std::to_string(cfg.required_resolution()));
}

template <MonotoneSource F>
PartitionResult adaptive_partition(const F& f, const BracketConfig& cfg) {
    check_bracket_input(f, cfg);
    const int d = cfg.d;
    PartitionResult out;
    out.d = d;
    out.n = cfg.n;
    out.l = cfg.l;
    out.selected.resize(cfg.l + 1);
    out.stats.resize(cfg.l + 1);

    std::vector<DyadicCube> current;
    {
        const GridShape top{d, cfg.n};
        current.reserve(top.cells());
        CellIndex k{};
        do {
            current.push_back({cfg.n, 0, k});
        } while (top.next(k));
    }

    const unsigned children = 1u << d;
    for (int level = 0; level <= cfg.l; ++level) {
        const double threshold = cfg.quantum(level) * (1.0 + kSelectionGuard);
        std::vector<DyadicCube> next;
        auto& kept = out.selected[level];
        for (const auto& cube : current) {
            const auto [lo, hi] = cube_range(f, cube);
            if (level == cfg.l || hi - lo <= threshold) {
                kept.push_back({cube, lo, hi});
            } else {
                for (unsigned c = 0; c < children; ++c) next.push_back(cube.child(d, c));
            }
        }
        auto& st = out.stats[level];
        st.selected = kept.size();
        st.not_selected = next.size() / children;
        st.measure = static_cast<double>(st.selected) * std::ldexp(1.0, -d * (cfg.n + level));
        current = std::move(next);
    }
    return out;
}

struct Envelope {
    double lower = 0.0;
    double upper = 1.0;
};

// Rounds [inf, sup] outward to the lattice q Z, then clips to [0, 1].
inline Envelope quantize(double inf, double sup, double q) {
    double lo = q * std::floor(inf / q);
    if (lo > inf) lo -= q;
    double up = q * std::ceil(sup / q);
    if (up < sup) up += q;
    return {std::clamp(lo, 0.0, 1.0), std::clamp(up, 0.0, 1.0)};
}

struct BracketPair {
    BracketConfig cfg;
    PartitionResult partition;
    std::vector<std::vector<Envelope>> envelope; // parallel to partition.selected
    double gap_p = 0.0;                          // ||upper - lower||_p

    MonotoneGridFunction lower(int m) const { return rasterize(m, true); }
    MonotoneGridFunction upper(int m) const { return rasterize(m, false); }

private:
    MonotoneGridFunction rasterize(int m, bool low) const {
        if (m < cfg.n + partition.levels_used() - 1) throw ResolutionError("raster grid is coarser than the partition");
        MonotoneGridFunction g = constant_function(cfg.d, m, 0.0);
        const GridShape s = g.shape();
        for (std::size_t i = 0; i < partition.selected.size(); ++i) {
            for (std::size_t j = 0; j < partition.selected[i].size(); ++j) {
                const double v = low ? envelope[i][j].lower : envelope[i][j].upper;
                const CellRange r = cells_of(partition.selected[i][j].cube, cfg.d, m);
                CellIndex k = r.lo;
                for (;;) {
                    g.values[s.flat(k)] = v;
                    int a = cfg.d - 1;
                    for (; a >= 0; --a) {
                        if (++k[a] < r.hi[a]) break;
                        k[a] = r.lo[a];
                    }
                    if (a < 0) break;
                }
            }
        }
        return g;
    }
};

inline BracketPair bracket_from_partition(PartitionResult part, const BracketConfig& cfg) {
    BracketPair out;
    out.cfg = cfg;
    out.envelope.resize(part.selected.size());
    double acc = 0.0;
    for (int level = 0; level <= cfg.l; ++level) {
        const double q = cfg.quantum(level);
        const double vol = std::ldexp(1.0, -cfg.d * (cfg.n + level));
        auto& env = out.envelope[level];
        env.reserve(part.selected[level].size());
        for (const auto& sc : part.selected[level]) {
            const Envelope e = level == cfg.l ? Envelope{0.0, 1.0} : quantize(sc.inf, sc.sup, q);
            env.push_back(e);
            const double g = e.upper - e.lower;
            acc += (cfg.p == 1.0 ? g : std::pow(g, cfg.p)) * vol;
        }
    }
    out.gap_p = cfg.p == 1.0 ? acc : std::pow(acc, 1.0 / cfg.p);
    out.partition = std::move(part);
    return out;
}

template <MonotoneSource F>
BracketPair build_bracket(const F& f, const BracketConfig& cfg) {
    return bracket_from_partition(adaptive_partition(f, cfg), cfg);
}

// ---------------------------------------------------------------------------
// Verification

namespace detail {

inline std::uint64_t morton(const CellIndex& a, int d, int bits) {
    std::uint64_t code = 0;
    for (int b = bits - 1; b >= 0; --b)
        for (int i = 0; i < d; ++i) code = (code << 1) | ((a[i] >> b) & 1u);
    return code;
}

} // namespace detail

// Selected cubes are pairwise disjoint and cover [0,1)^d. Each dyadic cube is a
// contiguous interval of Morton codes at the finest level, so this is an exact
// interval-tiling check.
inline bool partition_is_exact(const PartitionResult& part) {
    const int finest = part.n + part.l;
    if (part.d * finest > 63) throw DomainError("partition too fine for the exactness check");
    std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
    for (const auto& level : part.selected) {
        for (const auto& sc : level) {
            const int r = sc.cube.resolution();
            const int shift = part.d * (finest - r);
            const std::uint64_t start = detail::morton(sc.cube.anchor, part.d, r) << shift;
            iv.emplace_back(start, start + (std::uint64_t{1} << shift));
        }
    }
    std::sort(iv.begin(), iv.end());
    std::uint64_t at = 0;
    for (const auto& [a, b] : iv) {
        if (a != at) return false;
        at = b;
    }
    return at == (std::uint64_t{1} << (part.d * finest));
}

// lower <= f <= upper on every selected cube, with inf/sup read from corner cells.
template <MonotoneSource F>
bool sandwich_holds(const F& f, const BracketPair& pair) {
    for (std::size_t i = 0; i < pair.partition.selected.size(); ++i) {
        for (std::size_t j = 0; j < pair.partition.selected[i].size(); ++j) {
            const auto [lo, hi] = cube_range(f, pair.partition.selected[i][j].cube);
            const Envelope& e = pair.envelope[i][j];
            if (!(e.lower <= lo && hi <= e.upper && 0.0 <= e.lower && e.upper <= 1.0)) return false;
        }
    }
    return true;
}

// Cell-by-cell check against rasterized envelopes; no monotonicity used.
inline bool sandwich_holds_dense(const MonotoneGridFunction& f, const BracketPair& pair) {
    const auto lo = pair.lower(f.m), hi = pair.upper(f.m);
    for (std::size_t c = 0; c < f.values.size(); ++c)
        if (!(lo.values[c] <= f.values[c] && f.values[c] <= hi.values[c])) return false;
    return true;
}

// Checks randomly drawn cells of f against the envelope of the cube containing
// them. For resolutions where the dense check does not fit in memory.
template <MonotoneSource F>
bool sandwich_holds_sampled(const F& f, const BracketPair& pair, std::size_t samples, Rng& rng) {
    const int d = pair.cfg.d, m = f.resolution();
    std::vector<std::unordered_map<std::uint64_t, std::size_t>> lookup(pair.partition.selected.size());
    for (std::size_t i = 0; i < lookup.size(); ++i) {
        const GridShape s{d, pair.cfg.n + static_cast<int>(i)};
        for (std::size_t j = 0; j < pair.partition.selected[i].size(); ++j)
            lookup[i].emplace(s.flat(pair.partition.selected[i][j].cube.anchor), j);
    }
    std::uniform_int_distribution<std::uint64_t> coord(0, (std::uint64_t{1} << m) - 1);
    for (std::size_t t = 0; t < samples; ++t) {
        CellIndex k{};
        for (int a = 0; a < d; ++a) k[a] = static_cast<std::uint32_t>(coord(rng));
        bool found = false;
        for (std::size_t i = 0; i < lookup.size() && !found; ++i) {
            const int r = pair.cfg.n + static_cast<int>(i);
            CellIndex anchor{};
            for (int a = 0; a < d; ++a) anchor[a] = k[a] >> (m - r);
            const auto it = lookup[i].find(GridShape{d, r}.flat(anchor));
            if (it == lookup[i].end()) continue;
            found = true;
            const double v = f.at(k);
            const Envelope& e = pair.envelope[i][it->second];
            if (!(e.lower <= v && v <= e.upper)) return false;
        }
        if (!found) return false;
    }
    return true;
}

struct LevelBoundRow {
    int level = 0;
    double n_prev = 0;         // n_{i-1}
    double n_prev_bound = 0;   // d^2 2^{(i-1)(d-1)} K^-i eps^-d
    double measure = 0;        // |U_i|
    double measure_bound = 0;  // 2 d^2 (2K)^-i
    double selected = 0;       // s_i
    double selected_bound = 0; // 2^d n_{i-1}
};

struct LevelBoundReport {
    std::vector<LevelBoundRow> rows; // levels 1..l
    double max_n_ratio = 0.0;
    double max_measure_ratio = 0.0;
};

// Checks the per-level counting bounds; throws InvariantViolation naming the level.
inline LevelBoundReport verify_level_bounds(const PartitionResult& part, const BracketConfig& cfg) {
    constexpr double slack = 1.0 + 1e-9;
    const int d = cfg.d;
    const double two_d = std::ldexp(1.0, d);
    const auto& st = part.stats;
    if (static_cast<int>(st.size()) != cfg.l + 1) throw ShapeError("partition does not match config");
    if (st[0].selected + st[0].not_selected != (std::uint64_t{1} << (d * cfg.n)))
        throw InvariantViolation(0, "s_0 + n_0 != eps^-d");
    if (st[0].measure > 1.0) throw InvariantViolation(0, "|U_0| > 1");

    LevelBoundReport rep;
    for (int i = 1; i <= cfg.l; ++i) {
        LevelBoundRow row;
        row.level = i;
        row.n_prev = static_cast<double>(st[i - 1].not_selected);
        row.n_prev_bound = double(d) * d * std::exp2((i - 1) * (d - 1) - i * cfg.log2_K + double(cfg.n) * d);
        row.measure = st[i].measure;
        row.measure_bound = 2.0 * d * d * std::exp2(-i * (1.0 + cfg.log2_K));
        row.selected = static_cast<double>(st[i].selected);
        row.selected_bound = two_d * row.n_prev;

        if ((st[i].selected + st[i].not_selected) != (std::uint64_t{1} << d) * st[i - 1].not_selected)
            throw InvariantViolation(i, "s_i + n_i != 2^d n_{i-1}");
        if (row.n_prev > row.n_prev_bound * slack)
            throw InvariantViolation(i, "n_{i-1} = " + std::to_string(row.n_prev) + " exceeds " +
                                            std::to_string(row.n_prev_bound));
        if (row.measure > row.measure_bound * slack)
            throw InvariantViolation(i, "|U_i| = " + std::to_string(row.measure) + " exceeds " +
                                            std::to_string(row.measure_bound));
        if (row.selected > row.selected_bound) throw InvariantViolation(i, "s_i exceeds 2^d n_{i-1}");

        if (row.n_prev_bound > 0) rep.max_n_ratio = std::max(rep.max_n_ratio, row.n_prev / row.n_prev_bound);
        rep.max_measure_ratio = std::max(rep.max_measure_ratio, row.measure / row.measure_bound);
        rep.rows.push_back(row);
    }
    return rep;
}

struct GapReport {
    double gap = 0.0;
    double rate = 0.0;  // regime rate function at eps
    double ratio = 0.0; // gap / rate
    Regime regime = Regime::subcritical;
};

inline GapReport gap_bound_check(const BracketPair& pair) {
    const RegimeRates rr = entropy_exponent(pair.cfg.d, pair.cfg.p);
    GapReport g;
    g.gap = pair.gap_p;
    g.regime = rr.regime;
    g.rate = rr.gap_rate(pair.cfg.eps());
    g.ratio = g.gap / g.rate;
    return g;
}

// ---------------------------------------------------------------------------
// Net size probe

struct NetSizeEstimate {
    std::size_t distinct_lower = 0;
    std::size_t distinct_upper = 0;
};

inline std::size_t envelope_fingerprint(const MonotoneGridFunction& g) {
    const std::string_view bytes(reinterpret_cast<const char*>(g.values.data()), g.values.size() * sizeof(double));
    return std::hash<std::string_view>{}(bytes);
}

// Counts distinct realized envelopes over sample_count draws of gen(rng). Each
// envelope is compared as a function, rasterized at resolution n + l.
template <class Gen>
NetSizeEstimate net_size_estimate(Gen&& gen, const BracketConfig& cfg, std::size_t sample_count, std::uint64_t seed) {
    if (sample_count < 1) throw DomainError("sample_count must be >= 1");
    Rng rng = make_rng(seed, "net_size_estimate");
    std::unordered_set<std::size_t> lower, upper;
    const int m = cfg.required_resolution();
    for (std::size_t s = 0; s < sample_count; ++s) {
        const auto f = gen(rng);
        const BracketPair pair = build_bracket(f, cfg);
        lower.insert(envelope_fingerprint(pair.lower(m)));
        upper.insert(envelope_fingerprint(pair.upper(m)));
    }
    return {lower.size(), upper.size()};
}

} // namespace monoent
