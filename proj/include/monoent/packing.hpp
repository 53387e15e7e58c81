#pragma once

// Separated families behind the entropy lower bounds, greedy packing, and an
// exhaustive oracle for packing/covering numbers of tiny monotone classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/dynamic_bitset.hpp>

#include "error.hpp"
#include "grid_fn.hpp"
#include "seeding.hpp"

namespace monoent {

enum class FamilyKind { diagonal, antidiagonal, generic };

inline const char* to_string(FamilyKind k) {
    switch (k) {
    case FamilyKind::diagonal: return "diagonal";
    case FamilyKind::antidiagonal: return "antidiagonal";
    case FamilyKind::generic: return "generic";
    }
    return "?";
}

// true = +, false = -
using SignPattern = std::vector<bool>;

inline SignPattern pattern_from_bits(std::size_t size, std::uint64_t bits) {
    SignPattern s(size);
    for (std::size_t i = 0; i < size && i < 64; ++i) s[i] = (bits >> i) & 1u;
    return s;
}

inline SignPattern random_pattern(std::size_t size, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    SignPattern s(size);
    for (std::size_t i = 0; i < size; ++i) s[i] = coin(rng);
    return s;
}

// ---------------------------------------------------------------------------
// Diagonal family: on the side-eps cube k,
//   g = (k_1 + ... + k_d + 1) eps / (3d) +/- eps / (6d).

inline std::size_t diagonal_pattern_size(int d, int n) { return std::size_t{1} << (n * d); }

inline MonotoneGridFunction diagonal_member(int d, int n, const SignPattern& signs) {
    check_shape(d, n);
    const GridShape s{d, n};
    if (signs.size() != s.cells()) throw ShapeError("diagonal pattern needs one sign per cube");
    const double eps = std::ldexp(1.0, -n);
    std::vector<double> v(s.cells());
    CellIndex k{};
    std::uint64_t idx = 0;
    do {
        std::uint64_t sum = 0;
        for (int i = 0; i < d; ++i) sum += k[i];
        // (sum + 1) eps/(3d) +/- eps/(6d), as one integer multiple so ties stay exact
        const std::uint64_t units = 2 * (sum + 1) + (signs[idx] ? 1 : 0) - (signs[idx] ? 0 : 1);
        v[idx] = static_cast<double>(units) * eps / (6.0 * d);
        ++idx;
    } while (s.next(k));
    return make_function(d, n, Orientation::nondecreasing, std::move(v));
}

// ---------------------------------------------------------------------------
// Antidiagonal family: cubes with k_1 + ... + k_d = 2^n carry 1/2 +/- 1/2.
// Extended by 1 below that antidiagonal and 0 above; since the qualified cubes
// form an antichain the extension is nonincreasing for every pattern.

inline std::vector<std::uint64_t> qualified_cubes(int d, int n) {
    check_shape(d, n);
    const GridShape s{d, n};
    std::vector<std::uint64_t> out;
    CellIndex k{};
    std::uint64_t idx = 0;
    do {
        std::uint64_t sum = 0;
        for (int i = 0; i < d; ++i) sum += k[i];
        if (sum == s.side()) out.push_back(idx);
        ++idx;
    } while (s.next(k));
    return out;
}

inline MonotoneGridFunction antidiagonal_member(int d, int n, const SignPattern& signs) {
    check_shape(d, n);
    const GridShape s{d, n};
    const auto q = qualified_cubes(d, n);
    if (signs.size() != q.size()) throw ShapeError("antidiagonal pattern needs one sign per qualified cube");
    std::vector<double> v(s.cells());
    CellIndex k{};
    std::uint64_t idx = 0;
    std::size_t next_q = 0;
    do {
        std::uint64_t sum = 0;
        for (int i = 0; i < d; ++i) sum += k[i];
        if (sum < s.side()) v[idx] = 1.0;
        else if (sum > s.side()) v[idx] = 0.0;
        else v[idx] = signs[next_q++] ? 1.0 : 0.0;
        ++idx;
    } while (s.next(k));
    return make_function(d, n, Orientation::nonincreasing, std::move(v));
}

// ---------------------------------------------------------------------------

struct SeparatedFamily {
    std::vector<MonotoneGridFunction> members;
    FamilyKind kind = FamilyKind::generic;
    double eps = 0.0;
    double certified_floor = 0.0; // proven lower bound on the min pairwise L^p distance
    double norm_p = 1.0;
    std::size_t min_diff_cubes = 0;
};

// floor(eps^-d / 16): the Hamming radius of the balls B(g) in the lower-bound argument.
inline std::size_t lower_bound_hamming_radius(int d, int n) { return diagonal_pattern_size(d, n) / 16; }

inline std::size_t hamming_distance(const MonotoneGridFunction& a, const MonotoneGridFunction& b) {
    std::size_t h = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) h += a.values[i] != b.values[i];
    return h;
}

inline double measured_min_distance(const std::vector<MonotoneGridFunction>& members, double p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) best = std::min(best, lp_distance(members[i], members[j], p));
    return best;
}

// Greedy first-fit subset whose pairwise cell-level Hamming distance exceeds
// min_diff_cubes. Each differing cell contributes at least gap^p * vol to
// ||.||_p^p, where gap is the family's per-cube value difference.
inline SeparatedFamily hamming_separated_subset(const std::vector<MonotoneGridFunction>& family, FamilyKind kind,
                                                std::size_t min_diff_cubes, double p = 1.0) {
    if (family.empty()) throw DomainError("empty family");
    for (const auto& f : family) {
        require_same_grid(f, family.front());
        if (f.orientation != family.front().orientation) throw ShapeError("family members differ in orientation");
    }
    const auto& f0 = family.front();
    SeparatedFamily out;
    out.kind = kind;
    out.norm_p = p;
    out.eps = std::ldexp(1.0, -f0.m);
    out.min_diff_cubes = min_diff_cubes;

    double gap = 0.0;
    switch (kind) {
    case FamilyKind::diagonal: gap = out.eps / (3.0 * f0.d); break;
    case FamilyKind::antidiagonal: gap = 1.0; break;
    case FamilyKind::generic: {
        gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < family.size(); ++i)
            for (std::size_t j = i + 1; j < family.size(); ++j)
                for (std::size_t c = 0; c < f0.values.size(); ++c) {
                    const double g = std::abs(family[i].values[c] - family[j].values[c]);
                    if (g > 0) gap = std::min(gap, g);
                }
        if (!std::isfinite(gap)) gap = 0.0;
        break;
    }
    }

    for (const auto& f : family) {
        bool ok = true;
        for (const auto& kept : out.members)
            if (hamming_distance(f, kept) <= min_diff_cubes) {
                ok = false;
                break;
            }
        if (ok) out.members.push_back(f);
    }
    const double vol = f0.shape().cell_volume();
    out.certified_floor = std::pow(static_cast<double>(min_diff_cubes) * std::pow(gap, p) * vol, 1.0 / p);
    return out;
}

// ---------------------------------------------------------------------------
// Greedy packing: first-fit maximal subset with pairwise distance > eps.

template <class Dist>
std::vector<std::size_t> greedy_packing_indices(std::size_t count, Dist&& dist, double eps) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < count; ++i) {
        bool ok = true;
        for (std::size_t j : kept)
            if (!(dist(i, j) > eps)) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(i);
    }
    return kept;
}

inline std::size_t greedy_packing(const std::vector<MonotoneGridFunction>& points, double eps, double p) {
    if (points.empty()) throw DomainError("greedy packing needs at least one point");
    return greedy_packing_indices(points.size(), [&](std::size_t i, std::size_t j) { return lp_distance(points[i], points[j], p); }, eps)
        .size();
}

// ---------------------------------------------------------------------------
// Exhaustive oracle on an a x b grid with values in {0, 1/q, ..., 1},
// nonincreasing along both axes.

struct OracleClass {
    int rows = 0;
    int cols = 0;
    int levels = 1;
    std::vector<std::vector<double>> members;

    double cell_volume() const { return 1.0 / (rows * cols); }
};

inline constexpr double kOracleStateBudget = 1e6;

inline OracleClass enumerate_monotone_class(int rows, int cols, int levels) {
    if (rows < 1 || cols < 1 || levels < 1) throw DomainError("oracle needs rows, cols, levels >= 1");
    if (std::pow(levels + 1.0, rows * cols) > kOracleStateBudget)
        throw BudgetError("(q+1)^(ab) = " + std::to_string(std::pow(levels + 1.0, rows * cols)) +
                          " states exceeds the oracle budget");
    OracleClass cls{rows, cols, levels, {}};
    std::vector<int> cur(rows * cols, 0);
    // row-major fill; each entry is bounded above by its left and upper neighbours
    auto rec = [&](auto&& self, int pos) -> void {
        if (pos == rows * cols) {
            std::vector<double> v(cur.size());
            for (std::size_t i = 0; i < cur.size(); ++i) v[i] = static_cast<double>(cur[i]) / levels;
            cls.members.push_back(std::move(v));
            return;
        }
        const int r = pos / cols, c = pos % cols;
        int hi = levels;
        if (r > 0) hi = std::min(hi, cur[pos - cols]);
        if (c > 0) hi = std::min(hi, cur[pos - 1]);
        for (int v = 0; v <= hi; ++v) {
            cur[pos] = v;
            self(self, pos + 1);
        }
    };
    rec(rec, 0);
    return cls;
}

// Pairwise L^p distance matrix of the class.
inline std::vector<std::vector<double>> distance_matrix(const OracleClass& cls, double p) {
    const std::size_t N = cls.members.size();
    std::vector<std::vector<double>> D(N, std::vector<double>(N, 0.0));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j)
            D[i][j] = D[j][i] = lp_norm_of_difference(cls.members[i], cls.members[j], cls.cell_volume(), p);
    return D;
}

using Bitset = boost::dynamic_bitset<>;

struct SearchResult {
    std::size_t value = 0;
    std::size_t lower = 0; // certified bounds; equal to value when exact
    std::size_t upper = 0;
    bool exact = true;
    std::uint64_t nodes = 0;
};

inline constexpr std::uint64_t kDefaultNodeBudget = 50'000'000;

// Maximum clique of the graph "distance > eps" (branch and bound with a greedy
// colouring bound), i.e. the exact packing number M(eps).
inline SearchResult exact_packing(const std::vector<std::vector<double>>& D, double eps,
                                  std::uint64_t node_budget = kDefaultNodeBudget) {
    const std::size_t N = D.size();
    std::vector<Bitset> adj(N, Bitset(N));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (i != j && D[i][j] > eps) adj[i].set(j);

    SearchResult res;
    std::size_t best = N > 0 ? 1 : 0;
    std::size_t root_bound = N;
    bool aborted = false;

    auto expand = [&](auto&& self, std::size_t depth, Bitset cand) -> void {
        if (aborted) return;
        if (++res.nodes > node_budget) {
            aborted = true;
            return;
        }
        // greedy colouring of the candidates
        std::vector<std::size_t> order, colour;
        Bitset uncoloured = cand;
        std::size_t c = 0;
        while (uncoloured.any()) {
            ++c;
            Bitset q = uncoloured;
            for (auto v = q.find_first(); v != Bitset::npos; v = q.find_next(v)) {
                uncoloured.reset(v);
                q &= ~adj[v];
                order.push_back(v);
                colour.push_back(c);
            }
        }
        if (depth == 0) root_bound = c;
        for (std::size_t i = order.size(); i-- > 0;) {
            if (depth + colour[i] <= best) return;
            const std::size_t v = order[i];
            Bitset next = cand & adj[v];
            if (next.none()) {
                best = std::max(best, depth + 1);
            } else {
                self(self, depth + 1, next);
                if (aborted) return;
            }
            cand.reset(v);
        }
    };
    if (N > 0) {
        Bitset all(N);
        all.set();
        expand(expand, 0, all);
    }
    res.exact = !aborted;
    res.value = best;
    res.lower = best;
    res.upper = aborted ? std::max(best, root_bound) : best;
    return res;
}

// Minimum number of class members whose closed eps-balls cover the class
// (internal covering number N(eps)), by branch and bound. Nodes are pruned
// with a Lagrangian bound: for any u >= 0 on the uncovered elements,
//   sum_e u_e + sum_c min(0, 1 - sum_{e in ball(c)} u_e)
// is at most the size of any cover, so subgradient steps on u tighten it
// towards the LP relaxation. Distances are symmetric, so the centres covering
// e are exactly ball(e).
inline SearchResult exact_cover(const std::vector<std::vector<double>>& D, double eps,
                                std::uint64_t node_budget = kDefaultNodeBudget) {
    const std::size_t N = D.size();
    SearchResult res;
    if (N == 0) return res;
    std::vector<Bitset> ball(N, Bitset(N));
    std::vector<std::vector<std::size_t>> members(N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (D[i][j] <= eps) {
                ball[i].set(j);
                members[i].push_back(j);
            }

    // greedy cover as the initial incumbent
    std::size_t best = 0;
    {
        Bitset unc(N);
        unc.set();
        while (unc.any()) {
            std::size_t arg = 0, most = 0;
            for (std::size_t c = 0; c < N; ++c) {
                const std::size_t k = (ball[c] & unc).count();
                if (k > most) most = k, arg = c;
            }
            unc &= ~ball[arg];
            ++best;
        }
    }

    std::vector<char> open(N), usable(N);
    std::vector<double> reduced(N), grad(N);
    // Lagrangian bound on covering `unc` with `allowed` centres; u is warm
    // started by the caller and left at the best multipliers found.
    auto bound = [&](const Bitset& unc, const Bitset& allowed, std::vector<double>& u, std::size_t used,
                     int iters) -> double {
        for (std::size_t i = 0; i < N; ++i) {
            open[i] = unc.test(i);
            usable[i] = allowed.test(i);
            if (!open[i]) u[i] = 0.0;
        }
        for (std::size_t e = 0; e < N; ++e) {
            if (!open[e]) continue;
            bool any = false;
            for (std::size_t c : members[e]) any = any || usable[c];
            if (!any) return std::numeric_limits<double>::infinity();
        }
        double lb_best = -1.0;
        std::vector<double> u_best = u;
        double step = 1.0;
        for (int it = 0; it < iters; ++it) {
            double L = 0.0;
            for (std::size_t e = 0; e < N; ++e) L += open[e] ? u[e] : 0.0;
            for (std::size_t c = 0; c < N; ++c) {
                if (!usable[c]) continue;
                double r = 1.0;
                for (std::size_t e : members[c]) r -= open[e] ? u[e] : 0.0;
                reduced[c] = r;
                if (r < 0) L += r;
            }
            if (L > lb_best) {
                lb_best = L;
                u_best = u;
            }
            if (used + std::ceil(lb_best - 1e-9) >= static_cast<double>(best)) break;
            double norm = 0.0;
            for (std::size_t e = 0; e < N; ++e) {
                if (!open[e]) continue;
                double g = 1.0;
                for (std::size_t c : members[e]) g -= (usable[c] && reduced[c] < 0) ? 1.0 : 0.0;
                grad[e] = g;
                norm += g * g;
            }
            if (norm == 0.0) break; // u is optimal for the relaxation
            const double target = static_cast<double>(best) - static_cast<double>(used);
            const double t = step * std::max(target - L, 0.1) / norm;
            for (std::size_t e = 0; e < N; ++e)
                if (open[e]) u[e] = std::max(0.0, u[e] + t * grad[e]);
            if (it % 10 == 9) step *= 0.7;
        }
        u = u_best;
        return lb_best;
    };

    Bitset all(N);
    all.set();
    // start from the dual-feasible point u_e = 1 / (largest ball containing e)
    std::vector<double> u0(N);
    for (std::size_t e = 0; e < N; ++e) {
        std::size_t g = 0;
        for (std::size_t c : members[e]) g = std::max(g, members[c].size());
        u0[e] = 1.0 / static_cast<double>(g);
    }
    const double root = bound(all, all, u0, 0, 500);
    const std::size_t root_lb = static_cast<std::size_t>(std::max(1.0, std::ceil(root - 1e-9)));
    bool aborted = false;

    // Sibling branches exclude the centres already tried: a cover using an
    // earlier centre was explored in that earlier branch.
    auto search = [&](auto&& self, const Bitset& unc, Bitset allowed, std::size_t used, std::vector<double> u) -> void {
        if (aborted) return;
        if (++res.nodes > node_budget) {
            aborted = true;
            return;
        }
        if (unc.none()) {
            best = std::min(best, used);
            return;
        }
        if (used + 1 >= best) return;
        const double lb = bound(unc, allowed, u, used, 40);
        if (used + std::ceil(lb - 1e-9) >= static_cast<double>(best)) return;
        // branch on the uncovered element with the fewest allowed centres
        std::size_t pick = unc.find_first(), fewest = N + 1;
        for (auto e = unc.find_first(); e != Bitset::npos; e = unc.find_next(e)) {
            std::size_t k = 0;
            for (std::size_t c : members[e]) k += allowed.test(c);
            if (k < fewest) fewest = k, pick = e;
        }
        // most newly covered first
        std::vector<std::pair<std::size_t, std::size_t>> options;
        for (std::size_t c : members[pick])
            if (allowed.test(c)) options.emplace_back((ball[c] & unc).count(), c);
        std::sort(options.begin(), options.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        // drop centres whose coverage is contained in an earlier option's
        std::vector<Bitset> taken;
        for (const auto& [gain, c] : options) {
            const Bitset cov = ball[c] & unc;
            bool dominated = false;
            for (const auto& t : taken)
                if (cov.is_subset_of(t)) {
                    dominated = true;
                    break;
                }
            if (!dominated) {
                taken.push_back(cov);
                self(self, unc - ball[c], allowed, used + 1, u);
                if (aborted) return;
            }
            allowed.reset(c);
        }
    };
    search(search, all, all, 0, u0);
    res.exact = !aborted;
    res.value = best;
    res.upper = best;
    res.lower = aborted ? std::min(root_lb, best) : best;
    return res;
}

struct OracleRun {
    std::size_t count = 0;
    double eps = 0.0;
    double p = 1.0;
    SearchResult packing;     // M(eps)
    SearchResult packing_2x;  // M(2 eps)
    SearchResult cover;       // N(eps)
    std::size_t greedy = 0;   // greedy packing at eps, enumeration order

    bool exact() const { return packing.exact && packing_2x.exact && cover.exact; }
    // M(2 eps) <= N(eps) <= M(eps), on certified bounds when a search was cut short.
    bool sandwich_holds() const { return packing_2x.lower <= cover.upper && cover.lower <= packing.upper &&
                                         (!exact() || (packing_2x.value <= cover.value && cover.value <= packing.value)); }
};

inline OracleRun exhaustive_class_oracle(const OracleClass& cls, double eps, double p,
                                         std::uint64_t node_budget = kDefaultNodeBudget) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    const auto D = distance_matrix(cls, p);
    OracleRun run;
    run.count = cls.members.size();
    run.eps = eps;
    run.p = p;
    run.packing = exact_packing(D, eps, node_budget);
    run.packing_2x = exact_packing(D, 2.0 * eps, node_budget);
    run.cover = exact_cover(D, eps, node_budget);
    run.greedy = greedy_packing_indices(D.size(), [&](std::size_t i, std::size_t j) { return D[i][j]; }, eps).size();
    return run;
}

inline OracleRun exhaustive_class_oracle(int rows, int cols, int levels, double eps, double p) {
    return exhaustive_class_oracle(enumerate_monotone_class(rows, cols, levels), eps, p);
}

} // namespace monoent
