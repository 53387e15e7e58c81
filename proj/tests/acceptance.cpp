// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <monoent/monoent.hpp>

using namespace monoent;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Instance {
    int d;
    double p;
    int n;
    BoxMixture f;
};

// 500 mixtures spread over d in {1,2,3}, p in {1,2,3}, n in {2..6}
const std::vector<Instance>& instances() {
    static const std::vector<Instance> all = [] {
        std::vector<Instance> v;
        Rng rng = make_rng(2024, "acceptance-instances");
        for (int i = 0; i < 500; ++i) {
            const int d = 1 + i % 3;
            const double p = 1.0 + (i / 3) % 3;
            const int n = 2 + (i / 9) % 5;
            const auto cfg = make_config(d, p, n);
            const int atoms = 1 + static_cast<int>(rng() % 4);
            v.push_back({d, p, n, random_box_mixture(d, cfg.required_resolution(), atoms, rng)});
        }
        return v;
    }();
    return all;
}

Outcome bracket_sandwich() {
    Outcome o;
    Rng probe = make_rng(7, "acceptance-probe");
    int dense = 0, sampled = 0, bad = 0;
    for (const auto& in : instances()) {
        const auto cfg = make_config(in.d, in.p, in.n);
        const auto pair = build_bracket(in.f, cfg);
        bool ok = partition_is_exact(pair.partition);
        if (in.d * in.f.resolution() <= 22) {
            ok = ok && sandwich_holds_dense(in.f.rasterize(), pair);
            ++dense;
        } else {
            ok = ok && sandwich_holds(in.f, pair) && sandwich_holds_sampled(in.f, pair, 200000, probe);
            ++sampled;
        }
        bad += !ok;
    }
    o.pass = bad == 0;
    o.detail = std::to_string(instances().size()) + " instances (" + std::to_string(dense) + " dense, " +
               std::to_string(sampled) + " corner+sampled), failures " + std::to_string(bad);
    return o;
}

Outcome level_bounds() {
    Outcome o;
    int bad = 0;
    double worst_n = 0, worst_m = 0;
    std::string first;
    for (const auto& in : instances()) {
        const auto cfg = make_config(in.d, in.p, in.n);
        try {
            const auto rep = verify_level_bounds(adaptive_partition(in.f, cfg), cfg);
            worst_n = std::max(worst_n, rep.max_n_ratio);
            worst_m = std::max(worst_m, rep.max_measure_ratio);
        } catch (const InvariantViolation& e) {
            if (bad++ == 0) first = e.what();
        }
    }
    o.pass = bad == 0;
    std::ostringstream s;
    s << "violations " << bad << ", max n ratio " << worst_n << ", max measure ratio " << worst_m;
    if (bad) s << " (" << first << ")";
    o.detail = s.str();
    return o;
}

double gap_slope(int d, double p, int n_lo, int n_hi, int count, std::uint64_t seed) {
    Rng rng = make_rng(seed, "acceptance-gap");
    const int top = make_config(d, p, n_hi).required_resolution();
    std::vector<BoxMixture> fns;
    for (int s = 0; s < count; ++s) fns.push_back(random_box_mixture(d, top, 3, rng));
    std::vector<std::pair<double, double>> pts;
    for (int n = n_lo; n <= n_hi; ++n) {
        const auto cfg = make_config(d, p, n);
        double gap = 0;
        for (const auto& f : fns) gap += build_bracket(f, cfg).gap_p;
        pts.emplace_back(cfg.eps(), gap / count);
    }
    return loglog_slope_fit(pts).slope;
}

Outcome gap_rates() {
    Outcome o;
    const double sub = gap_slope(2, 1.0, 2, 7, 60, 1);
    const double beta = beta_exponent(3, 2.0);
    const double target = (beta + 1) / (2.0 * beta) - 0.15;
    const double sup = gap_slope(3, 2.0, 2, 6, 60, 2);
    o.pass = sub >= 0.85 && sup >= target;
    std::ostringstream s;
    s << "d=2 p=1 slope " << sub << " (>= 0.85), d=3 p=2 slope " << sup << " (>= " << target << ")";
    o.detail = s.str();
    return o;
}

Outcome separation_certificates() {
    Outcome o;
    std::ostringstream s;
    // diagonal, d = 2, n = 1
    std::vector<MonotoneGridFunction> diag;
    for (std::uint64_t b = 0; b < 16; ++b) diag.push_back(diagonal_member(2, 1, pattern_from_bits(4, b)));
    const double eps = 0.5;
    int mismatched = 0;
    for (std::size_t i = 0; i < diag.size(); ++i)
        for (std::size_t j = i + 1; j < diag.size(); ++j) {
            const double frac = static_cast<double>(hamming_distance(diag[i], diag[j])) / 4.0;
            const double want = frac * eps / 6.0;
            if (std::abs(lp_distance(diag[i], diag[j], 1.0) - want) > 1e-15) ++mismatched;
        }
    const auto sub = hamming_separated_subset(diag, FamilyKind::diagonal, 1);
    const double floor = eps / (48.0 * 2);
    const double measured = measured_min_distance(sub.members, 1.0);
    const bool diag_ok = diag.size() == 16 && mismatched == 0 && sub.members.size() >= 2 && measured >= floor &&
                         sub.certified_floor >= floor;
    s << "diagonal: 16 members, " << mismatched << " distance mismatches, subset " << sub.members.size()
      << " min L1 " << measured << " >= " << floor;

    // antidiagonal, d = 2, n = 2
    const auto q = qualified_cubes(2, 2);
    std::vector<MonotoneGridFunction> anti;
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << q.size()); ++b)
        anti.push_back(antidiagonal_member(2, 2, pattern_from_bits(q.size(), b)));
    int short_pairs = 0;
    for (std::size_t i = 0; i < anti.size(); ++i)
        for (std::size_t j = i + 1; j < anti.size(); ++j) {
            const double jc = static_cast<double>(hamming_distance(anti[i], anti[j]));
            if (!(lp_distance(anti[i], anti[j], 2.0) >= std::sqrt(jc / 16.0))) ++short_pairs;
        }
    bool valid = true;
    for (const auto& f : anti) valid = valid && is_valid(f);
    const bool anti_ok = q.size() == 3 && anti.size() == 8 && short_pairs == 0 && valid;
    s << "; antidiagonal: " << q.size() << " qualified cubes, " << anti.size() << " members, " << short_pairs
      << " pairs below (j/16)^(1/2)";
    o.pass = diag_ok && anti_ok;
    o.detail = s.str();
    return o;
}

Outcome slice_identity() {
    Outcome o;
    Rng rng = make_rng(5, "acceptance-slices");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0;
    int pairs = 0;
    for (int d : {2, 3})
        for (double p : {1.0, 2.0, 3.0})
            for (int t = 0; t < 167; ++t) {
                const int m = d == 2 ? 5 : 3;
                auto fa = random_box_mixture(d, m, 1 + t % 4, rng).rasterize();
                auto fb = random_box_mixture(d, m, 1 + (t + 1) % 4, rng).rasterize();
                if (t % 2) {
                    fa = orient_all(fa, Orientation::nondecreasing);
                    fb = orient_all(fb, Orientation::nondecreasing);
                }
                const ThresholdSet a{fa, u(rng)}, b{fb, u(rng)};
                const auto sides = indicator_lp_identity_check(a, b, p);
                // symmetric difference measure, counted directly
                std::size_t diff = 0;
                for (std::size_t c = 0; c < fa.values.size(); ++c)
                    diff += (fa.values[c] <= a.lambda) != (fb.values[c] <= b.lambda);
                const double direct = diff * fa.shape().cell_volume();
                worst = std::max({worst, std::abs(std::pow(sides.lhs, p) - std::pow(sides.rhs, p)),
                                  std::abs(std::pow(sides.lhs, p) - direct)});
                ++pairs;
            }
    o.pass = pairs >= 1000 && worst <= 1e-9;
    std::ostringstream s;
    s << pairs << " pairs, max |lhs^p - rhs^p| " << worst;
    o.detail = s.str();
    return o;
}

Outcome oracle_sandwich() {
    Outcome o;
    std::ostringstream s;
    bool ok = true;
    const auto c22 = enumerate_monotone_class(2, 2, 1);
    ok = ok && c22.members.size() == 6;
    s << "2x2 q=1 count " << c22.members.size();
    int runs = 0, bad = 0;
    for (auto [a, b] : {std::pair{2, 2}, std::pair{3, 3}})
        for (int q : {1, 2}) {
            const auto cls = enumerate_monotone_class(a, b, q);
            for (double p : {1.0, 2.0})
                for (double eps : {0.05, 0.1, 0.15, 0.25, 0.4}) {
                    const auto r = exhaustive_class_oracle(cls, eps, p);
                    ++runs;
                    if (!(r.exact() && r.sandwich_holds() && 2 * r.greedy >= r.packing.value)) ++bad;
                }
        }
    ok = ok && bad == 0;
    s << ", " << runs << " oracle runs, " << bad << " failing sandwich or greedy >= exact/2";
    o.pass = ok;
    o.detail = s.str();
    return o;
}

Outcome rate_calculus() {
    Outcome o;
    int table_bad = 0;
    for (int d = 1; d <= 4; ++d) {
        std::vector<double> ps{1.0, 2.0, 3.0};
        if (d > 1) ps.push_back(static_cast<double>(d) / (d - 1));
        for (double p : ps) {
            const auto r = entropy_exponent(d, p);
            const double s = (d - 1) * p - d;
            const double alpha = s > 0 ? (d - 1) * p : d;
            const Regime reg = std::abs(s) < 1e-9 ? Regime::critical : s < 0 ? Regime::subcritical : Regime::supercritical;
            if (std::abs(r.alpha - alpha) > 1e-12 || r.regime != reg) ++table_bad;
        }
    }
    int ratio_bad = 0;
    for (std::uint64_t k = 2; k <= 12; ++k) {
        std::uint64_t n = 1;
        for (int i = 0; i < 8; ++i) n *= k;
        if (phi_and_rate_check(3, n).ratio != 2.0) ++ratio_bad;
    }
    double worst = 0;
    BracketingIntegralOptions opt;
    opt.include_one = false;
    for (int d = 2; d <= 5; ++d)
        for (double delta : {0.5, 0.2, 0.1, 0.01, 1e-3, 1e-4}) {
            const double q = bracketing_integral(d, delta, 1.0, opt);
            worst = std::max(worst, std::abs(q / bracketing_integral_closed_form(d, delta, 1.0) - 1.0));
        }
    o.pass = table_bad == 0 && ratio_bad == 0 && worst <= 1e-6;
    std::ostringstream s;
    s << "alpha table mismatches " << table_bad << ", ratio != 2 at k^8: " << ratio_bad
      << ", integral max rel error " << worst;
    o.detail = s.str();
    return o;
}

Outcome mle_experiment() {
    Outcome o;
    const auto mix = truth_preset("staircase", 2);
    const auto truth = to_density(mix, mix.m);
    RiskReport rep;
    try {
        rep = risk_experiment(truth, EstimatorKind::mle, {100, 400, 1600, 6400}, 20, 20240);
    } catch (const NumericError& e) {
        o.pass = false;
        o.detail = std::string("EM ascent failed: ") + e.what();
        return o;
    }
    const bool slope_ok = rep.slope && rep.slope->slope >= -0.5 && rep.slope->slope <= -0.05;
    o.pass = rep.ascent_ok && rep.inversions() <= 1 && slope_ok;
    std::ostringstream s;
    s << "mean h";
    for (const auto& r : rep.summary) s << " " << r.mean_h;
    s << ", inversions " << rep.inversions() << ", slope " << (rep.slope ? rep.slope->slope : NAN) << ", ascent "
      << (rep.ascent_ok ? "ok" : "FAILED");
    o.detail = s.str();
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome cli_determinism() {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "monoent_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_function_file((dir / "const0.json").string(), constant_function(2, 1, 0.0));
    Rng rng(3);
    write_function_file((dir / "f.json").string(), random_box_mixture(2, 3, 3, rng).rasterize());
    const std::vector<std::string> runs = {
        "bracket --d 2 --p 1 --n 3 --input " + (dir / "const0.json").string(),
        "bracket --d 2 --p 2 --n 3 --input " + (dir / "f.json").string(),
        "bracket-scan --d 2 --p 1 --n-list 2,3,4,5 --samples 10 --seed 4",
        "packing --family diagonal --d 2 --n 1 --samples 0",
        "packing --family antidiagonal --d 2 --n 2 --samples 0 --p 2 --eps 0.3",
        "oracle --rows 2 --cols 3 --levels 1 --eps-list 0.1,0.25",
        "rates --d 3 --p 2 --n-list 256,6561,1000",
        "mle --d 2 --truth staircase --n-list 100,400,1600 --reps 3 --seed 9",
        "mle --d 2 --truth box --estimator histogram --n-list 100,400,1600 --reps 3 --seed 9",
    };
    int bad = 0;
    std::string first;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::string a, b;
        for (int rep = 0; rep < 2; ++rep) {
            const std::string ext = runs[i].rfind("bracket ", 0) == 0 ? ".json" : ".csv";
            const fs::path out = dir / ("run" + std::to_string(i) + ext);
            fs::remove(out);
            const std::string cmd = std::string(MONOENT_CLI_PATH) + " " + runs[i] + " --out " + out.string() + " >/dev/null";
            const int st = std::system(cmd.c_str());
            if (!WIFEXITED(st) || WEXITSTATUS(st) != 0) {
                ++bad;
                if (first.empty()) first = runs[i] + " exited abnormally";
            }
            (rep ? b : a) = slurp(out);
        }
        if (a.empty() || a != b) {
            ++bad;
            if (first.empty()) first = runs[i] + " differs between runs";
        }
    }
    fs::remove_all(dir);
    o.pass = bad == 0;
    o.detail = std::to_string(runs.size()) + " configurations run twice, " + std::to_string(bad) + " problems";
    if (!first.empty()) o.detail += " (" + first + ")";
    return o;
}

} // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<Outcome()> fn;
        double budget_s; // wall-time limit, 0 when none is stated
    };
    const std::vector<Criterion> criteria = {
        {"1 bracket sandwich and exact partitions", bracket_sandwich, 120},
        {"2 level bounds", level_bounds, 0},
        {"3 gap rate orders", gap_rates, 600},
        {"4 separation certificates", separation_certificates, 0},
        {"5 slice identity", slice_identity, 0},
        {"6 oracle sandwich", oracle_sandwich, 300},
        {"7 rate calculus", rate_calculus, 0},
        {"8 MLE risk experiment", mle_experiment, 900},
        {"9 CLI determinism", cli_determinism, 0},
    };
    int failed = 0;
    for (const auto& [name, fn, budget] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget > 0 && secs > budget) {
            o.pass = false;
            o.detail += ", over the time limit";
        }
        std::printf("%s  %-42s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
