#pragma once

// Command-line front end: bracket | bracket-scan | packing | oracle | rates | mle.
//
// Exit codes: 0 success, 1 validation error (flags, config keys, input files),
// 2 runtime error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bracketing.hpp"
#include "density_est.hpp"
#include "error.hpp"
#include "grid_fn.hpp"
#include "grid_io.hpp"
#include "packing.hpp"
#include "rates.hpp"
#include "version.hpp"

namespace monoent::cli {

struct ExperimentConfig {
    std::string command;
    int d = 2;
    double p = 1.0;
    int n = 3;
    std::string input;
    std::string out;
    std::string format = "csv";
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> n_list;
    std::size_t samples = 50;
    int atoms = 3;
    std::string family = "diagonal";
    double eps = 0.01;
    int rows = 2;
    int cols = 2;
    int levels = 1;
    std::vector<double> eps_list;
    std::string truth = "staircase";
    std::size_t reps = 20;
    std::string grid = "auto";
    std::string estimator = "mle";
    int max_iters = 5000;
    double em_tol = 1e-8;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Flag names accepted by each subcommand, in output order.
inline const std::map<std::string, std::vector<std::string>>& command_keys() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"bracket", {"d", "p", "n", "input", "out"}},
        {"bracket-scan", {"d", "p", "n-list", "samples", "atoms", "seed", "out", "format"}},
        {"packing", {"family", "d", "n", "p", "eps", "samples", "seed", "out", "format"}},
        {"oracle", {"rows", "cols", "levels", "eps-list", "p", "out", "format"}},
        {"rates", {"d", "p", "n-list", "out", "format"}},
        {"mle", {"d", "truth", "n-list", "reps", "grid", "estimator", "seed", "max-iters", "em-tol", "out", "format"}},
    };
    return keys;
}

inline const std::map<std::string, std::vector<std::string>>& required_keys() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"bracket", {"d", "p", "n", "input", "out"}},
        {"bracket-scan", {"d", "p", "n-list", "out"}},
        {"packing", {"family", "d", "n", "out"}},
        {"oracle", {"rows", "cols", "levels", "eps-list"}},
        {"rates", {"d", "p"}},
        {"mle", {"d", "out"}},
    };
    return keys;
}

namespace detail {

inline std::string fmt_double(double x) { return nlohmann::json(x).dump(); }

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        if constexpr (std::is_floating_point_v<T>) s += fmt_double(v[i]);
        else s += std::to_string(v[i]);
    }
    return s;
}

} // namespace detail

// Value of a config key as it appears on the command line and in config files.
inline std::string config_value(const ExperimentConfig& c, const std::string& key) {
    using detail::fmt_double;
    if (key == "d") return std::to_string(c.d);
    if (key == "p") return fmt_double(c.p);
    if (key == "n") return std::to_string(c.n);
    if (key == "input") return c.input;
    if (key == "out") return c.out;
    if (key == "format") return c.format;
    if (key == "seed") return std::to_string(c.seed);
    if (key == "n-list") return detail::join(c.n_list);
    if (key == "samples") return std::to_string(c.samples);
    if (key == "atoms") return std::to_string(c.atoms);
    if (key == "family") return c.family;
    if (key == "eps") return fmt_double(c.eps);
    if (key == "rows") return std::to_string(c.rows);
    if (key == "cols") return std::to_string(c.cols);
    if (key == "levels") return std::to_string(c.levels);
    if (key == "eps-list") return detail::join(c.eps_list);
    if (key == "truth") return c.truth;
    if (key == "reps") return std::to_string(c.reps);
    if (key == "grid") return c.grid;
    if (key == "estimator") return c.estimator;
    if (key == "max-iters") return std::to_string(c.max_iters);
    if (key == "em-tol") return fmt_double(c.em_tol);
    throw ValidationError("unknown config key '" + key + "'");
}

// Resolved configuration as flat "key = value" lines, loadable with --config.
inline std::string resolved_config_text(const ExperimentConfig& c) {
    std::string s = "command = " + c.command + "\n";
    for (const auto& k : command_keys().at(c.command)) s += k + " = " + config_value(c, k) + "\n";
    return s;
}

// Parses flat "key = value" text; '#' starts a comment. Values may be quoted.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string{};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + " has no '='");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        kv[key] = value;
    }
    return kv;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Output

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;
};

namespace detail {

inline std::string csv_cell(const nlohmann::json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    if (v.is_number_float() && !std::isfinite(v.get<double>())) return "nan";
    return v.dump();
}

} // namespace detail

// CSV or JSON file with the resolved config and tool version embedded. Nothing
// time-dependent is written, so identical configs give identical files.
inline void write_table(const ExperimentConfig& c, const Table& t) {
    if (c.out.empty()) return;
    std::ofstream out(c.out, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + c.out + "' for writing");
    if (c.format == "json") {
        nlohmann::json j;
        j["version"] = kVersion;
        j["command"] = c.command;
        nlohmann::json cfg = nlohmann::json::object();
        for (const auto& k : command_keys().at(c.command)) cfg[k] = config_value(c, k);
        j["config"] = cfg;
        auto& rows = j["rows"] = nlohmann::json::array();
        for (const auto& r : t.rows) {
            nlohmann::json o = nlohmann::json::object();
            for (std::size_t i = 0; i < t.columns.size(); ++i) o[t.columns[i]] = r[i];
            rows.push_back(o);
        }
        out << j.dump(2) << '\n';
        return;
    }
    out << "# monoent " << kVersion << '\n';
    std::istringstream cfg(resolved_config_text(c));
    for (std::string line; std::getline(cfg, line);) out << "# " << line << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << detail::csv_cell(r[i]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Subcommands

namespace detail {

inline nlohmann::json number_or_na(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json("NA"); }

inline nlohmann::json bracket_json(const BracketPair& pair, int m) {
    nlohmann::json j;
    j["config"] = {{"d", pair.cfg.d}, {"p", pair.cfg.p}, {"n", pair.cfg.n}, {"eps", pair.cfg.eps()},
                   {"K", pair.cfg.K}, {"l", pair.cfg.l}};
    j["config"]["beta"] = pair.cfg.beta ? nlohmann::json(*pair.cfg.beta) : nlohmann::json(nullptr);
    j["lower"] = to_json(pair.lower(m));
    j["upper"] = to_json(pair.upper(m));
    j["gap_p"] = pair.gap_p;
    auto& lv = j["levels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < pair.partition.stats.size(); ++i) {
        const auto& s = pair.partition.stats[i];
        lv.push_back({{"level", i}, {"selected", s.selected}, {"not_selected", s.not_selected}, {"measure", s.measure}});
    }
    return j;
}

inline int cmd_bracket(const ExperimentConfig& c, std::ostream& out) {
    MonotoneGridFunction f = read_function_file(c.input);
    if (!is_valid(f)) throw ValidationError("input '" + c.input + "' is not a bounded monotone grid function");
    if (f.d != c.d)
        throw ValidationError("--d " + std::to_string(c.d) + " does not match the input's d = " + std::to_string(f.d));
    BracketConfig cfg;
    try {
        cfg = make_config(c.d, c.p, c.n);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    // coarse inputs are read at n + l; the envelopes are written at that grid
    const int m = std::max(f.m, cfg.required_resolution());
    if (c.d * m > 24) throw ValidationError("bracket file would need 2^" + std::to_string(c.d * m) + " cells");
    const BracketPair pair = build_bracket(refined_view(f, m), cfg);
    nlohmann::json j = bracket_json(pair, m);
    j["version"] = kVersion;
    j["command_config"] = nlohmann::json::object();
    for (const auto& k : command_keys().at(c.command)) j["command_config"][k] = config_value(c, k);
    write_json_file(c.out, j);
    const GapReport g = gap_bound_check(pair);
    out << "bracket: d=" << c.d << " p=" << c.p << " n=" << c.n << " K=" << cfg.K << " l=" << cfg.l << "\n"
        << "gap_p = " << pair.gap_p << " (" << to_string(g.regime) << ", ratio to rate " << g.ratio << ")\n";
    return 0;
}

inline int cmd_bracket_scan(const ExperimentConfig& c, std::ostream& out) {
    if (c.n_list.empty()) throw ValidationError("--n-list must not be empty");
    if (c.samples < 1) throw ValidationError("--samples must be >= 1");
    std::vector<BracketConfig> cfgs;
    int finest = 0, max_l = 0;
    try {
        for (auto n : c.n_list) {
            cfgs.push_back(make_config(c.d, c.p, static_cast<int>(n)));
            finest = std::max(finest, cfgs.back().required_resolution());
            max_l = std::max(max_l, cfgs.back().l);
        }
        check_shape(c.d, finest);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    // one fixed set of functions for all scales
    Rng rng = make_rng(c.seed, "bracket-scan");
    std::vector<BoxMixture> fns;
    for (std::size_t s = 0; s < c.samples; ++s) fns.push_back(random_box_mixture(c.d, finest, c.atoms, rng));

    Table t;
    t.columns = {"d", "p", "n", "eps", "gap_p", "ratio", "levels_used"};
    for (int i = 0; i <= max_l; ++i) t.columns.push_back("s_" + std::to_string(i));
    std::vector<std::pair<double, double>> pts;
    for (const auto& cfg : cfgs) {
        double gap = 0.0;
        int used = 0;
        std::vector<double> s_mean(max_l + 1, 0.0);
        for (const auto& f : fns) {
            const BracketPair pair = build_bracket(f, cfg);
            gap += pair.gap_p;
            used = std::max(used, pair.partition.levels_used());
            for (int i = 0; i <= cfg.l; ++i) s_mean[i] += static_cast<double>(pair.partition.stats[i].selected);
        }
        const double S = static_cast<double>(fns.size());
        gap /= S;
        const double rate = entropy_exponent(c.d, c.p).gap_rate(cfg.eps());
        std::vector<nlohmann::json> row{c.d, c.p, cfg.n, cfg.eps(), gap, gap / rate, used};
        for (double v : s_mean) row.push_back(v / S);
        t.rows.push_back(std::move(row));
        if (gap > 0) pts.emplace_back(cfg.eps(), gap);
    }
    write_table(c, t);
    out << "bracket-scan: d=" << c.d << " p=" << c.p << " " << to_string(classify(c.d, c.p)) << ", "
        << c.samples << " functions per scale\n";
    for (const auto& r : t.rows) out << "  n=" << r[2] << " gap_p=" << r[4] << " ratio=" << r[5] << "\n";
    if (pts.size() >= 3) out << "fitted slope of log gap vs log eps: " << loglog_slope_fit(pts).slope << "\n";
    return 0;
}

inline int cmd_packing(const ExperimentConfig& c, std::ostream& out) {
    FamilyKind kind;
    if (c.family == "diagonal") kind = FamilyKind::diagonal;
    else if (c.family == "antidiagonal") kind = FamilyKind::antidiagonal;
    else throw ValidationError("--family must be diagonal or antidiagonal");
    try {
        check_shape(c.d, c.n);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    if (c.d * c.n > 20) throw ValidationError("--d * --n too large for a packing run");
    const std::size_t bits =
        kind == FamilyKind::diagonal ? diagonal_pattern_size(c.d, c.n) : qualified_cubes(c.d, c.n).size();
    if (bits == 0) throw ValidationError("family has no free cubes at this n");
    std::vector<MonotoneGridFunction> members;
    auto build = [&](const SignPattern& s) {
        return kind == FamilyKind::diagonal ? diagonal_member(c.d, c.n, s) : antidiagonal_member(c.d, c.n, s);
    };
    if (c.samples == 0) {
        if (bits > 16) throw ValidationError("full enumeration needs at most 16 free cubes; pass --samples");
        for (std::uint64_t b = 0; b < (std::uint64_t{1} << bits); ++b) members.push_back(build(pattern_from_bits(bits, b)));
    } else {
        Rng rng = make_rng(c.seed, "packing");
        for (std::size_t s = 0; s < c.samples; ++s) members.push_back(build(random_pattern(bits, rng)));
    }
    const std::size_t radius = std::max<std::size_t>(1, bits / 16);
    const SeparatedFamily fam = hamming_separated_subset(members, kind, radius, c.p);
    const double min_dist = fam.members.size() >= 2 ? measured_min_distance(fam.members, c.p)
                                                    : std::numeric_limits<double>::quiet_NaN();
    const std::size_t packed = greedy_packing(members, c.eps, c.p);
    Table t;
    t.columns = {"family", "d", "n", "p", "eps", "family_size", "packing_size", "min_pair_dist", "certified_floor"};
    t.rows.push_back({c.family, c.d, c.n, c.p, c.eps, members.size(), packed, number_or_na(min_dist),
                      fam.certified_floor});
    write_table(c, t);
    out << "packing: " << c.family << " d=" << c.d << " n=" << c.n << " p=" << c.p << "\n"
        << "family " << members.size() << ", separated subset " << fam.members.size() << " (Hamming > " << radius
        << "), min distance " << min_dist << " >= floor " << fam.certified_floor << "\n"
        << "greedy packing at eps=" << c.eps << ": " << packed << "\n";
    return 0;
}

inline int cmd_oracle(const ExperimentConfig& c, std::ostream& out) {
    if (c.eps_list.empty()) throw ValidationError("--eps-list must not be empty");
    OracleClass cls;
    try {
        cls = enumerate_monotone_class(c.rows, c.cols, c.levels);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    Table t;
    t.columns = {"rows", "cols", "levels", "p", "eps", "count", "packing", "packing_2eps", "cover", "greedy", "exact",
                 "sandwich"};
    out << "oracle: " << c.rows << "x" << c.cols << " grid, " << c.levels << " levels, class size "
        << cls.members.size() << "\n";
    for (double eps : c.eps_list) {
        if (!(eps > 0)) throw ValidationError("--eps-list entries must be positive");
        const OracleRun r = exhaustive_class_oracle(cls, eps, c.p);
        t.rows.push_back({c.rows, c.cols, c.levels, c.p, eps, r.count, r.packing.value, r.packing_2x.value,
                          r.cover.value, r.greedy, r.exact(), r.sandwich_holds()});
        out << "  eps=" << eps << " M(2eps)=" << r.packing_2x.value << " N(eps)=" << r.cover.value
            << " M(eps)=" << r.packing.value << " greedy=" << r.greedy << (r.exact() ? "" : " (bounds only)") << "\n";
    }
    write_table(c, t);
    return 0;
}

inline int cmd_rates(const ExperimentConfig& c, std::ostream& out) {
    RegimeRates rr;
    try {
        rr = entropy_exponent(c.d, c.p);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    out << "alpha = " << rr.alpha << ", " << to_string(rr.regime) << "\n";
    Table t;
    t.columns = {"d", "p", "alpha", "regime", "n", "r_n", "lhs", "rhs", "ratio"};
    if (c.n_list.empty() || c.d < 2) {
        t.rows.push_back({c.d, c.p, rr.alpha, to_string(rr.regime), "NA", "NA", "NA", "NA", "NA"});
    }
    if (c.d >= 2) {
        for (auto n : c.n_list) {
            RateCheck rc;
            try {
                rc = phi_and_rate_check(c.d, n);
            } catch (const DomainError& e) {
                throw ValidationError(e.what());
            }
            t.rows.push_back({c.d, c.p, rr.alpha, to_string(rr.regime), n, rc.r_n, rc.lhs, rc.rhs, rc.ratio});
            out << "  n=" << n << " r_n=" << rc.r_n << " ratio=" << rc.ratio << "\n";
        }
    }
    write_table(c, t);
    return 0;
}

inline int cmd_mle(const ExperimentConfig& c, std::ostream& out) {
    BlockDecreasingDensity truth;
    try {
        check_dimension(c.d);
        if (std::filesystem::exists(c.truth)) {
            truth = density_from_function(read_function_file(c.truth));
            if (truth.d != c.d) throw ValidationError("truth file dimension does not match --d");
        } else {
            const MixtureOfBoxes mix = truth_preset(c.truth, c.d);
            truth = to_density(mix, mix.m);
        }
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    EstimatorKind kind;
    if (c.estimator == "mle") kind = EstimatorKind::mle;
    else if (c.estimator == "histogram") kind = EstimatorKind::histogram;
    else throw ValidationError("--estimator must be mle or histogram");
    RiskOptions opt;
    if (c.grid != "auto") {
        try {
            opt.grid = std::stoi(c.grid);
        } catch (const std::exception&) {
            throw ValidationError("--grid must be 'auto' or an integer");
        }
    }
    opt.em.max_iters = c.max_iters;
    opt.em.tolerance = c.em_tol;
    const std::vector<std::size_t> ns(c.n_list.begin(), c.n_list.end());
    if (ns.empty()) throw ValidationError("--n-list must not be empty");
    const RiskReport rep = risk_experiment(truth, kind, ns, c.reps, c.seed, opt);
    Table t;
    t.columns = {"d", "estimator", "n", "rep", "h", "l1", "iters", "loglik"};
    for (std::size_t i = 0; i < ns.size(); ++i) {
        for (std::size_t r = 0; r < c.reps; ++r) {
            const auto& row = rep.rows[i * c.reps + r];
            t.rows.push_back({c.d, c.estimator, row.n, row.rep, row.h, row.l1, row.iterations, number_or_na(row.loglik)});
        }
        const auto& s = rep.summary[i];
        t.rows.push_back({c.d, c.estimator, s.n, "mean", s.mean_h, s.mean_l1, s.mean_iterations, number_or_na(s.mean_loglik)});
    }
    write_table(c, t);
    out << "mle: d=" << c.d << " truth=" << c.truth << " estimator=" << c.estimator << " reps=" << c.reps << "\n";
    for (const auto& s : rep.summary) out << "  n=" << s.n << " mean h=" << s.mean_h << " mean L1=" << s.mean_l1 << "\n";
    if (rep.slope) out << "fitted slope of log mean h vs log n: " << rep.slope->slope << "\n";
    else out << "slope fit rejected (degenerate risk curve)\n";
    return 0;
}

} // namespace detail

inline int dispatch(const ExperimentConfig& c, std::ostream& out) {
    if (c.format != "csv" && c.format != "json") throw ValidationError("--format must be csv or json");
    if (c.command == "bracket") return detail::cmd_bracket(c, out);
    if (c.command == "bracket-scan") return detail::cmd_bracket_scan(c, out);
    if (c.command == "packing") return detail::cmd_packing(c, out);
    if (c.command == "oracle") return detail::cmd_oracle(c, out);
    if (c.command == "rates") return detail::cmd_rates(c, out);
    if (c.command == "mle") return detail::cmd_mle(c, out);
    throw ValidationError("no subcommand given");
}

// Parses argv (including any --config file) into a resolved config. Throws
// CLI::ParseError or ValidationError.
struct ParsedArgs {
    ExperimentConfig config;
    std::string save_config;
    bool help = false;
    std::string help_text;
};

inline ParsedArgs parse_args(int argc, const char* const* argv) {
    ParsedArgs res;
    ExperimentConfig& c = res.config;
    CLI::App app{"monoent: entropy, brackets and rates for bounded monotone functions"};
    app.require_subcommand(1);
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, std::map<std::string, CLI::Option*>> opts;
    std::string config_path;

    auto add = [&](const std::string& cmd, const std::string& desc) {
        CLI::App* s = app.add_subcommand(cmd, desc);
        subs[cmd] = s;
        auto& o = opts[cmd];
        for (const auto& k : command_keys().at(cmd)) {
            const std::string flag = "--" + k;
            if (k == "d") o[k] = s->add_option(flag, c.d, "dimension");
            else if (k == "p") o[k] = s->add_option(flag, c.p, "L^p exponent");
            else if (k == "n") o[k] = s->add_option(flag, c.n, "scale eps = 2^-n");
            else if (k == "input") o[k] = s->add_option(flag, c.input, "function file (JSON)");
            else if (k == "out") o[k] = s->add_option(flag, c.out, "output file");
            else if (k == "format") o[k] = s->add_option(flag, c.format, "csv or json");
            else if (k == "seed") o[k] = s->add_option(flag, c.seed, "random seed");
            else if (k == "n-list") o[k] = s->add_option(flag, c.n_list, "comma-separated list")->delimiter(',');
            else if (k == "samples") o[k] = s->add_option(flag, c.samples, "number of sampled functions");
            else if (k == "atoms") o[k] = s->add_option(flag, c.atoms, "boxes per random mixture");
            else if (k == "family") o[k] = s->add_option(flag, c.family, "diagonal or antidiagonal");
            else if (k == "eps") o[k] = s->add_option(flag, c.eps, "packing separation");
            else if (k == "rows") o[k] = s->add_option(flag, c.rows, "oracle grid rows");
            else if (k == "cols") o[k] = s->add_option(flag, c.cols, "oracle grid columns");
            else if (k == "levels") o[k] = s->add_option(flag, c.levels, "value levels q");
            else if (k == "eps-list") o[k] = s->add_option(flag, c.eps_list, "comma-separated radii")->delimiter(',');
            else if (k == "truth") o[k] = s->add_option(flag, c.truth, "uniform | box | staircase | function file");
            else if (k == "reps") o[k] = s->add_option(flag, c.reps, "replications per n");
            else if (k == "grid") o[k] = s->add_option(flag, c.grid, "auto or grid refinement m");
            else if (k == "estimator") o[k] = s->add_option(flag, c.estimator, "mle or histogram");
            else if (k == "max-iters") o[k] = s->add_option(flag, c.max_iters, "EM iteration cap");
            else if (k == "em-tol") o[k] = s->add_option(flag, c.em_tol, "EM log-likelihood gain tolerance");
        }
        s->add_option("--config", config_path, "flat key = value config file; flags override it");
        s->add_option("--save-config", res.save_config, "write the resolved config to this path");
    };
    add("bracket", "build an eps-bracket for a function file");
    add("bracket-scan", "bracket gap over a range of scales for random block-decreasing functions");
    add("packing", "separated families and greedy packing");
    add("oracle", "exact packing/covering numbers of a tiny monotone class");
    add("rates", "entropy exponent and MLE rate calculus");
    add("mle", "density-estimation risk experiment");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        res.help = true;
        res.help_text = app.help();
        for (auto& [name, s] : subs)
            if (s->parsed()) res.help_text = s->help();
        return res;
    }
    for (auto& [name, s] : subs)
        if (s->parsed()) c.command = name;

    std::map<std::string, bool> given;
    for (auto& [k, o] : opts[c.command]) given[k] = o->count() > 0;
    if (!config_path.empty()) {
        const auto kv = load_config_file(config_path);
        for (const auto& [k, v] : kv) {
            if (k == "command") {
                if (v != c.command) throw ValidationError("config file is for '" + v + "', not '" + c.command + "'");
                continue;
            }
            const auto it = opts[c.command].find(k);
            if (it == opts[c.command].end()) throw ValidationError("unknown config key '" + k + "' for " + c.command);
            if (given[k]) continue;
            CLI::Option* o = it->second;
            if (v.empty()) {
                given[k] = true;
                continue;
            }
            try {
                o->clear();
                o->add_result(v);
                o->run_callback();
            } catch (const CLI::Error& e) {
                throw ValidationError("bad value for config key '" + k + "': " + e.what());
            }
            given[k] = true;
        }
    }
    for (const auto& k : required_keys().at(c.command))
        if (!given[k]) throw ValidationError("missing required flag --" + k);
    if (c.command == "mle" && c.n_list.empty()) c.n_list = {100, 400, 1600, 6400};
    return res;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    try {
        ParsedArgs a = parse_args(argc, argv);
        if (a.help) {
            out << a.help_text;
            return 0;
        }
        if (!a.save_config.empty()) {
            std::ofstream f(a.save_config, std::ios::binary);
            if (!f) throw ValidationError("cannot write '" + a.save_config + "'");
            f << resolved_config_text(a.config);
        }
        const auto t0 = std::chrono::steady_clock::now();
        const int rc = dispatch(a.config, out);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out << "version " << kVersion << ", wall time " << secs << " s";
        if (!a.config.out.empty()) out << ", wrote " << a.config.out;
        out << "\n";
        return rc;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace monoent::cli
