#include "circledyn/experiments.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "circledyn/distortion.hpp"
#include "circledyn/errors.hpp"
#include "circledyn/expansion.hpp"
#include "circledyn/markov.hpp"

namespace circledyn {

namespace {

using ojson = nlohmann::ordered_json;

const std::vector<ParamSpec> kMarkovParams = {
    {"resolution", "0.01", "grid spacing for the bounded-sum classification"},
    {"threshold", "1000", "sum above which a point is unbounded"},
    {"max_depth", "5000", "depth limit of the sum search"},
    {"convergence_eps", "0.0001", "branches below this derivative are closed"},
    {"node_budget", "500000", "node budget per sum estimate"},
    {"snap_factor", "10", "snap radius in units of the boundary resolution"},
    {"max_len", "8", "first-return word length"},
    {"c5_levels", "4", "levels used for the distortion constant"},
    {"cover_level", "6", "cover level for limit-set restricted groups"},
};

std::vector<ParamSpec> with_markov(std::vector<ParamSpec> extra) {
    std::vector<ParamSpec> p = kMarkovParams;
    p.insert(p.end(), extra.begin(), extra.end());
    return p;
}

const std::vector<ExperimentInfo> kCatalog = {
    {"ball-sum", "S_n(x) = sum of g'(x) over B(n)", "csv",
     {{"x", "0", "base point"}, {"n_max", "12", "largest radius"}, {"budget", "100000000", "node budget"}}},
    {"ne-scan", "non-expandable point scan", "csv",
     {{"points", "100", "number of points"},
      {"sample", "grid", "grid (uniform) or limit (limit-set points; needs seed arcs)"},
      {"depth", "10", "ball radius"},
      {"tol", "1e-9", "derivative slack"}}},
    {"fixers", "nonidentity elements fixing x", "csv",
     {{"x", "0", "point"}, {"depth", "8", "ball radius"}, {"fix_tol", "1e-10", "fixing tolerance"},
      {"max_report", "1000", "rows reported"}}},
    {"markov", "Markov partition from bounded-sum components", "json", kMarkovParams},
    {"refine", "refined partitions and first-exit expansion", "csv",
     with_markov({{"j_max", "8", "largest refinement level"}, {"grid", "20000", "expansion grid"}})},
    {"measure-lambda", "total length of the limit-set covers", "csv", {{"level", "10", "deepest level"}}},
    {"gaps", "gap orbit classification", "json",
     {{"level", "8", "cover level"},
      {"lambda", "0.17328679513998632", "required log expansion per step"},
      {"max_steps", "200", "expansion steps per gap"},
      {"min_gap_length", "0", "ignore shorter gaps"}}},
    {"psl2z-growth", "quadratic growth of S_n and Fibonacci entries", "csv",
     {{"x", "0", "base point"}, {"n_max", "14", "largest radius"}, {"budget", "100000000", "node budget"}}},
    {"commutator", "iterated commutators of near-identity pairs", "csv",
     {{"pairs", "20", "random pairs"},
      {"eps", "0.001", "distance of the entries from the identity"},
      {"K", "12", "cascade length"},
      {"arc_start", "0.2", "measurement arc start"},
      {"arc_length", "0.3", "measurement arc length"},
      {"grid", "1000", "measurement grid"}}},
    {"distortion-suite", "randomized distortion inequalities", "csv", {{"trials", "10000", "trials per check"}}},
    {"closest-return", "closest returns within B(n)", "csv",
     {{"x", "0", "base point"}, {"n_min", "8", "smallest n"}, {"n_max", "14", "largest n"},
      {"side", "right", "right or left"}, {"fix_tol", "1e-10", "fixing tolerance"}}},
    {"grow-tree", "growing trees at limit points", "csv",
     {{"points", "10", "sampled limit points"}, {"m", "8", "tree level"},
      {"family_level", "4", "cover level of the cone family domain"},
      {"resolution", "0.001", "cone family resolution"}}},
};

class Params {
public:
    Params(const ExperimentInfo& info, const std::map<std::string, std::string>& overrides) {
        for (const auto& p : info.params) values_[p.name] = p.default_value;
        for (const auto& [k, v] : overrides) {
            if (!values_.count(k)) throw InvalidArgument("unknown parameter '" + k + "' for " + info.name);
            values_[k] = v;
        }
        for (const auto& p : info.params) order_.push_back(p.name);
    }
    double real(const std::string& k) const {
        const std::string& s = values_.at(k);
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
            throw InvalidArgument("parameter '" + k + "' is not a number: '" + s + "'");
        return v;
    }
    long long integer(const std::string& k) const {
        double v = real(k);
        if (v != std::floor(v) || std::abs(v) > 9e15) throw InvalidArgument("parameter '" + k + "' must be an integer");
        return static_cast<long long>(v);
    }
    int small(const std::string& k, long long lo, long long hi) const {
        long long v = integer(k);
        if (v < lo || v > hi)
            throw InvalidArgument("parameter '" + k + "' must lie in [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
        return static_cast<int>(v);
    }
    const std::string& text(const std::string& k) const { return values_.at(k); }
    ojson to_json() const {
        ojson j = ojson::object();
        for (const auto& k : order_) j[k] = values_.at(k);
        return j;
    }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string word_text(const ReducedWord& w) { return w.empty() ? "id" : w.to_string(); }

ojson group_json(const GroupConfig& cfg) {
    ojson g;
    g["label"] = cfg.label;
    if (cfg.builtin) {
        g["builtin"] = *cfg.builtin;
        return g;
    }
    g["kind"] = cfg.kind;
    g["free"] = cfg.free;
    g["generators"] = cfg.generators;
    return g;
}

SeedArcs require_seeds(const GroupConfig& cfg, const std::string& experiment) {
    auto s = group_seeds(cfg);
    if (!s) throw InvalidArgument(experiment + " needs ping-pong seed arcs (builtin schottky2 or a 'seeds' field)");
    return *s;
}

Side parse_side(const std::string& s) {
    if (s == "right") return Side::Right;
    if (s == "left") return Side::Left;
    throw InvalidArgument("side must be right or left");
}

MarkovSystem markov_from_params(const GroupSystem& sys, const GroupConfig& cfg, const Params& p) {
    MTildeOptions mo;
    mo.resolution = p.real("resolution");
    mo.s.threshold = p.real("threshold");
    mo.s.max_depth = p.small("max_depth", 1, 10000000);
    mo.s.convergence_eps = p.real("convergence_eps");
    mo.s.node_budget = static_cast<std::uint64_t>(p.small("node_budget", 1, 2000000000));
    double snap_factor = p.real("snap_factor");
    int max_len = p.small("max_len", 1, 16);
    auto seeds = group_seeds(cfg);
    std::optional<CantorCover> cover;
    if (seeds) cover = schottky_cover(sys, *seeds, p.small("cover_level", 1, 12));
    std::vector<FirstReturnPair> pairs;
    for (Letter l : sys.letters()) {
        auto cs = compute_M_tilde(sys, l, mo, cover ? &*cover : nullptr);
        for (const auto& c : cs.components)
            pairs.push_back(component_returns(sys, c, l, snap_factor * cs.boundary_refined_to, max_len));
    }
    phi_cycles(sys, pairs);
    MarkovOptions opt;
    opt.c5_levels = p.small("c5_levels", 1, 10);
    opt.lambda_restricted = cover.has_value();
    return build_markov(sys, pairs, opt);
}

std::string run_ball_sum(const GroupSystem& sys, const Params& p) {
    auto s = ball_sum(sys, CirclePoint(p.real("x")), p.small("n_max", 0, 64),
                      static_cast<std::uint64_t>(p.integer("budget")));
    std::string out = "n,S_n,max_deriv,witness\n";
    for (const auto& e : s.entries)
        out += std::to_string(e.n) + "," + num(e.sum) + "," + num(e.max_derivative) + "," + word_text(e.argmax) + "\n";
    return out;
}

std::string run_ne_scan(const GroupSystem& sys, const GroupConfig& cfg, const Params& p, std::uint64_t seed) {
    int count = p.small("points", 1, 1000000);
    std::vector<CirclePoint> pts;
    if (p.text("sample") == "limit") {
        pts = sample_limit_points(sys, require_seeds(cfg, "ne-scan"), count, seed);
    } else if (p.text("sample") == "grid") {
        for (int i = 0; i < count; ++i) pts.emplace_back(static_cast<double>(i) / count);
    } else {
        throw InvalidArgument("sample must be grid or limit");
    }
    auto reps = ne_scan(sys, pts, p.small("depth", 0, 64), p.real("tol"));
    std::string out = "x,depth,max_derivative,witness,verdict\n";
    for (const auto& r : reps)
        out += num(r.x.x) + "," + std::to_string(r.depth) + "," + num(r.max_derivative) + "," + word_text(r.witness) +
               "," + (r.verdict == NEVerdict::NECandidate ? "ne_candidate" : "expandable") + "\n";
    return out;
}

std::string run_fixers(const GroupSystem& sys, const Params& p) {
    auto rep = find_fixers(sys, CirclePoint(p.real("x")), p.small("depth", 1, 64), p.real("fix_tol"),
                           static_cast<std::size_t>(p.integer("max_report")));
    std::string out = "word,displacement,derivative,parabolic_like\n";
    for (const auto& f : rep.fixers)
        out += word_text(f.word) + "," + num(f.displacement) + "," + num(f.derivative) + "," +
               (f.parabolic_like ? "1" : "0") + "\n";
    return out;
}

std::string run_refine(const GroupSystem& sys, const GroupConfig& cfg, const Params& p) {
    auto ms = markov_from_params(sys, cfg, p);
    int j_max = p.small("j_max", 1, 12);
    int grid = p.small("grid", 1, 100000000);
    std::string out = "j,pieces,partition_diameter,exit_diameter,min_derivative,kappa_max,epsilon0,certified\n";
    for (int j = 1; j <= j_max; ++j) {
        auto part = refine_partition(ms, j);
        auto fe = first_exit_expansion(ms, j, grid);
        out += std::to_string(j) + "," + std::to_string(part.intervals.size()) + "," + num(part.max_diameter) + "," +
               num(fe.max_diameter) + "," + num(fe.min_derivative) + "," + num(fe.kappa_max) + "," +
               num(ms.epsilon0) + "," + (fe.certified ? "1" : "0") + "\n";
    }
    return out;
}

std::string run_measure(const GroupSystem& sys, const GroupConfig& cfg, const Params& p) {
    auto seeds = require_seeds(cfg, "measure-lambda");
    int level = p.small("level", 0, 14);
    std::string out = "level,total_length\n";
    for (int n = 0; n <= level; ++n)
        out += std::to_string(n) + "," + num(measure_upper_bound(schottky_cover(sys, seeds, n))) + "\n";
    return out;
}

std::string run_gaps(const GroupSystem& sys, const GroupConfig& cfg, const Params& p) {
    auto cover = schottky_cover(sys, require_seeds(cfg, "gaps"), p.small("level", 0, 12));
    GapClassOptions opt;
    opt.lambda = p.real("lambda");
    opt.max_steps = p.small("max_steps", 1, 100000);
    opt.min_gap_length = p.real("min_gap_length");
    return gaps_to_json(sys, classify_gap_orbits(sys, cover, {}, opt));
}

std::string run_growth(const GroupSystem& sys, const Params& p) {
    int n_max = p.small("n_max", 1, 40);
    auto budget = static_cast<std::uint64_t>(p.integer("budget"));
    auto s = ball_sum(sys, CirclePoint(p.real("x")), n_max, budget);
    std::vector<MaxEntryRecord> entries;
    if (sys.all_mobius()) entries = max_entry_series(sys, n_max, budget);
    std::string out = "n,S_n,S_n_over_n2,max_entry,fibonacci\n";
    double f_prev = 1, f = 1;
    for (const auto& e : s.entries) {
        if (e.n == 0) continue;
        if (e.n > 1) {
            double next = f + f_prev;
            f_prev = f;
            f = next;
        }
        double me = e.n - 1 < static_cast<int>(entries.size()) ? entries[e.n - 1].max_entry : NAN;
        out += std::to_string(e.n) + "," + num(e.sum) + "," + num(e.sum / (double(e.n) * e.n)) + "," + num(me) + "," +
               num(f) + "\n";
    }
    return out;
}

std::string run_commutator(const Params& p, std::uint64_t seed) {
    int pairs = p.small("pairs", 1, 100000);
    double eps = p.real("eps");
    int K = p.small("K", 1, 40);
    Arc I(p.real("arc_start"), p.real("arc_length"));
    int grid = p.small("grid", 2, 10000000);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-eps, eps);
    std::string out = "pair,k,c0,c1\n";
    for (int t = 0; t < pairs; ++t) {
        MobiusTransform g(1 + u(rng), u(rng), u(rng), 1 + u(rng));
        MobiusTransform h(1 + u(rng), u(rng), u(rng), 1 + u(rng));
        for (const auto& s : commutator_cascade(g, h, K, I, grid))
            out += std::to_string(t) + "," + std::to_string(s.k) + "," + num(s.c0) + "," + num(s.c1) + "\n";
    }
    return out;
}

std::string run_distortion(const Params& p, std::uint64_t seed) {
    auto rep = distortion_suite(p.small("trials", 1, 10000000), seed);
    std::string out = "check,trials,violations,worst_margin\n";
    for (const auto& r : rep.rows)
        out += r.check + "," + std::to_string(r.trials) + "," + std::to_string(r.violations) + "," +
               num(r.worst_margin) + "\n";
    return out;
}

std::string run_closest(const GroupSystem& sys, const Params& p) {
    CirclePoint x0(p.real("x"));
    int lo = p.small("n_min", 1, 40), hi = p.small("n_max", 1, 40);
    if (lo > hi) throw InvalidArgument("n_min must not exceed n_max");
    Side side = parse_side(p.text("side"));
    auto sums = ball_sum(sys, x0, hi / 2);
    std::string out = "n,word,x_n,gap,S_half,ratio,c0,c1\n";
    for (int n = lo; n <= hi; ++n) {
        auto cr = closest_return(sys, x0, n, side, p.real("fix_tol"));
        double s_half = sums.entries[n / 2].sum;
        // Deviation is measured at the scale n / S_{n/2} where returns are expected.
        auto dev = rescaled_return_deviation(sys, cr, n / s_half);
        out += std::to_string(n) + "," + word_text(cr.f_n) + "," + num(cr.x_n.x) + "," + num(cr.gap) + "," +
               num(s_half) + "," + num(cr.gap * s_half / n) + "," + num(dev.c0) + "," + num(dev.c1) + "\n";
    }
    return out;
}

std::string run_grow_tree(const GroupSystem& sys, const GroupConfig& cfg, const Params& p, std::uint64_t seed) {
    auto seeds = require_seeds(cfg, "grow-tree");
    auto domain = schottky_cover(sys, seeds, p.small("family_level", 0, 10)).arc_list();
    FamilyOptions fo;
    fo.resolution = p.real("resolution");
    auto fam = build_cone_family(sys, domain, fo);
    int m = p.small("m", 0, 30);
    auto pts = sample_limit_points(sys, seeds, p.small("points", 1, 100000), seed);
    std::string out = "point,x,m,members,sum,verified\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto tree = grow_tree(sys, pts[i], fam, m);
        auto v = verify_growing_tree(sys, tree);
        out += std::to_string(i) + "," + num(pts[i].x) + "," + std::to_string(m) + "," +
               std::to_string(tree.members.size()) + "," + num(v.sum) + "," + (v.ok() ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() { return kCatalog; }

const ExperimentInfo& experiment_info(const std::string& name) {
    for (const auto& e : kCatalog)
        if (e.name == name) return e;
    throw InvalidArgument("unknown experiment '" + name + "'");
}

ExperimentOutput compute_experiment(const GroupConfig& cfg, const ExperimentSpec& spec) {
    const auto& info = experiment_info(spec.name);
    Params p(info, spec.params);
    GroupSystem sys = build_group(cfg);
    ExperimentOutput out;
    const std::string& n = spec.name;
    if (n == "ball-sum") out.data = run_ball_sum(sys, p);
    else if (n == "ne-scan") out.data = run_ne_scan(sys, cfg, p, spec.seed);
    else if (n == "fixers") out.data = run_fixers(sys, p);
    else if (n == "markov") out.data = markov_to_json(markov_from_params(sys, cfg, p));
    else if (n == "refine") out.data = run_refine(sys, cfg, p);
    else if (n == "measure-lambda") out.data = run_measure(sys, cfg, p);
    else if (n == "gaps") out.data = run_gaps(sys, cfg, p);
    else if (n == "psl2z-growth") out.data = run_growth(sys, p);
    else if (n == "commutator") out.data = run_commutator(p, spec.seed);
    else if (n == "distortion-suite") out.data = run_distortion(p, spec.seed);
    else if (n == "closest-return") out.data = run_closest(sys, p);
    else if (n == "grow-tree") out.data = run_grow_tree(sys, cfg, p, spec.seed);
    ojson side;
    side["experiment"] = spec.name;
    side["format"] = info.format;
    side["group"] = group_json(cfg);
    side["seed"] = spec.seed;
    side["params"] = p.to_json();
    out.sidecar = side.dump(2) + "\n";
    return out;
}

void run_experiment(const GroupConfig& cfg, const ExperimentSpec& spec) {
    if (spec.output_path.empty()) throw InvalidArgument("output path is empty");
    auto out = compute_experiment(cfg, spec);
    auto write = [](const std::string& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + path + "'");
        f << text;
        if (!f) throw std::runtime_error("failed writing '" + path + "'");
    };
    write(spec.output_path, out.data);
    write(spec.output_path + ".params.json", out.sidecar);
}

std::string error_json(const std::string& code, const std::string& message) {
    ojson j;
    j["error"] = code;
    j["message"] = message;
    return j.dump() + "\n";
}

int DistortionSuiteReport::total_violations() const {
    int t = 0;
    for (const auto& r : rows) t += r.violations;
    return t;
}

namespace {

MobiusTransform random_sl2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2, 2);
    for (;;) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        if (a * d - b * c > 0.2) return {a, b, c, d};
    }
}

Arc random_arc(std::mt19937_64& rng, double min_len, double max_len) {
    std::uniform_real_distribution<double> u(0, 1), l(min_len, max_len);
    return Arc(u(rng), l(rng));
}

ReducedWord random_word(std::mt19937_64& rng, int rank, int max_len) {
    std::uniform_int_distribution<int> len(1, max_len), c(0, 2 * rank - 1);
    ReducedWord w;
    int n = len(rng);
    while (static_cast<int>(w.size()) < n) {
        Letter l = Letter::from_code(c(rng));
        if (!w.empty() && l == w.last().inverse()) continue;
        w.append(l);
    }
    return w;
}

}  // namespace

DistortionSuiteReport distortion_suite(int trials, std::uint64_t seed) {
    if (trials < 1) throw InvalidArgument("trials must be positive");
    DistortionSuiteReport rep;
    std::mt19937_64 rng(seed);
    DistortionSuiteReport::Row sub{"subadditivity", 0, 0, INFINITY}, inv{"inverses", 0, 0, INFINITY};
    // Skip pairs whose images nearly cover the circle, where kappa is unbounded.
    while (sub.trials < trials) {
        auto g = random_sl2(rng), h = random_sl2(rng);
        auto I = random_arc(rng, 1e-3, 0.4);
        auto gI = diffeo_image(CircleDiffeo(g), I), hI = diffeo_image(CircleDiffeo(h), I);
        if (gI.length > 0.999 || hI.length > 0.999) continue;
        ++inv.trials;
        double d = std::abs(kappa_exact(g, I).value - kappa_exact(g.inverse(), gI).value);
        inv.worst_margin = std::min(inv.worst_margin, 1e-9 - d);
        if (d > 1e-9) ++inv.violations;
        ++sub.trials;
        double margin = kappa_exact(h, I).value + kappa_exact(g, hI).value - kappa_exact(compose(g, h), I).value;
        sub.worst_margin = std::min(sub.worst_margin, margin);
        if (margin < -1e-9) ++sub.violations;
    }
    DistortionSuiteReport::Row psum{"p_sum", 0, 0, INFINITY}, lsum{"lsum", 0, 0, INFINITY},
        est{"estimates", 0, 0, 0.0}, bound{"bound", 0, 0, INFINITY};
    std::vector<GroupSystem> groups = {make_schottky2(), make_punctured_torus()};
    std::vector<GroupConstants> ks;
    for (const auto& g : groups) ks.push_back(estimate_c_g(g));
    for (int t = 0; t < trials; ++t) {
        std::size_t gi = t % groups.size();
        const auto& sys = groups[gi];
        auto w = random_word(rng, sys.rank(), 8);
        auto I = random_arc(rng, 1e-4, 0.2);
        auto ps = check_p_sum(sys, ks[gi], w, I);
        ++psum.trials;
        psum.worst_margin = std::min(psum.worst_margin, ps.rhs - ps.lhs);
        if (!ps.holds) ++psum.violations;
        auto ls = check_lsum(sys, ks[gi], w, I, I.at(0.37));
        ++lsum.trials;
        ++est.trials;
        lsum.worst_margin = std::min(lsum.worst_margin, ls.rhs - ls.lhs);
        if (!ls.holds) ++lsum.violations;
        if (!ls.estimates_hold) ++est.violations;
        auto b = check_bound(sys, ks[gi], w, I.start);
        ++bound.trials;
        bound.worst_margin = std::min(bound.worst_margin, b.bound - b.kappa_obs);
        if (!b.holds) ++bound.violations;
    }
    rep.rows = {sub, inv, psum, lsum, est, bound};
    return rep;
}

}  // namespace circledyn
