#include "circledyn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "circledyn/errors.hpp"

namespace circledyn {

std::string to_string(const Diagnostic& d) {
    return "line " + std::to_string(d.line) + ": " + (d.warning ? "warning" : "error") +
           (d.field.empty() ? "" : " in '" + d.field + "'") + ": " + d.reason;
}

bool ConfigParse::ok() const {
    return std::none_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) { return !d.warning; });
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

std::optional<double> parse_number(const std::string& tok) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::vector<double>> parse_numbers(const std::string& s) {
    std::vector<double> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) {
        auto v = parse_number(tok);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    return out;
}

const std::set<std::string> kKeys = {"builtin", "kind", "generators", "free", "seeds"};

void finish_section(GroupConfig& g, const std::set<std::string>& seen, std::vector<Diagnostic>& diag) {
    if (g.builtin && seen.count("generators"))
        diag.push_back({g.field_lines.at("generators"), "builtin", "builtin and generators are mutually exclusive", false});
    if (!g.builtin && !seen.count("generators")) diag.push_back({g.line, "generators", "no generators given", false});
}

}  // namespace

ConfigParse parse_config(const std::string& text) {
    ConfigParse out;
    auto& diag = out.diagnostics;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    GroupConfig* cur = nullptr;
    std::set<std::string> seen;
    std::set<std::string> labels;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                diag.push_back({lineno, "", "unterminated section header", false});
                continue;
            }
            if (cur) finish_section(*cur, seen, diag);
            seen.clear();
            out.groups.emplace_back();
            cur = &out.groups.back();
            cur->label = trim(line.substr(1, line.size() - 2));
            cur->line = lineno;
            if (cur->label.empty()) diag.push_back({lineno, "", "empty section label", false});
            if (!labels.insert(cur->label).second) diag.push_back({lineno, "", "duplicate section label", false});
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            diag.push_back({lineno, "", "expected 'key = value'", false});
            continue;
        }
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (!cur) {
            diag.push_back({lineno, key, "key outside of a section", false});
            continue;
        }
        if (!kKeys.count(key)) {
            diag.push_back({lineno, key, "unknown field", false});
            continue;
        }
        if (!seen.insert(key).second) {
            diag.push_back({lineno, key, "duplicate field", false});
            continue;
        }
        cur->field_lines[key] = lineno;
        if (key == "builtin") {
            auto names = builtin_names();
            if (std::find(names.begin(), names.end(), value) == names.end())
                diag.push_back({lineno, key, "unknown builtin '" + value + "'", false});
            else
                cur->builtin = value;
        } else if (key == "kind") {
            if (value != "mobius" && value != "perturbed_rotation")
                diag.push_back({lineno, key, "kind must be mobius or perturbed_rotation", false});
            else
                cur->kind = value;
        } else if (key == "free") {
            if (value != "true" && value != "false")
                diag.push_back({lineno, key, "expected true or false", false});
            else
                cur->free = value == "true";
        } else if (key == "generators") {
            for (const auto& part : split(value, ';')) {
                auto nums = parse_numbers(part);
                if (!nums || nums->empty()) {
                    diag.push_back({lineno, key, "not a list of numbers: '" + part + "'", false});
                    continue;
                }
                cur->generators.push_back(*nums);
            }
        } else if (key == "seeds") {
            for (const auto& part : split(value, ';')) {
                std::istringstream is(part);
                std::string s, l, c;
                is >> s >> l >> c;
                auto start = parse_number(s), length = parse_number(l);
                if (!start || !length || c.size() != 1 || !std::isalpha(static_cast<unsigned char>(c[0])) ||
                    !(*length > 0 && *length <= 1)) {
                    diag.push_back({lineno, key, "expected 'start length letter': '" + part + "'", false});
                    continue;
                }
                cur->seeds.push_back({Arc(*start, *length), Letter::from_char(c[0])});
            }
        }
    }
    if (cur) finish_section(*cur, seen, diag);
    if (out.groups.empty()) diag.push_back({lineno, "", "no group sections", false});

    // Generator shape checks need the final kind of each section.
    for (const auto& g : out.groups) {
        auto field_line = [&](const std::string& k) {
            auto it = g.field_lines.find(k);
            return it == g.field_lines.end() ? g.line : it->second;
        };
        for (const auto& gen : g.generators) {
            if (g.kind == "mobius") {
                if (gen.size() != 4) {
                    diag.push_back({field_line("generators"), "generators", "expected 4 numbers per Möbius generator", false});
                    continue;
                }
                double det = gen[0] * gen[3] - gen[1] * gen[2];
                double scale = std::max({std::abs(gen[0]), std::abs(gen[1]), std::abs(gen[2]), std::abs(gen[3])});
                if (scale == 0.0 || std::abs(det) <= 1e-14 * scale * scale)
                    diag.push_back({field_line("generators"), "generators", "degenerate matrix", false});
                else if (std::abs(std::abs(det) - 1.0) > 1e-12)
                    diag.push_back({field_line("generators"), "generators",
                                    "determinant " + std::to_string(det) + " normalized to |det| = 1", true});
            } else if (gen.size() != 2) {
                diag.push_back({field_line("generators"), "generators", "expected (rho, amp) per perturbed rotation", false});
            } else if (std::abs(gen[1]) >= 1.0 / (2 * 3.141592653589793)) {
                diag.push_back({field_line("generators"), "generators", "amplitude too large for a diffeomorphism", false});
            }
        }
        if (!g.seeds.empty() && !g.builtin) {
            int rank = static_cast<int>(g.generators.size());
            for (const auto& [arc, l] : g.seeds)
                if (l.gen >= rank) diag.push_back({field_line("seeds"), "seeds", std::string("letter ") + l.to_char() + " out of range", false});
        }
    }
    return out;
}

ConfigParse validate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

GroupConfig resolve_group(const std::string& group, const std::string& section) {
    auto names = builtin_names();
    if (std::find(names.begin(), names.end(), group) != names.end()) {
        GroupConfig g;
        g.label = group;
        g.builtin = group;
        return g;
    }
    auto parsed = validate_config(group);
    for (const auto& d : parsed.diagnostics)
        if (!d.warning) throw ParseError(group + ": " + to_string(d));
    if (section.empty()) return parsed.groups.front();
    for (const auto& g : parsed.groups)
        if (g.label == section) return g;
    throw ParseError(group + ": no section '" + section + "'");
}

GroupSystem build_group(const GroupConfig& cfg) {
    if (cfg.builtin) return builtin_group(*cfg.builtin);
    std::vector<CircleDiffeo> gens;
    for (const auto& g : cfg.generators) {
        if (cfg.kind == "mobius") {
            if (g.size() != 4) throw ParseError("expected 4 numbers per Möbius generator");
            gens.emplace_back(MobiusTransform(g[0], g[1], g[2], g[3]));
        } else {
            if (g.size() != 2) throw ParseError("expected (rho, amp) per perturbed rotation");
            gens.emplace_back(PerturbedRotation(g[0], g[1]));
        }
    }
    return GroupSystem(cfg.label, std::move(gens), cfg.free);
}

std::optional<SeedArcs> group_seeds(const GroupConfig& cfg) {
    if (cfg.builtin && *cfg.builtin == "schottky2") return schottky2_seed_arcs();
    if (!cfg.seeds.empty()) return cfg.seeds;
    return std::nullopt;
}

}  // namespace circledyn
