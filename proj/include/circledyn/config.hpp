#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "circledyn/groups.hpp"

namespace circledyn {

struct Diagnostic {
    int line = 0;
    std::string field;
    std::string reason;
    bool warning = false;
};

std::string to_string(const Diagnostic& d);

struct GroupConfig {
    std::string label;
    // "mobius" or "perturbed_rotation".
    std::string kind = "mobius";
    // Four entries per Möbius generator, (rho, amp) per perturbed rotation.
    std::vector<std::vector<double>> generators;
    std::optional<std::string> builtin;
    bool free = true;
    SeedArcs seeds;
    // Section header line, and the line of each field.
    int line = 0;
    std::map<std::string, int> field_lines;
};

struct ConfigParse {
    std::vector<GroupConfig> groups;
    std::vector<Diagnostic> diagnostics;
    bool ok() const;
};

// Sections "[label]" hold "key = value" lines; '#' starts a comment.
// Keys: builtin, kind, generators (';'-separated), free, seeds ("start length letter; ...").
ConfigParse parse_config(const std::string& text);

// Throws ParseError when the file cannot be read.
ConfigParse validate_config(const std::string& path);

// A builtin name, or a config file path with an optional section label
// (first section when empty). Throws ParseError with the first error location.
GroupConfig resolve_group(const std::string& group, const std::string& section = "");

GroupSystem build_group(const GroupConfig& cfg);

// Ping-pong seed arcs when known (builtin schottky2 or declared seeds).
std::optional<SeedArcs> group_seeds(const GroupConfig& cfg);

}  // namespace circledyn
