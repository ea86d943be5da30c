#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "circledyn/config.hpp"
#include "circledyn/errors.hpp"
#include "circledyn/experiments.hpp"
#include "circledyn/parallel.hpp"

using namespace circledyn;

namespace {

struct Common {
    std::string group;
    std::string section;
    std::string out;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

int fail(const std::string& code, const std::string& message, int status) {
    std::cerr << error_json(code, message);
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments on group actions on the circle"};
    app.require_subcommand(1);

    Common common;
    std::map<std::string, std::map<std::string, std::string>> overrides;
    std::map<std::string, CLI::App*> subs;
    for (const auto& info : experiment_catalog()) {
        auto* sub = app.add_subcommand(info.name, info.description + " (" + info.format + ")");
        sub->add_option("--group", common.group, "builtin group name or config file path")->required();
        sub->add_option("--section", common.section, "section label inside the config file");
        sub->add_option("--out", common.out, "output path; a .params.json sidecar is written beside it")->required();
        sub->add_option("--seed", common.seed, "random seed");
        sub->add_option("--threads", common.threads, "worker threads (0 = all cores)");
        for (const auto& p : info.params) {
            auto* opt = sub->add_option_function<std::string>(
                "--" + p.name, [&overrides, name = info.name, key = p.name](const std::string& v) {
                    overrides[name][key] = v;
                },
                p.help);
            opt->default_str(p.default_value);
        }
        subs[info.name] = sub;
    }

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-config", "check a group config file and list diagnostics");
    validate->add_option("path", validate_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), 2);
    }

    try {
        if (validate->parsed()) {
            auto parsed = validate_config(validate_path);
            for (const auto& d : parsed.diagnostics) std::cout << to_string(d) << "\n";
            if (!parsed.ok()) return fail("ParseError", validate_path + ": invalid config", 2);
            std::cout << parsed.groups.size() << " group(s) ok\n";
            return 0;
        }
        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            set_worker_count(common.threads);
            ExperimentSpec spec;
            spec.name = name;
            spec.params = overrides[name];
            spec.output_path = common.out;
            spec.seed = common.seed;
            run_experiment(resolve_group(common.group, common.section), spec);
            return 0;
        }
    } catch (const Error& e) {
        return fail(e.code(), e.what(), 2);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), 1);
    }
    return 0;
}
