// Command-line front end: run scenarios, validate configs, compare reports.
// Exit codes: 0 success, 1 validation error, 2 runtime error, 3 comparison
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "echosim/config.hpp"
#include "echosim/scenario.hpp"

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int do_validate(const std::string& config_path, bool quiet) {
    const auto res = echosim::harness::validate_config(slurp(config_path));
    if (!res.ok) {
        for (const auto& issue : res.issues)
            std::cerr << "config error: "
                      << (issue.path.empty() ? "<root>" : issue.path) << ": "
                      << issue.message << "\n";
        return 1;
    }
    if (!quiet)
        std::cout << "config ok: scenario " << res.config.scenario << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"photon-echo quantum memory simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", report_path, reference_path;
    std::string run_scenario_name;
    std::int64_t seed_override = -1;

    auto* run = app.add_subcommand("run", "run a named scenario");
    run->add_option("scenario", run_scenario_name, "scenario name")->required();
    run->add_option("--config", config_path, "JSON config file");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed_override, "override the RNG seed");

    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("--config", config_path, "JSON config file")->required();

    auto* compare = app.add_subcommand("compare",
                                       "compare a run report to a reference");
    compare->add_option("--report", report_path, "report JSON")->required();
    compare->add_option("--reference", reference_path, "reference JSON")
        ->required();

    auto* list = app.add_subcommand("list-scenarios", "list known scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& info : echosim::harness::list_scenarios())
                std::printf("%-16s %s\n", info.name.c_str(),
                            info.description.c_str());
            return 0;
        }
        if (validate->parsed()) return do_validate(config_path, false);
        if (compare->parsed()) {
            const auto res = echosim::harness::compare_to_reference(
                slurp(report_path), slurp(reference_path));
            for (const auto& d : res.deltas) {
                if (d.missing)
                    std::printf("FAIL %-32s missing from report\n",
                                d.name.c_str());
                else
                    std::printf("%s %-32s expected %.6g actual %.6g delta %.3g "
                                "tol %.3g\n",
                                d.pass ? "ok  " : "FAIL", d.name.c_str(),
                                d.expected, d.actual, d.delta, d.tolerance);
            }
            for (const auto& n : res.notes) std::printf("note: %s\n", n.c_str());
            std::printf("%s\n", res.pass ? "PASS" : "FAIL");
            return res.pass ? 0 : 3;
        }
        if (run->parsed()) {
            std::string text;
            if (!config_path.empty()) {
                text = slurp(config_path);
            } else {
                text = echosim::harness::default_config_json(run_scenario_name);
            }
            auto parsed = echosim::harness::validate_config(text);
            if (!parsed.ok) {
                for (const auto& issue : parsed.issues)
                    std::cerr << "config error: "
                              << (issue.path.empty() ? "<root>" : issue.path)
                              << ": " << issue.message << "\n";
                return 1;
            }
            if (parsed.config.scenario != run_scenario_name) {
                std::cerr << "config names scenario " << parsed.config.scenario
                          << " but the command line asked for "
                          << run_scenario_name << "\n";
                return 1;
            }
            if (seed_override >= 0)
                parsed.config.seed = static_cast<std::uint64_t>(seed_override);
            const auto report =
                echosim::harness::run_scenario(parsed.config, out_dir);
            std::printf("scenario %s done in %.2f s, %zu files, seed %llu\n",
                        report.scenario.c_str(), report.wall_seconds,
                        report.files.size(),
                        static_cast<unsigned long long>(report.seed));
            for (const auto& [k, v] : report.metrics)
                std::printf("  %-32s %.9g\n", k.c_str(), v);
            return 0;
        }
    } catch (const echosim::harness::ScenarioError& ex) {
        std::cerr << "runtime error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}
