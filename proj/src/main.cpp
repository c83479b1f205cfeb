#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridtrace/metrics.hpp"
#include "gridtrace/scenario.hpp"

namespace fs = std::filesystem;
using namespace gridtrace;

namespace {

struct RunInputs {
    std::string pcap;
    std::string power_csv;  // may be empty
};

// Accept either a capture file directly or a run directory with a
// manifest; refuse manifests written by another format version.
RunInputs resolve_run(const std::string& path) {
    if (!fs::is_directory(path)) return {path, ""};
    fs::path manifest = fs::path(path) / "manifest.json";
    if (!fs::exists(manifest))
        throw IoError("run directory has no manifest.json: " + path);
    std::ifstream in(manifest);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, true);
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != kArtifactFormatVersion)
        throw SchemaMismatch("unsupported artifact format version in " + manifest.string());
    RunInputs r;
    r.pcap = (fs::path(path) / doc["artifacts"]["pcap"].get<std::string>()).string();
    if (doc["artifacts"].contains("power_csv"))
        r.power_csv = (fs::path(path) / doc["artifacts"]["power_csv"].get<std::string>()).string();
    return r;
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            const std::string& out_dir, bool quiet) {
    ScenarioConfig cfg = load_scenario_file(config_path);
    if (seed) cfg.seed = *seed;
    ScenarioConfig check = cfg;  // run_scenario normalizes its own copy
    auto errors = validate(check);
    if (!errors.empty()) {
        fprintf(stderr, "config errors in %s:\n", config_path.c_str());
        for (const auto& e : errors) fprintf(stderr, "  %s: %s\n", e.path.c_str(), e.message.c_str());
        return 1;
    }
    RunArtifacts art = run_scenario(std::move(cfg), out_dir, quiet);
    for (const std::string& p : {art.pcap, art.power_csv, art.report, art.summary, art.manifest}) {
        if (!fs::exists(p)) {
            fprintf(stderr, "missing artifact: %s\n", p.c_str());
            return 1;
        }
    }
    if (!quiet) printf("artifacts written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_analyze(const std::string& input, const std::string& csv, double phase2, double interval) {
    RunInputs in = resolve_run(input);
    std::string power = !csv.empty() ? csv : in.power_csv;
    auto pkts = parse_pcap(in.pcap);
    ScenarioSummary s = summarize(pkts, interval, power, phase2);
    fputs(summary_text(s).c_str(), stdout);
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b) {
    RunInputs ra = resolve_run(a), rb = resolve_run(b);
    auto da = protocol_distribution(parse_pcap(ra.pcap));
    auto db = protocol_distribution(parse_pcap(rb.pcap));
    printf("%-8s %12s %12s %8s\n", "proto", "A", "B", "B/A");
    for (ProtoTag tag : {ProtoTag::IEC104, ProtoTag::SSH, ProtoTag::HTTP, ProtoTag::ARP,
                         ProtoTag::OTHER}) {
        uint64_t ca = da.count(tag) ? da[tag].count : 0;
        uint64_t cb = db.count(tag) ? db[tag].count : 0;
        if (ca == 0 && cb == 0) {
            printf("%-8s %12llu %12llu %8s\n", to_string(tag),
                   static_cast<unsigned long long>(ca), static_cast<unsigned long long>(cb), "-");
        } else {
            printf("%-8s %12llu %12llu %8.2f\n", to_string(tag),
                   static_cast<unsigned long long>(ca), static_cast<unsigned long long>(cb),
                   ca ? static_cast<double>(cb) / ca : 0.0);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"smart-grid intrusion dataset generator and analyzer"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    bool quiet = false;
    std::optional<uint64_t> seed;
    auto* run = app.add_subcommand("run", "run a scenario config and export artifacts");
    run->add_option("config", config_path, "scenario yaml")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out-dir", out_dir, "artifact directory");
    run->add_flag("--quiet", quiet, "suppress progress output");

    std::string input, csv;
    double phase2 = 600.0, interval = 30.0;
    auto* analyze = app.add_subcommand("analyze", "summarize a capture (or run directory)");
    analyze->add_option("pcap", input, "capture file or run directory")->required();
    analyze->add_option("--csv", csv, "power csv to include");
    analyze->add_option("--phase2", phase2, "phase-2 split time, seconds");
    analyze->add_option("--interval", interval, "histogram interval, seconds");

    std::string run_a, run_b;
    auto* compare = app.add_subcommand("compare", "side-by-side protocol distribution of two runs");
    compare->add_option("runA", run_a, "capture file or run directory")->required();
    compare->add_option("runB", run_b, "capture file or run directory")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path, seed, out_dir, quiet);
        if (analyze->parsed()) return cmd_analyze(input, csv, phase2, interval);
        if (compare->parsed()) return cmd_compare(run_a, run_b);
    } catch (const std::exception& ex) {
        fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 1;
}
