#ifndef GRIDTRACE_SCENARIO_HPP
#define GRIDTRACE_SCENARIO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridtrace/powergrid.hpp"
#include "gridtrace/redteam.hpp"

namespace gridtrace {

struct NodeSpec {
    std::string name;
    std::string role;  // mtu | rtu_pv | rtu_bss | attacker
    std::string ip;
    std::map<std::string, std::string> credentials;
    SimTime delay_us = 1000;  // link to the switch
    uint64_t bandwidth = 0;   // bytes/s, 0 = unlimited
};

struct AttackConfig {
    bool enabled = false;
    std::string phase1_adversary;
    std::string phase2 = "none";
    double start_delay_s = 0.0;
    double phase2_delay_s = 600.0;
    double step_interval_s = 5.0;
    double beacon_interval_s = 15.0;
    bool cleanup = true;
    std::string abilities_dir;
    std::string adversaries_dir;
    std::vector<std::string> wordlist{"123456", "admin", "password", "root"};
    std::vector<FactRule> rules;
};

struct ExportConfig {
    std::string pcap = "capture.pcap";
    std::string power_csv = "power.csv";
    std::string report = "operation_report.json";
    std::string summary = "summary.txt";
};

struct ScenarioConfig {
    double duration_s = 1200.0;
    uint64_t seed = 42;
    double grid_step_s = 1.0;
    std::vector<NodeSpec> nodes;
    LoadProfile load;
    PvProfile pv;  // seed field is derived from the scenario seed
    double capacity_kw = 6.0;
    double report_interval_s = 5.0;
    double control_interval_s = 5.0;
    double arp_ttl_s = 60.0;
    AttackConfig attack;
    ExportConfig exports;
    std::string base_dir;  // directory of the config file, for relative paths
};

struct ConfigError {
    std::string path;  // location in the document, e.g. "topology.nodes[1].ip"
    std::string message;
};

// Parse a scenario YAML file. Structural problems throw ParseError;
// semantic ones are left to validate().
ScenarioConfig load_scenario_file(const std::string& path);

// Fill defaults and collect every error (never fail-fast).
std::vector<ConfigError> validate(ScenarioConfig& cfg);

// FNV-1a over the canonical form of the normalized config.
std::string config_hash(const ScenarioConfig& cfg);
std::string canonical_config(const ScenarioConfig& cfg);

struct RunArtifacts {
    std::string pcap;
    std::string power_csv;
    std::string report;
    std::string summary;
    std::string manifest;
    uint64_t seed = 0;
    std::string config_hash;
};

// End-of-run state that never leaves the process; tests use it to check
// invariants the exported artifacts cannot show.
struct RunProbe {
    std::map<std::string, std::vector<std::string>> host_files;  // node -> file paths
    uint64_t dropped_frames = 0;
    size_t captured_frames = 0;
};

// Build the topology, run the scenario to its duration, export all
// artifacts into out_dir. Throws on validation errors.
RunArtifacts run_scenario(ScenarioConfig cfg, const std::string& out_dir, bool quiet = true,
                          RunProbe* probe = nullptr);

constexpr int kArtifactFormatVersion = 1;

}  // namespace gridtrace

#endif
