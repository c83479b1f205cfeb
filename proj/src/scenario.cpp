#include "gridtrace/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "gridtrace/metrics.hpp"
#include "gridtrace/scada.hpp"

namespace gridtrace {

namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
    FILE* f = fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    fwrite(text.data(), 1, text.size(), f);
    if (fclose(f) != 0) throw IoError("write failed: " + path);
}

std::string resolve(const std::string& base, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base) / path).lexically_normal().string();
}

// IOA conventions shared by the builder and the bundled configs.
constexpr uint32_t kIoaPv = 1;
constexpr uint32_t kIoaBss = 2;
constexpr uint32_t kIoaLoad = 3;
constexpr uint32_t kIoaSetpoint = 10;

}  // namespace

// ---------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------

ScenarioConfig load_scenario_file(const std::string& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& ex) {
        throw ParseError("bad yaml in " + path + ": " + ex.what());
    }
    ScenarioConfig cfg;
    cfg.base_dir = fs::path(path).parent_path().string();
    if (cfg.base_dir.empty()) cfg.base_dir = ".";
    try {
        if (doc["duration_s"]) cfg.duration_s = doc["duration_s"].as<double>();
        if (doc["seed"]) cfg.seed = doc["seed"].as<uint64_t>();
        if (doc["grid_step_s"]) cfg.grid_step_s = doc["grid_step_s"].as<double>();

        if (doc["topology"] && doc["topology"]["nodes"]) {
            for (const auto& n : doc["topology"]["nodes"]) {
                NodeSpec spec;
                if (n["name"]) spec.name = n["name"].as<std::string>();
                if (n["role"]) spec.role = n["role"].as<std::string>();
                if (n["ip"]) spec.ip = n["ip"].as<std::string>();
                if (n["credentials"]) {
                    for (const auto& kv : n["credentials"])
                        spec.credentials[kv.first.as<std::string>()] = kv.second.as<std::string>();
                }
                cfg.nodes.push_back(std::move(spec));
            }
        }
        if (doc["topology"] && doc["topology"]["links"]) {
            for (const auto& l : doc["topology"]["links"]) {
                std::string a = l["a"] ? l["a"].as<std::string>() : "";
                for (auto& spec : cfg.nodes) {
                    if (spec.name != a) continue;
                    if (l["delay_us"]) spec.delay_us = l["delay_us"].as<uint64_t>();
                    if (l["bandwidth"]) spec.bandwidth = l["bandwidth"].as<uint64_t>();
                }
            }
        }

        if (doc["profiles"]) {
            const auto& p = doc["profiles"];
            if (p["load"] && p["load"]["steps"]) {
                for (const auto& s : p["load"]["steps"])
                    cfg.load.steps.emplace_back(s[0].as<double>(), s[1].as<double>());
            }
            if (p["pv"]) {
                const auto& pv = p["pv"];
                if (pv["interval_s"]) cfg.pv.interval_s = pv["interval_s"].as<double>();
                if (pv["min_kw"]) cfg.pv.min_kw = pv["min_kw"].as<double>();
                if (pv["step_kw"]) cfg.pv.step_kw = pv["step_kw"].as<double>();
                if (pv["start_kw"]) cfg.pv.start_kw = pv["start_kw"].as<double>();
            }
            if (p["capacity_kw"]) cfg.capacity_kw = p["capacity_kw"].as<double>();
        }

        if (doc["scada"]) {
            const auto& s = doc["scada"];
            if (s["report_interval_s"]) cfg.report_interval_s = s["report_interval_s"].as<double>();
            if (s["control_interval_s"]) cfg.control_interval_s = s["control_interval_s"].as<double>();
            if (s["arp_ttl_s"]) cfg.arp_ttl_s = s["arp_ttl_s"].as<double>();
        }

        if (doc["attack"]) {
            const auto& a = doc["attack"];
            AttackConfig& at = cfg.attack;
            if (a["enabled"]) at.enabled = a["enabled"].as<bool>();
            if (a["phase1_adversary"]) at.phase1_adversary = a["phase1_adversary"].as<std::string>();
            if (a["phase2"]) at.phase2 = a["phase2"].as<std::string>();
            if (a["start_delay_s"]) at.start_delay_s = a["start_delay_s"].as<double>();
            if (a["phase2_delay_s"]) at.phase2_delay_s = a["phase2_delay_s"].as<double>();
            if (a["step_interval_s"]) at.step_interval_s = a["step_interval_s"].as<double>();
            if (a["beacon_interval_s"]) at.beacon_interval_s = a["beacon_interval_s"].as<double>();
            if (a["cleanup"]) at.cleanup = a["cleanup"].as<bool>();
            if (a["abilities_dir"]) at.abilities_dir = a["abilities_dir"].as<std::string>();
            if (a["adversaries_dir"]) at.adversaries_dir = a["adversaries_dir"].as<std::string>();
            if (a["wordlist"]) {
                at.wordlist.clear();
                for (const auto& w : a["wordlist"]) at.wordlist.push_back(w.as<std::string>());
            }
            if (a["rules"]) {
                for (const auto& r : a["rules"]) {
                    FactRule rule;
                    rule.trait = r["trait"] ? r["trait"].as<std::string>() : "";
                    std::string action = r["action"] ? r["action"].as<std::string>() : "ALLOW";
                    if (action != "ALLOW" && action != "DENY")
                        throw ParseError("rule action must be ALLOW or DENY: " + action);
                    rule.deny = action == "DENY";
                    rule.match = r["match"] ? r["match"].as<std::string>() : "*";
                    cfg.attack.rules.push_back(std::move(rule));
                }
            }
        }

        if (doc["export"]) {
            const auto& e = doc["export"];
            if (e["pcap"]) cfg.exports.pcap = e["pcap"].as<std::string>();
            if (e["power_csv"]) cfg.exports.power_csv = e["power_csv"].as<std::string>();
            if (e["report"]) cfg.exports.report = e["report"].as<std::string>();
            if (e["summary"]) cfg.exports.summary = e["summary"].as<std::string>();
        }
    } catch (const YAML::Exception& ex) {
        throw ParseError("bad value in " + path + ": " + ex.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------
// Validation (exhaustive, never fail-fast)
// ---------------------------------------------------------------------

std::vector<ConfigError> validate(ScenarioConfig& cfg) {
    std::vector<ConfigError> errors;
    auto err = [&errors](std::string path, std::string msg) {
        errors.push_back({std::move(path), std::move(msg)});
    };

    if (cfg.duration_s < 0) err("duration_s", "must be >= 0");
    if (cfg.grid_step_s <= 0) err("grid_step_s", "must be > 0");
    if (cfg.report_interval_s <= 0) err("scada.report_interval_s", "must be > 0");
    if (cfg.control_interval_s <= 0) err("scada.control_interval_s", "must be > 0");
    if (cfg.arp_ttl_s <= 0) err("scada.arp_ttl_s", "must be > 0");
    if (cfg.capacity_kw <= 0) err("profiles.capacity_kw", "must be > 0");
    if (cfg.pv.interval_s <= 0) err("profiles.pv.interval_s", "must be > 0");
    if (cfg.pv.step_kw <= 0) err("profiles.pv.step_kw", "must be > 0");
    if (cfg.pv.min_kw >= 0) err("profiles.pv.min_kw", "generation bound must be negative");
    if (cfg.pv.start_kw > 0 || cfg.pv.start_kw < cfg.pv.min_kw)
        err("profiles.pv.start_kw", "must lie in [min_kw, 0]");

    double prev = -1.0;
    for (size_t i = 0; i < cfg.load.steps.size(); ++i) {
        const auto& [t, kw] = cfg.load.steps[i];
        std::string where = "profiles.load.steps[" + std::to_string(i) + "]";
        if (t <= prev && i > 0) err(where, "step times must be strictly increasing");
        if (t < 0) err(where, "step time must be >= 0");
        if (kw < 0) err(where, "load must be >= 0");
        prev = t;
    }

    if (cfg.nodes.empty()) err("topology.nodes", "at least one node required");
    static const std::set<std::string> kRoles{"mtu", "rtu_pv", "rtu_bss", "attacker"};
    std::set<std::string> names;
    std::set<std::string> ips;
    std::vector<std::string> mtus, attackers;
    size_t n_pv = 0, n_bss = 0;
    for (size_t i = 0; i < cfg.nodes.size(); ++i) {
        const NodeSpec& n = cfg.nodes[i];
        std::string where = "topology.nodes[" + std::to_string(i) + "]";
        if (n.name.empty()) err(where + ".name", "missing");
        if (!names.insert(n.name).second) err(where + ".name", "duplicate node name " + n.name);
        if (!kRoles.count(n.role)) err(where + ".role", "unknown role '" + n.role + "'");
        try {
            parse_ipv4(n.ip);
            if (!ips.insert(n.ip).second) err(where + ".ip", "duplicate ip " + n.ip);
        } catch (const ParseError&) {
            err(where + ".ip", "invalid ipv4 '" + n.ip + "'");
        }
        if (n.role == "mtu") mtus.push_back(n.name);
        if (n.role == "attacker") attackers.push_back(n.name);
        if (n.role == "rtu_pv") ++n_pv;
        if (n.role == "rtu_bss") ++n_bss;
    }
    if (mtus.size() != 1) {
        std::string list;
        for (const auto& m : mtus) list += (list.empty() ? "" : ", ") + m;
        err("topology.nodes", "exactly one mtu required; found " + std::to_string(mtus.size()) +
                                  (list.empty() ? "" : " (" + list + ")"));
    }
    if (n_pv == 0) err("topology.nodes", "at least one rtu_pv required");
    if (n_bss == 0) err("topology.nodes", "at least one rtu_bss required");

    AttackConfig& at = cfg.attack;
    if (at.enabled && attackers.empty())
        err("topology.nodes", "attack.enabled requires an attacker node");
    if (!at.enabled && !attackers.empty())
        err("attack.enabled", "attacker node present but attack disabled");

    if (at.enabled) {
        static const std::set<std::string> kPhase2{"none", "dos", "extract", "manipulate"};
        if (!kPhase2.count(at.phase2)) err("attack.phase2", "unknown phase2 '" + at.phase2 + "'");
        if (at.phase1_adversary.empty()) err("attack.phase1_adversary", "missing");
        if (at.wordlist.empty()) err("attack.wordlist", "must not be empty");
        if (at.start_delay_s < 0) err("attack.start_delay_s", "must be >= 0");
        if (at.phase2_delay_s < 0) err("attack.phase2_delay_s", "must be >= 0");
        if (at.step_interval_s <= 0) err("attack.step_interval_s", "must be > 0");
        if (at.beacon_interval_s <= 0) err("attack.beacon_interval_s", "must be > 0");

        if (at.abilities_dir.empty()) at.abilities_dir = "../data/abilities";
        if (at.adversaries_dir.empty()) at.adversaries_dir = "../data/adversaries";
        at.abilities_dir = resolve(cfg.base_dir, at.abilities_dir);
        at.adversaries_dir = resolve(cfg.base_dir, at.adversaries_dir);

        if (!fs::is_directory(at.abilities_dir)) {
            err("attack.abilities_dir", "not a directory: " + at.abilities_dir);
        } else if (!fs::is_directory(at.adversaries_dir)) {
            err("attack.adversaries_dir", "not a directory: " + at.adversaries_dir);
        } else {
            try {
                AbilityLibrary lib;
                lib.load_dir(at.abilities_dir);
                std::set<std::string> adv_ids;
                for (const auto& e : fs::directory_iterator(at.adversaries_dir)) {
                    auto ext = e.path().extension().string();
                    if (ext != ".yml" && ext != ".yaml") continue;
                    Adversary adv = load_adversary_file(e.path().string());
                    for (const auto& aid : adv.ability_ids) {
                        if (!lib.find(aid))
                            err("attack.adversaries_dir",
                                "adversary " + adv.id + " references unknown ability " + aid);
                    }
                    adv_ids.insert(adv.id);
                }
                if (!adv_ids.count(at.phase1_adversary))
                    err("attack.phase1_adversary", "unresolvable adversary '" + at.phase1_adversary + "'");
                if (at.phase2 != "none" && kPhase2.count(at.phase2) && !adv_ids.count(at.phase2))
                    err("attack.phase2", "unresolvable adversary '" + at.phase2 + "'");
            } catch (const SimError& ex) {
                err("attack", std::string("ability library: ") + ex.what());
            }
        }
    }
    return errors;
}

// ---------------------------------------------------------------------
// Canonical form + hash
// ---------------------------------------------------------------------

std::string canonical_config(const ScenarioConfig& cfg) {
    nlohmann::ordered_json j;
    j["duration_s"] = cfg.duration_s;
    j["seed"] = cfg.seed;
    j["grid_step_s"] = cfg.grid_step_s;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : cfg.nodes) {
        nlohmann::ordered_json jn;
        jn["name"] = n.name;
        jn["role"] = n.role;
        jn["ip"] = n.ip;
        jn["credentials"] = n.credentials;
        jn["delay_us"] = n.delay_us;
        jn["bandwidth"] = n.bandwidth;
        j["nodes"].push_back(std::move(jn));
    }
    j["load_steps"] = cfg.load.steps;
    j["pv"] = {{"interval_s", cfg.pv.interval_s},
               {"min_kw", cfg.pv.min_kw},
               {"step_kw", cfg.pv.step_kw},
               {"start_kw", cfg.pv.start_kw}};
    j["capacity_kw"] = cfg.capacity_kw;
    j["scada"] = {{"report_interval_s", cfg.report_interval_s},
                  {"control_interval_s", cfg.control_interval_s},
                  {"arp_ttl_s", cfg.arp_ttl_s}};
    nlohmann::ordered_json ja;
    ja["enabled"] = cfg.attack.enabled;
    ja["phase1_adversary"] = cfg.attack.phase1_adversary;
    ja["phase2"] = cfg.attack.phase2;
    ja["start_delay_s"] = cfg.attack.start_delay_s;
    ja["phase2_delay_s"] = cfg.attack.phase2_delay_s;
    ja["step_interval_s"] = cfg.attack.step_interval_s;
    ja["beacon_interval_s"] = cfg.attack.beacon_interval_s;
    ja["cleanup"] = cfg.attack.cleanup;
    ja["wordlist"] = cfg.attack.wordlist;
    ja["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : cfg.attack.rules)
        ja["rules"].push_back({{"trait", r.trait}, {"deny", r.deny}, {"match", r.match}});
    j["attack"] = std::move(ja);
    return j.dump();
}

std::string config_hash(const ScenarioConfig& cfg) {
    std::string canon = canonical_config(cfg);
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------

RunArtifacts run_scenario(ScenarioConfig cfg, const std::string& out_dir, bool quiet,
                          RunProbe* probe) {
    auto errors = validate(cfg);
    if (!errors.empty()) {
        std::ostringstream msg;
        msg << "invalid scenario config:";
        for (const auto& e : errors) msg << "\n  " << e.path << ": " << e.message;
        throw ParseError(msg.str());
    }
    fs::create_directories(out_dir);

    Scheduler sched;
    Network net(sched);
    PvProfile pv = cfg.pv;
    pv.seed = Rng(cfg.seed).stream(0x7056u).next();  // independent of all traffic
    PowerGrid grid(cfg.load, pv, cfg.capacity_kw);

    std::vector<std::unique_ptr<SimHost>> hosts;
    std::vector<std::unique_ptr<Rtu>> rtus;
    std::unique_ptr<Mtu> mtu;
    SimHost* mtu_host = nullptr;
    SimHost* attacker_host = nullptr;
    SimTime arp_ttl = seconds(cfg.arp_ttl_s);

    Ipv4 mtu_ip = 0;
    for (const auto& spec : cfg.nodes) {
        if (spec.role == "mtu") mtu_ip = parse_ipv4(spec.ip);
    }

    MtuConfig mtu_cfg;
    mtu_cfg.control_interval_s = cfg.control_interval_s;

    int port = 1;
    for (const auto& spec : cfg.nodes) {
        Ipv4 ip = parse_ipv4(spec.ip);
        Node& node = net.add_node(spec.name, ip);
        net.attach(node, port++, spec.delay_us, spec.bandwidth);
        hosts.push_back(std::make_unique<SimHost>(sched, net, node, arp_ttl, spec.name));
        SimHost& host = *hosts.back();
        host.credentials = spec.credentials;

        if (spec.role == "attacker") {
            attacker_host = &host;
            continue;
        }
        host.enable_ssh();
        // A little local color for the extraction stage to walk.
        host.write_file("/etc/" + spec.role + ".conf", "role=" + spec.role + "\n");
        host.write_file("/var/log/system.log", uint64_t{4096});

        if (spec.role == "mtu") {
            mtu_host = &host;
        } else if (spec.role == "rtu_pv") {
            RtuConfig rc;
            rc.mtu_ip = mtu_ip;
            rc.report_interval_s = cfg.report_interval_s;
            rc.measurements.push_back({kIoaPv, "pv.power", DeviceSource::PV});
            rtus.push_back(std::make_unique<Rtu>(sched, host, grid, rc));
            mtu_cfg.points.push_back({ip, kIoaPv, DeviceSource::PV});
        } else if (spec.role == "rtu_bss") {
            RtuConfig rc;
            rc.mtu_ip = mtu_ip;
            rc.report_interval_s = cfg.report_interval_s;
            rc.measurements.push_back({kIoaBss, "bss.power", DeviceSource::BSS});
            rc.measurements.push_back({kIoaLoad, "load.power", DeviceSource::LOAD});
            rc.command = IoaPoint{kIoaSetpoint, "bss.setpoint", DeviceSource::BSS};
            rtus.push_back(std::make_unique<Rtu>(sched, host, grid, rc));
            mtu_cfg.points.push_back({ip, kIoaBss, DeviceSource::BSS});
            mtu_cfg.points.push_back({ip, kIoaLoad, DeviceSource::LOAD});
            mtu_cfg.commands.push_back({ip, kIoaSetpoint, "bss.setpoint"});
        }
    }

    std::unique_ptr<C2Server> c2;
    if (cfg.attack.enabled) {
        RedteamConfig rc;
        rc.abilities_dir = cfg.attack.abilities_dir;
        rc.adversaries_dir = cfg.attack.adversaries_dir;
        rc.phase1_adversary = cfg.attack.phase1_adversary;
        rc.phase2 = cfg.attack.phase2;
        rc.start_delay_s = cfg.attack.start_delay_s;
        rc.phase2_delay_s = cfg.attack.phase2_delay_s;
        rc.step_interval_s = cfg.attack.step_interval_s;
        rc.beacon_interval_s = cfg.attack.beacon_interval_s;
        rc.wordlist = cfg.attack.wordlist;
        rc.rules = cfg.attack.rules;
        rc.cleanup = cfg.attack.cleanup;
        rc.duration_s = cfg.duration_s;
        c2 = std::make_unique<C2Server>(sched, net, *attacker_host, rc);
        c2->load_abilities();
        for (auto& h : hosts) {
            if (h.get() != attacker_host) c2->register_host(*h);
        }
    }

    SimTime duration = seconds(cfg.duration_s);
    if (duration > 0) {
        mtu = std::make_unique<Mtu>(sched, *mtu_host, mtu_cfg);
        mtu->start();
        for (auto& r : rtus) r->start();
        if (c2) c2->start();

        // Snapshots at t = 0, step, 2*step, ..., strictly below duration.
        SimTime step = seconds(cfg.grid_step_s);
        for (SimTime t = 0; t < duration; t += step) {
            sched.schedule(t, [&grid, t] { grid.step(t); });
        }
        sched.run_until(duration);
    }

    RunArtifacts art;
    art.seed = cfg.seed;
    art.config_hash = config_hash(cfg);
    art.pcap = (fs::path(out_dir) / cfg.exports.pcap).string();
    art.power_csv = (fs::path(out_dir) / cfg.exports.power_csv).string();
    art.report = (fs::path(out_dir) / cfg.exports.report).string();
    art.summary = (fs::path(out_dir) / cfg.exports.summary).string();
    art.manifest = (fs::path(out_dir) / "manifest.json").string();

    net.export_pcap(art.pcap);
    if (grid.history().empty()) {
        write_text(art.power_csv, "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw\n");
    } else {
        PowerGrid::export_csv(grid.history(), art.power_csv);
    }
    if (c2) {
        c2->finalize_operations();
        export_operation_report(c2->operations(), art.report);
    } else {
        export_operation_report({}, art.report);
    }

    double phase2_t = cfg.attack.enabled && cfg.attack.phase2 != "none"
                          ? cfg.attack.start_delay_s + cfg.attack.phase2_delay_s
                          : cfg.duration_s;
    auto pkts = parse_pcap(art.pcap);
    ScenarioSummary summary = summarize(pkts, 30.0, art.power_csv, phase2_t);
    write_text(art.summary, summary_text(summary));

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kArtifactFormatVersion;
    manifest["seed"] = cfg.seed;
    manifest["config_hash"] = art.config_hash;
    manifest["artifacts"] = {{"pcap", cfg.exports.pcap},
                             {"power_csv", cfg.exports.power_csv},
                             {"report", cfg.exports.report},
                             {"summary", cfg.exports.summary}};
    write_text(art.manifest, manifest.dump(2) + "\n");

    if (probe) {
        for (auto& h : hosts) {
            std::vector<std::string> paths;
            for (const auto& [path, file] : h->fs()) {
                if (!file.is_dir) paths.push_back(path);
            }
            probe->host_files[h->hostname()] = std::move(paths);
        }
        probe->dropped_frames = net.drop_count();
        probe->captured_frames = net.capture().size();
    }

    if (!quiet) {
        fprintf(stderr, "run complete: %zu packets captured, %zu power rows, %llu drops\n",
                net.capture().size(), grid.history().size(),
                static_cast<unsigned long long>(net.drop_count()));
    }
    return art;
}

}  // namespace gridtrace
