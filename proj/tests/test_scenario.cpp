#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "gridtrace/metrics.hpp"
#include "gridtrace/scenario.hpp"

using namespace gridtrace;
namespace fs = std::filesystem;

namespace {

const std::string kConfigsDir = std::string(GT_SOURCE_DIR) + "/configs";

ScenarioConfig minimal_config() {
    ScenarioConfig cfg;
    cfg.nodes = {
        {"mtu", "mtu", "10.0.0.10"},
        {"rtu-pv", "rtu_pv", "10.0.0.20"},
        {"rtu-bss", "rtu_bss", "10.0.0.30"},
    };
    cfg.load.steps = {{0.0, 2.0}};
    return cfg;
}

bool has_error(const std::vector<ConfigError>& errors, const std::string& needle) {
    for (const auto& e : errors) {
        if (e.message.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("minimal config validates with all defaults intact") {
    ScenarioConfig cfg = minimal_config();
    auto errors = validate(cfg);
    CHECK(errors.empty());
    CHECK(cfg.duration_s == 1200.0);
    CHECK(cfg.seed == 42);
    CHECK(cfg.grid_step_s == 1.0);
    CHECK(cfg.report_interval_s == 5.0);
    CHECK(cfg.pv.min_kw == -5.0);
    CHECK(cfg.attack.enabled == false);
}

TEST_CASE("two mtus are rejected with both names in the message") {
    ScenarioConfig cfg = minimal_config();
    cfg.nodes.push_back({"mtu-2", "mtu", "10.0.0.11"});
    auto errors = validate(cfg);
    REQUIRE(!errors.empty());
    CHECK(has_error(errors, "mtu"));
    CHECK(has_error(errors, "mtu-2"));
}

TEST_CASE("attack without an attacker node is a cross-reference error") {
    ScenarioConfig cfg = minimal_config();
    cfg.attack.enabled = true;
    cfg.attack.phase1_adversary = "multi-stage-ssh";
    cfg.attack.phase2 = "dos";
    cfg.attack.abilities_dir = std::string(GT_SOURCE_DIR) + "/data/abilities";
    cfg.attack.adversaries_dir = std::string(GT_SOURCE_DIR) + "/data/adversaries";
    auto errors = validate(cfg);
    CHECK(has_error(errors, "attacker"));
}

TEST_CASE("attacker node with attack disabled is also an error") {
    ScenarioConfig cfg = minimal_config();
    cfg.nodes.push_back({"attacker", "attacker", "10.0.0.66"});
    auto errors = validate(cfg);
    CHECK(has_error(errors, "attack disabled"));
}

TEST_CASE("validation is exhaustive, not fail-fast") {
    ScenarioConfig cfg = minimal_config();
    cfg.duration_s = -1;
    cfg.grid_step_s = 0;
    cfg.nodes[1].ip = "not-an-ip";
    cfg.nodes[2].name = "mtu";  // duplicate name
    auto errors = validate(cfg);
    CHECK(errors.size() >= 4);
}

TEST_CASE("unknown roles, duplicate ips, and bad load steps are reported") {
    ScenarioConfig cfg = minimal_config();
    cfg.nodes[1].role = "plc";
    cfg.nodes[2].ip = cfg.nodes[0].ip;
    cfg.load.steps = {{10.0, 2.0}, {5.0, -1.0}};
    auto errors = validate(cfg);
    CHECK(has_error(errors, "unknown role"));
    CHECK(has_error(errors, "duplicate ip"));
    CHECK(has_error(errors, "strictly increasing"));
    CHECK(has_error(errors, "load must be >= 0"));
}

TEST_CASE("bundled configs all load and validate") {
    for (const char* name : {"normal.yaml", "dos.yaml", "extract.yaml", "manipulate.yaml",
                             "cigre_mv.yaml"}) {
        ScenarioConfig cfg = load_scenario_file(kConfigsDir + "/" + name);
        auto errors = validate(cfg);
        for (const auto& e : errors) {
            CAPTURE(name);
            CAPTURE(e.path);
            FAIL_CHECK(e.message);
        }
        CHECK(cfg.duration_s == 1200.0);
    }
}

TEST_CASE("config hash is stable and sensitive to the seed") {
    ScenarioConfig a = minimal_config();
    ScenarioConfig b = minimal_config();
    REQUIRE(validate(a).empty());
    REQUIRE(validate(b).empty());
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 7;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("duration zero produces empty but well-formed artifacts") {
    ScenarioConfig cfg = minimal_config();
    cfg.duration_s = 0.0;
    TempDir out("gt_zero_run");
    RunArtifacts art = run_scenario(cfg, out.path.string());

    for (const std::string& p : {art.pcap, art.power_csv, art.report, art.summary, art.manifest})
        CHECK(fs::exists(p));
    CHECK(fs::file_size(art.pcap) == 24);  // global header only
    CHECK(slurp(art.power_csv) == "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw\n");
    auto report = nlohmann::json::parse(slurp(art.report));
    CHECK(report["operations"].size() == 0);
    auto manifest = nlohmann::json::parse(slurp(art.manifest));
    CHECK(manifest["format_version"] == kArtifactFormatVersion);
    CHECK(manifest["seed"] == 42);
}

TEST_CASE("invalid config makes run_scenario throw instead of writing") {
    ScenarioConfig cfg = minimal_config();
    cfg.nodes.clear();
    TempDir out("gt_invalid_run");
    CHECK_THROWS_AS(run_scenario(cfg, out.path.string()), ParseError);
}

TEST_CASE("short runs are deterministic and internally consistent") {
    ScenarioConfig cfg = minimal_config();
    cfg.duration_s = 60.0;

    TempDir out_a("gt_det_a");
    TempDir out_b("gt_det_b");
    RunProbe probe;
    RunArtifacts a = run_scenario(cfg, out_a.path.string(), true, &probe);
    RunArtifacts b = run_scenario(cfg, out_b.path.string());

    CHECK(slurp(a.pcap) == slurp(b.pcap));
    CHECK(slurp(a.power_csv) == slurp(b.power_csv));
    CHECK(slurp(a.report) == slurp(b.report));
    CHECK(a.config_hash == b.config_hash);

    auto pkts = parse_pcap(a.pcap);
    CHECK(pkts.size() == probe.captured_frames);
    CHECK(probe.dropped_frames == 0);

    // 60 rows, one per grid step, all exactly balanced or within the
    // one-step actuation residual.
    PowerReport pr = power_report(a.power_csv, cfg.duration_s);
    CHECK(pr.rows == 60);
}

TEST_CASE("a different seed changes the pv series but not the schema") {
    ScenarioConfig cfg = minimal_config();
    cfg.duration_s = 120.0;
    TempDir out_a("gt_seed_a");
    TempDir out_b("gt_seed_b");
    RunArtifacts a = run_scenario(cfg, out_a.path.string());
    cfg.seed = 7;
    RunArtifacts b = run_scenario(cfg, out_b.path.string());
    CHECK(slurp(a.power_csv) != slurp(b.power_csv));
    CHECK(power_report(b.power_csv, 120.0).rows == 120);
}
