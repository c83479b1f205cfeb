// Python bindings for the scenario runner and the capture analysis
// helpers. The API sticks to paths and plain containers so callers never
// hold simulator state across the language boundary.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gridtrace/metrics.hpp"
#include "gridtrace/scenario.hpp"

namespace py = pybind11;
using namespace gridtrace;

namespace {

py::dict artifacts_dict(const RunArtifacts& art) {
    py::dict d;
    d["pcap"] = art.pcap;
    d["power_csv"] = art.power_csv;
    d["report"] = art.report;
    d["summary"] = art.summary;
    d["manifest"] = art.manifest;
    d["seed"] = art.seed;
    d["config_hash"] = art.config_hash;
    return d;
}

ScenarioConfig load_checked(const std::string& config_path) {
    ScenarioConfig cfg = load_scenario_file(config_path);
    auto errors = validate(cfg);
    if (!errors.empty()) {
        std::string msg = "invalid scenario config:";
        for (const auto& e : errors) msg += "\n  " + e.path + ": " + e.message;
        throw ParseError(msg);
    }
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SCADA co-simulation scenario runner and capture analysis";

    py::register_exception<ParseError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<BadMagic>(m, "BadMagic", PyExc_ValueError);
    py::register_exception<TruncatedRecord>(m, "TruncatedRecord", PyExc_ValueError);

    m.def(
        "run_scenario",
        [](const std::string& config_path, const std::string& out_dir,
           std::optional<uint64_t> seed, bool quiet) {
            ScenarioConfig cfg = load_scenario_file(config_path);
            if (seed) cfg.seed = *seed;
            return artifacts_dict(run_scenario(std::move(cfg), out_dir, quiet));
        },
        py::arg("config_path"), py::arg("out_dir"), py::arg("seed") = std::nullopt,
        py::arg("quiet") = true,
        "Run a scenario config and export all artifacts into out_dir.");

    m.def(
        "validate_config",
        [](const std::string& config_path) {
            ScenarioConfig cfg = load_scenario_file(config_path);
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& e : validate(cfg)) out.emplace_back(e.path, e.message);
            return out;
        },
        py::arg("config_path"), "Return (path, message) pairs for every config error.");

    m.def(
        "config_hash",
        [](const std::string& config_path) { return config_hash(load_checked(config_path)); },
        py::arg("config_path"), "Hash of the normalized config; stable across reruns.");

    py::class_<ParsedPacket>(m, "Packet")
        .def_readonly("ts", &ParsedPacket::ts)
        .def_readonly("wire_len", &ParsedPacket::wire_len)
        .def_property_readonly(
            "src_ip",
            [](const ParsedPacket& p) -> std::optional<std::string> {
                if (!p.src_ip) return std::nullopt;
                return format_ipv4(*p.src_ip);
            })
        .def_property_readonly(
            "dst_ip",
            [](const ParsedPacket& p) -> std::optional<std::string> {
                if (!p.dst_ip) return std::nullopt;
                return format_ipv4(*p.dst_ip);
            })
        .def_readonly("src_port", &ParsedPacket::src_port)
        .def_readonly("dst_port", &ParsedPacket::dst_port)
        .def_property_readonly("proto",
                               [](const ParsedPacket& p) { return std::string(to_string(p.tag)); })
        .def("__repr__", [](const ParsedPacket& p) {
            return "<Packet " + std::string(to_string(p.tag)) + " t=" + std::to_string(p.ts) +
                   " len=" + std::to_string(p.wire_len) + ">";
        });

    m.def("parse_pcap", &parse_pcap, py::arg("path"),
          "Parse a classic capture file into a list of packets.");

    m.def(
        "protocol_distribution",
        [](const std::vector<ParsedPacket>& pkts) {
            py::dict out;
            for (const auto& [tag, stat] : protocol_distribution(pkts)) {
                py::dict row;
                row["count"] = stat.count;
                row["bytes"] = stat.bytes;
                row["fraction"] = stat.fraction;
                out[to_string(tag)] = row;
            }
            return out;
        },
        py::arg("packets"), "Per-protocol packet/byte counts and fractions.");

    m.def(
        "packets_over_time",
        [](const std::vector<ParsedPacket>& pkts, double interval_s, double end_s) {
            return packets_over_time(pkts, interval_s, end_s);
        },
        py::arg("packets"), py::arg("interval_s") = 30.0, py::arg("end_s") = 0.0,
        "Packet counts per time bin.");

    m.def(
        "connection_matrix",
        [](const std::vector<ParsedPacket>& pkts) {
            ConnectionMatrix cm = connection_matrix(pkts);
            py::dict out;
            py::dict flows;
            for (const auto& [pair, bytes] : cm.bytes)
                flows[py::make_tuple(format_ipv4(pair.first), format_ipv4(pair.second))] = bytes;
            out["bytes"] = flows;
            out["arp_frames"] = cm.arp_frames;
            out["arp_bytes"] = cm.arp_bytes;
            return out;
        },
        py::arg("packets"), "Directed (src, dst) -> bytes map; ARP reported separately.");

    m.def(
        "power_report",
        [](const std::string& csv_path, double phase2_t) {
            PowerReport pr = power_report(csv_path, phase2_t);
            py::dict out;
            out["rows"] = pr.rows;
            out["max_abs_sum_before"] = pr.max_abs_sum_before;
            out["max_abs_sum_after"] = pr.max_abs_sum_after;
            out["bss_constant_after"] = pr.bss_constant_after;
            out["bss_max_abs_after"] = pr.bss_max_abs_after;
            return out;
        },
        py::arg("csv_path"), py::arg("phase2_t"),
        "Balance statistics over an exported power CSV, split at phase2_t seconds.");
}
