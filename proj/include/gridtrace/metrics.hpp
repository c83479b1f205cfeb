#ifndef GRIDTRACE_METRICS_HPP
#define GRIDTRACE_METRICS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridtrace/frame.hpp"

namespace gridtrace {

// One record of a capture file, reduced to what the evaluation needs.
struct ParsedPacket {
    double ts = 0.0;  // seconds
    std::optional<Ipv4> src_ip, dst_ip;
    std::optional<uint16_t> src_port, dst_port;
    ProtoTag tag = ProtoTag::OTHER;
    uint32_t wire_len = 0;
};

// Classic PCAP reader (inverse of the capture exporter). Throws
// BadMagic / TruncatedRecord.
std::vector<ParsedPacket> parse_pcap(const std::string& path);

struct ProtoStat {
    uint64_t count = 0;
    uint64_t bytes = 0;
    double fraction = 0.0;
};

// Per-protocol counts and fractions; empty input -> empty map.
std::map<ProtoTag, ProtoStat> protocol_distribution(const std::vector<ParsedPacket>& pkts);

// Packet counts in [k*interval, (k+1)*interval) bins. end_s > 0 extends
// the histogram with trailing empty bins up to the scenario end.
std::vector<uint64_t> packets_over_time(const std::vector<ParsedPacket>& pkts, double interval_s,
                                        double end_s = 0.0);

struct ConnectionMatrix {
    std::map<std::pair<Ipv4, Ipv4>, uint64_t> bytes;  // directed (src, dst) -> wire bytes
    uint64_t arp_frames = 0;                          // no IP layer: reported separately
    uint64_t arp_bytes = 0;
};

ConnectionMatrix connection_matrix(const std::vector<ParsedPacket>& pkts);

struct PowerReport {
    double max_abs_sum_before = 0.0;
    double max_abs_sum_after = 0.0;
    bool bss_constant_after = false;  // ignoring one grid step of slack
    double bss_max_abs_after = 0.0;
    size_t rows = 0;
};

// Stats over the exported power CSV, split at phase2_t seconds. Throws
// SchemaMismatch on a foreign header, ParseError on bad rows.
PowerReport power_report(const std::string& csv_path, double phase2_t);

struct ScenarioSummary {
    std::map<ProtoTag, ProtoStat> distribution;
    std::vector<uint64_t> histogram;
    double histogram_interval_s = 30.0;
    ConnectionMatrix matrix;
    std::optional<PowerReport> power;
};

ScenarioSummary summarize(const std::vector<ParsedPacket>& pkts, double interval_s,
                          const std::string& power_csv, double phase2_t);

// Aligned human-readable table and a CSV twin for diffing.
std::string summary_text(const ScenarioSummary& s);
std::string summary_csv(const ScenarioSummary& s);

}  // namespace gridtrace

#endif
