#include "gridtrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "gridtrace/errors.hpp"

namespace gridtrace {

namespace {

uint32_t rd_u32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

struct FileCloser {
    FILE* f;
    ~FileCloser() {
        if (f) fclose(f);
    }
};

}  // namespace

std::vector<ParsedPacket> parse_pcap(const std::string& path) {
    FILE* f = fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    FileCloser closer{f};

    uint8_t gh[24];
    if (fread(gh, 1, sizeof gh, f) != sizeof gh)
        throw TruncatedRecord("pcap shorter than global header: " + path);
    if (rd_u32le(gh) != 0xa1b2c3d4u) throw BadMagic("not a little-endian classic pcap: " + path);

    std::vector<ParsedPacket> out;
    for (;;) {
        uint8_t rh[16];
        size_t n = fread(rh, 1, sizeof rh, f);
        if (n == 0) break;
        if (n != sizeof rh) throw TruncatedRecord("truncated record header: " + path);
        uint32_t ts_sec = rd_u32le(rh);
        uint32_t ts_usec = rd_u32le(rh + 4);
        uint32_t incl_len = rd_u32le(rh + 8);
        uint32_t orig_len = rd_u32le(rh + 12);
        Bytes bytes(incl_len);
        if (incl_len && fread(bytes.data(), 1, incl_len, f) != incl_len)
            throw TruncatedRecord("truncated packet data: " + path);

        ParsedPacket p;
        p.ts = ts_sec + ts_usec / 1e6;
        p.wire_len = orig_len;
        if (auto fr = parse_frame(bytes)) {
            p.tag = fr->proto_tag();
            if (fr->has_ip) {
                p.src_ip = fr->src_ip;
                p.dst_ip = fr->dst_ip;
            }
            if (fr->has_l4) {
                p.src_port = fr->src_port;
                p.dst_port = fr->dst_port;
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::map<ProtoTag, ProtoStat> protocol_distribution(const std::vector<ParsedPacket>& pkts) {
    std::map<ProtoTag, ProtoStat> out;
    for (const auto& p : pkts) {
        auto& s = out[p.tag];
        ++s.count;
        s.bytes += p.wire_len;
    }
    for (auto& [tag, s] : out) s.fraction = static_cast<double>(s.count) / pkts.size();
    return out;
}

std::vector<uint64_t> packets_over_time(const std::vector<ParsedPacket>& pkts, double interval_s,
                                        double end_s) {
    if (interval_s <= 0.0) throw ParseError("histogram interval must be positive");
    double last = end_s;
    for (const auto& p : pkts) last = std::max(last, p.ts);
    size_t bins = static_cast<size_t>(std::ceil(last / interval_s));
    if (bins == 0 && (!pkts.empty() || end_s > 0.0)) bins = 1;
    std::vector<uint64_t> hist(bins, 0);
    for (const auto& p : pkts) {
        size_t k = static_cast<size_t>(p.ts / interval_s);
        if (k >= hist.size()) k = hist.size() - 1;  // ts == right edge
        ++hist[k];
    }
    return hist;
}

ConnectionMatrix connection_matrix(const std::vector<ParsedPacket>& pkts) {
    ConnectionMatrix m;
    for (const auto& p : pkts) {
        if (p.src_ip && p.dst_ip) {
            m.bytes[{*p.src_ip, *p.dst_ip}] += p.wire_len;
        } else {
            ++m.arp_frames;
            m.arp_bytes += p.wire_len;
        }
    }
    return m;
}

PowerReport power_report(const std::string& csv_path, double phase2_t) {
    FILE* f = fopen(csv_path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + csv_path);
    FileCloser closer{f};

    char line[512];
    if (!fgets(line, sizeof line, f)) throw SchemaMismatch("empty power csv: " + csv_path);
    std::string header(line);
    while (!header.empty() && (header.back() == '\n' || header.back() == '\r')) header.pop_back();
    if (header != "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw")
        throw SchemaMismatch("unexpected power csv header: " + header);

    PowerReport r;
    double grid_step = 1.0;
    double prev_t = -1.0;
    bool have_bss_ref = false;
    double bss_ref = 0.0;
    r.bss_constant_after = true;
    for (;;) {
        if (!fgets(line, sizeof line, f)) break;
        double t, load, pv, bss, sum;
        if (sscanf(line, "%lf,%lf,%lf,%lf,%lf", &t, &load, &pv, &bss, &sum) != 5)
            throw ParseError("bad power csv row: " + std::string(line));
        if (prev_t >= 0.0 && t > prev_t) grid_step = t - prev_t;
        prev_t = t;
        ++r.rows;
        if (t <= phase2_t) {
            r.max_abs_sum_before = std::max(r.max_abs_sum_before, std::fabs(sum));
        } else {
            r.max_abs_sum_after = std::max(r.max_abs_sum_after, std::fabs(sum));
            if (t > phase2_t + grid_step) {  // one step of actuation slack
                r.bss_max_abs_after = std::max(r.bss_max_abs_after, std::fabs(bss));
                if (!have_bss_ref) {
                    bss_ref = bss;
                    have_bss_ref = true;
                } else if (std::fabs(bss - bss_ref) > 1e-9) {
                    r.bss_constant_after = false;
                }
            }
        }
    }
    if (r.rows == 0) r.bss_constant_after = false;
    return r;
}

ScenarioSummary summarize(const std::vector<ParsedPacket>& pkts, double interval_s,
                          const std::string& power_csv, double phase2_t) {
    ScenarioSummary s;
    s.distribution = protocol_distribution(pkts);
    s.histogram_interval_s = interval_s;
    s.histogram = packets_over_time(pkts, interval_s);
    s.matrix = connection_matrix(pkts);
    if (!power_csv.empty()) s.power = power_report(power_csv, phase2_t);
    return s;
}

static const ProtoTag kTagOrder[] = {ProtoTag::IEC104, ProtoTag::SSH, ProtoTag::HTTP,
                                     ProtoTag::ARP, ProtoTag::OTHER};

std::string summary_text(const ScenarioSummary& s) {
    std::ostringstream out;
    char buf[160];
    out << "protocol distribution\n";
    snprintf(buf, sizeof buf, "  %-8s %10s %12s %9s\n", "proto", "packets", "bytes", "share");
    out << buf;
    for (ProtoTag tag : kTagOrder) {
        auto it = s.distribution.find(tag);
        ProtoStat st = it == s.distribution.end() ? ProtoStat{} : it->second;
        snprintf(buf, sizeof buf, "  %-8s %10llu %12llu %8.2f%%\n", to_string(tag),
                 static_cast<unsigned long long>(st.count),
                 static_cast<unsigned long long>(st.bytes), st.fraction * 100.0);
        out << buf;
    }
    out << "\npackets over time (interval " << s.histogram_interval_s << " s)\n";
    for (size_t i = 0; i < s.histogram.size(); ++i) {
        snprintf(buf, sizeof buf, "  [%6zu s) %8llu\n",
                 static_cast<size_t>(i * s.histogram_interval_s),
                 static_cast<unsigned long long>(s.histogram[i]));
        out << buf;
    }
    out << "\nconnection matrix (bytes)\n";
    for (const auto& [pair, bytes] : s.matrix.bytes) {
        snprintf(buf, sizeof buf, "  %-15s -> %-15s %12llu\n", format_ipv4(pair.first).c_str(),
                 format_ipv4(pair.second).c_str(), static_cast<unsigned long long>(bytes));
        out << buf;
    }
    snprintf(buf, sizeof buf, "  %-35s%12llu (%llu frames)\n", "arp (no ip)",
             static_cast<unsigned long long>(s.matrix.arp_bytes),
             static_cast<unsigned long long>(s.matrix.arp_frames));
    out << buf;
    if (s.power) {
        const PowerReport& p = *s.power;
        out << "\npower\n";
        snprintf(buf, sizeof buf,
                 "  rows %zu  max|sum| before %.6f  after %.6f  bss constant after: %s\n", p.rows,
                 p.max_abs_sum_before, p.max_abs_sum_after, p.bss_constant_after ? "yes" : "no");
        out << buf;
    }
    return out.str();
}

std::string summary_csv(const ScenarioSummary& s) {
    std::ostringstream out;
    out << "section,key,value\n";
    for (ProtoTag tag : kTagOrder) {
        auto it = s.distribution.find(tag);
        ProtoStat st = it == s.distribution.end() ? ProtoStat{} : it->second;
        out << "distribution," << to_string(tag) << "," << st.count << "\n";
    }
    for (size_t i = 0; i < s.histogram.size(); ++i)
        out << "histogram,bin" << i << "," << s.histogram[i] << "\n";
    for (const auto& [pair, bytes] : s.matrix.bytes)
        out << "matrix," << format_ipv4(pair.first) << ">" << format_ipv4(pair.second) << ","
            << bytes << "\n";
    out << "matrix,arp," << s.matrix.arp_bytes << "\n";
    if (s.power) {
        char buf[64];
        snprintf(buf, sizeof buf, "%.6f", s.power->max_abs_sum_before);
        out << "power,max_abs_sum_before," << buf << "\n";
        snprintf(buf, sizeof buf, "%.6f", s.power->max_abs_sum_after);
        out << "power,max_abs_sum_after," << buf << "\n";
        out << "power,bss_constant_after," << (s.power->bss_constant_after ? 1 : 0) << "\n";
    }
    return out.str();
}

}  // namespace gridtrace
