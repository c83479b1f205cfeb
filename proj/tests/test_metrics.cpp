#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gridtrace/metrics.hpp"
#include "gridtrace/vnet.hpp"

using namespace gridtrace;
namespace fs = std::filesystem;

namespace {

ParsedPacket packet(double ts, ProtoTag tag, uint32_t len = 100, const char* src = nullptr,
                    const char* dst = nullptr) {
    ParsedPacket p;
    p.ts = ts;
    p.tag = tag;
    p.wire_len = len;
    if (src) p.src_ip = parse_ipv4(src);
    if (dst) p.dst_ip = parse_ipv4(dst);
    return p;
}

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("pcap export/parse round-trips timestamps and lengths") {
    Scheduler sched;
    Network net(sched);
    Node& a = net.add_node("a", parse_ipv4("10.0.0.1"));
    Node& b = net.add_node("b", parse_ipv4("10.0.0.2"));
    net.attach(a, 1);
    net.attach(b, 2);

    sched.schedule(seconds(0.25), [&] {
        net.send_frame(a, make_arp_request(a.iface.mac, a.iface.ip, b.iface.ip));
    });
    sched.schedule(seconds(1.5), [&] {
        net.send_frame(a, make_tcp(a.iface.mac, b.iface.mac, a.iface.ip, b.iface.ip, 49152, 2404,
                                   1, 0, TcpFlags{.syn = true}, {}));
    });
    sched.run_until(seconds(2.0));

    std::string path = temp_path("gt_roundtrip.pcap");
    net.export_pcap(path);
    auto pkts = parse_pcap(path);
    REQUIRE(pkts.size() == net.capture().size());
    for (size_t i = 0; i < pkts.size(); ++i) {
        CHECK(pkts[i].ts ==
              doctest::Approx(net.capture()[i].ts / 1e6).epsilon(1e-9));
        CHECK(pkts[i].wire_len == net.capture()[i].frame.wire_len());
        CHECK(pkts[i].tag == net.capture()[i].frame.proto_tag());
    }
    CHECK(pkts[0].tag == ProtoTag::ARP);
    CHECK(pkts[1].tag == ProtoTag::IEC104);
    REQUIRE(pkts[1].src_ip.has_value());
    CHECK(*pkts[1].src_ip == parse_ipv4("10.0.0.1"));
    fs::remove(path);
}

TEST_CASE("wrong magic raises BadMagic") {
    std::string path = temp_path("gt_badmagic.pcap");
    std::ofstream(path, std::ios::binary) << "\x0a\x0b\x0c\x0dnot a pcap file at all......";
    CHECK_THROWS_AS(parse_pcap(path), BadMagic);
    fs::remove(path);
}

TEST_CASE("truncated record raises TruncatedRecord") {
    Scheduler sched;
    Network net(sched);
    Node& a = net.add_node("a", parse_ipv4("10.0.0.1"));
    net.attach(a, 1);
    net.send_frame(a, make_arp_request(a.iface.mac, a.iface.ip, parse_ipv4("10.0.0.2")));
    sched.run_until(seconds(1.0));

    std::string path = temp_path("gt_trunc.pcap");
    net.export_pcap(path);
    fs::resize_file(path, fs::file_size(path) - 10);
    CHECK_THROWS_AS(parse_pcap(path), TruncatedRecord);
    fs::remove(path);
}

TEST_CASE("protocol distribution computes counts and fractions") {
    std::vector<ParsedPacket> pkts{packet(0, ProtoTag::IEC104), packet(1, ProtoTag::IEC104),
                                   packet(2, ProtoTag::IEC104), packet(3, ProtoTag::ARP)};
    auto dist = protocol_distribution(pkts);
    REQUIRE(dist.count(ProtoTag::IEC104));
    CHECK(dist[ProtoTag::IEC104].count == 3);
    CHECK(dist[ProtoTag::IEC104].fraction == doctest::Approx(0.75));
    CHECK(dist[ProtoTag::ARP].count == 1);
    CHECK(dist[ProtoTag::ARP].fraction == doctest::Approx(0.25));
    CHECK(!dist.count(ProtoTag::SSH));

    double total = 0.0;
    for (const auto& [tag, stat] : dist) total += stat.fraction;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    CHECK(protocol_distribution({}).empty());
}

TEST_CASE("packets_over_time bins on interval boundaries") {
    std::vector<ParsedPacket> pkts{packet(1, ProtoTag::OTHER), packet(2, ProtoTag::OTHER),
                                   packet(61, ProtoTag::OTHER), packet(62, ProtoTag::OTHER)};
    CHECK(packets_over_time(pkts, 60.0) == std::vector<uint64_t>{2, 2});

    // Trailing empty bins up to the scenario end.
    CHECK(packets_over_time(pkts, 60.0, 300.0) == std::vector<uint64_t>{2, 2, 0, 0, 0});

    // Empty capture with a known end: all-zero bins.
    CHECK(packets_over_time({}, 60.0, 180.0) == std::vector<uint64_t>{0, 0, 0});
    CHECK(packets_over_time({}, 60.0).empty());
}

TEST_CASE("histogram total equals packet count") {
    std::vector<ParsedPacket> pkts;
    for (int i = 0; i < 137; ++i) pkts.push_back(packet(i * 3.7, ProtoTag::OTHER));
    auto bins = packets_over_time(pkts, 30.0);
    uint64_t sum = 0;
    for (uint64_t b : bins) sum += b;
    CHECK(sum == pkts.size());
}

TEST_CASE("connection matrix sums directed wire bytes, arp reported separately") {
    std::vector<ParsedPacket> pkts{packet(0, ProtoTag::IEC104, 100, "10.0.0.1", "10.0.0.2"),
                                   packet(1, ProtoTag::IEC104, 100, "10.0.0.1", "10.0.0.2"),
                                   packet(2, ProtoTag::IEC104, 80, "10.0.0.2", "10.0.0.1"),
                                   packet(3, ProtoTag::ARP, 60)};
    ConnectionMatrix m = connection_matrix(pkts);
    CHECK(m.bytes.size() == 2);
    CHECK(m.bytes[{parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2")}] == 200);
    CHECK(m.bytes[{parse_ipv4("10.0.0.2"), parse_ipv4("10.0.0.1")}] == 80);
    CHECK(m.arp_frames == 1);
    CHECK(m.arp_bytes == 60);
}

TEST_CASE("power report splits the csv at the phase-2 time") {
    std::string path = temp_path("gt_power_report.csv");
    {
        std::ofstream out(path);
        out << "t_s,load_kw,pv_kw,bss_kw,grid_sum_kw\n";
        // Balanced before 600 s, BSS frozen at -1.0 afterwards.
        out << "0.000000,2.000000,-2.000000,0.000000,0.000000\n";
        out << "300.000000,2.500000,-2.000000,-0.500000,0.000000\n";
        out << "700.000000,3.000000,-2.000000,-1.000000,0.000000\n";
        out << "800.000000,4.500000,-2.000000,-1.000000,1.500000\n";
        out << "900.000000,5.000000,-2.500000,-1.000000,1.500000\n";
    }
    PowerReport r = power_report(path, 600.0);
    CHECK(r.rows == 5);
    CHECK(r.max_abs_sum_before == doctest::Approx(0.0));
    CHECK(r.max_abs_sum_after == doctest::Approx(1.5));
    CHECK(r.bss_constant_after);
    CHECK(r.bss_max_abs_after == doctest::Approx(1.0));
    fs::remove(path);
}

TEST_CASE("foreign csv header raises SchemaMismatch") {
    std::string path = temp_path("gt_foreign.csv");
    std::ofstream(path) << "time,power\n1,2\n";
    CHECK_THROWS_AS(power_report(path, 600.0), SchemaMismatch);
    fs::remove(path);
}

TEST_CASE("summary text and csv list every protocol row") {
    std::vector<ParsedPacket> pkts{packet(0, ProtoTag::IEC104, 100, "10.0.0.1", "10.0.0.2"),
                                   packet(1, ProtoTag::ARP, 60)};
    ScenarioSummary s = summarize(pkts, 30.0, "", 600.0);
    std::string text = summary_text(s);
    for (const char* name : {"IEC104", "SSH", "HTTP", "ARP", "OTHER"})
        CHECK(text.find(name) != std::string::npos);
    std::string csv = summary_csv(s);
    CHECK(csv.find("IEC104") != std::string::npos);
    CHECK(!s.power.has_value());
}
