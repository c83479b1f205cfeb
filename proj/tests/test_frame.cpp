#include <doctest.h>

#include "gridtrace/errors.hpp"
#include "gridtrace/frame.hpp"

using namespace gridtrace;

namespace {
const MacAddr kMacA{0x02, 0, 0, 0, 0, 1};
const MacAddr kMacB{0x02, 0, 0, 0, 0, 2};
}  // namespace

TEST_CASE("classification is a pure function of ethertype and ports") {
    CHECK(classify(kEthertypeArp, false, 0, 0) == ProtoTag::ARP);
    CHECK(classify(kEthertypeIpv4, true, 49152, 2404) == ProtoTag::IEC104);
    CHECK(classify(kEthertypeIpv4, true, 2404, 49152) == ProtoTag::IEC104);
    CHECK(classify(kEthertypeIpv4, true, 49152, 22) == ProtoTag::SSH);
    CHECK(classify(kEthertypeIpv4, true, 8888, 49152) == ProtoTag::HTTP);
    CHECK(classify(kEthertypeIpv4, true, 1234, 5678) == ProtoTag::OTHER);
    // ICMP has no L4 ports, so it lands in OTHER.
    CHECK(classify(kEthertypeIpv4, false, 0, 0) == ProtoTag::OTHER);
}

TEST_CASE("ipv4 parse and format round-trip") {
    CHECK(parse_ipv4("10.0.0.1") == 0x0a000001u);
    CHECK(format_ipv4(0x0a000001u) == "10.0.0.1");
    CHECK(format_ipv4(parse_ipv4("255.255.255.255")) == "255.255.255.255");
    CHECK_THROWS_AS(parse_ipv4("10.0.0"), ParseError);
    CHECK_THROWS_AS(parse_ipv4("10.0.0.256"), ParseError);
    CHECK_THROWS_AS(parse_ipv4("10.0.0.1.2"), ParseError);
    CHECK_THROWS_AS(parse_ipv4("not an ip"), ParseError);
}

TEST_CASE("frames are padded to the 60-byte ethernet minimum") {
    Frame arp = make_arp_request(kMacA, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"));
    CHECK(arp.wire_len() == 60);
    Frame tcp = make_tcp(kMacA, kMacB, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"), 49152, 2404,
                         1, 0, TcpFlags{.syn = true}, {});
    CHECK(tcp.wire_len() == 60);
    Frame big = make_tcp(kMacA, kMacB, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"), 49152, 2404,
                         1, 0, TcpFlags{.ack = true, .psh = true}, Bytes(200, 0xab));
    CHECK(big.wire_len() == 14 + 20 + 20 + 200);
}

TEST_CASE("tcp frame round-trips through parse_frame") {
    Bytes payload{1, 2, 3, 4, 5};
    Frame f = make_tcp(kMacA, kMacB, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"), 49152, 22,
                       1000, 2000, TcpFlags{.ack = true, .psh = true}, payload);
    auto parsed = parse_frame(f.bytes);
    REQUIRE(parsed.has_value());
    CHECK(parsed->src_mac == kMacA);
    CHECK(parsed->dst_mac == kMacB);
    CHECK(parsed->has_ip);
    CHECK(parsed->src_ip == parse_ipv4("10.0.0.1"));
    CHECK(parsed->dst_ip == parse_ipv4("10.0.0.2"));
    CHECK(parsed->has_l4);
    CHECK(parsed->src_port == 49152);
    CHECK(parsed->dst_port == 22);
    CHECK(parsed->tcp_seq == 1000);
    CHECK(parsed->tcp_ack == 2000);
    CHECK(parsed->tcp.ack);
    CHECK(parsed->tcp.psh);
    CHECK(!parsed->tcp.syn);
    // Padding must not leak into the reconstructed payload.
    CHECK(parsed->payload == payload);
    CHECK(parsed->proto_tag() == ProtoTag::SSH);
}

TEST_CASE("arp accessors see through request and reply frames") {
    Ipv4 a = parse_ipv4("10.0.0.1"), b = parse_ipv4("10.0.0.2");
    Frame req = make_arp_request(kMacA, a, b);
    CHECK(arp_is_request(req));
    CHECK(arp_sender(req) == a);
    CHECK(arp_target(req) == b);
    CHECK(req.dst_mac == kBroadcastMac);

    Frame rep = make_arp_reply(kMacB, b, kMacA, a);
    CHECK(!arp_is_request(rep));
    CHECK(arp_sender(rep) == b);
    CHECK(arp_target(rep) == a);
    CHECK(rep.proto_tag() == ProtoTag::ARP);
}

TEST_CASE("parse_frame rejects sub-ethernet runts") {
    CHECK(!parse_frame(Bytes(13, 0)).has_value());
    CHECK(parse_frame(Bytes(14, 0)).has_value());
}

TEST_CASE("udp and icmp builders parse back") {
    Frame udp = make_udp(kMacA, kMacB, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"), 5000, 6000,
                         Bytes{9, 9, 9});
    auto pu = parse_frame(udp.bytes);
    REQUIRE(pu.has_value());
    CHECK(pu->ip_proto == 17);
    CHECK(pu->src_port == 5000);
    CHECK(pu->payload == Bytes{9, 9, 9});
    CHECK(pu->proto_tag() == ProtoTag::OTHER);

    Frame icmp = make_icmp_echo(kMacA, kMacB, parse_ipv4("10.0.0.1"), parse_ipv4("10.0.0.2"),
                                false, 7, 1);
    auto pi = parse_frame(icmp.bytes);
    REQUIRE(pi.has_value());
    CHECK(pi->ip_proto == 1);
    CHECK(!pi->has_l4);
    CHECK(pi->proto_tag() == ProtoTag::OTHER);
}
