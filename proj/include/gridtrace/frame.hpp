#ifndef GRIDTRACE_FRAME_HPP
#define GRIDTRACE_FRAME_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gridtrace {

using Bytes = std::vector<uint8_t>;
using MacAddr = std::array<uint8_t, 6>;
using Ipv4 = uint32_t;  // host byte order

constexpr MacAddr kBroadcastMac = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff};

constexpr uint16_t kEthertypeIpv4 = 0x0800;
constexpr uint16_t kEthertypeArp = 0x0806;

constexpr uint16_t kPortIec104 = 2404;
constexpr uint16_t kPortSsh = 22;
constexpr uint16_t kPortC2Http = 8888;

enum class ProtoTag { ARP, IEC104, SSH, HTTP, OTHER };

const char* to_string(ProtoTag tag);

// Classification is a pure function of ports and ethertype so that the
// analyzer and the simulator always agree.
ProtoTag classify(uint16_t ethertype, bool has_l4, uint16_t src_port, uint16_t dst_port);

Ipv4 parse_ipv4(const std::string& dotted);
std::string format_ipv4(Ipv4 ip);
std::string format_mac(const MacAddr& mac);

struct TcpFlags {
    bool syn = false;
    bool ack = false;
    bool fin = false;
    bool psh = false;
    bool rst = false;
};

// Parsed view of a captured frame, alongside the raw wire bytes.
struct Frame {
    Bytes bytes;  // full Ethernet frame, padded to 60 bytes minimum

    MacAddr src_mac{};
    MacAddr dst_mac{};
    uint16_t ethertype = 0;

    bool has_ip = false;
    Ipv4 src_ip = 0;
    Ipv4 dst_ip = 0;
    uint8_t ip_proto = 0;

    bool has_l4 = false;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    TcpFlags tcp;
    uint32_t tcp_seq = 0;
    uint32_t tcp_ack = 0;

    Bytes payload;  // L4 payload (application bytes)

    ProtoTag proto_tag() const { return classify(ethertype, has_l4, src_port, dst_port); }
    size_t wire_len() const { return bytes.size(); }
};

// Builders synthesize real headers with correct checksums so exported
// captures parse in standard tooling.
Frame make_arp_request(const MacAddr& src_mac, Ipv4 src_ip, Ipv4 target_ip);
Frame make_arp_reply(const MacAddr& src_mac, Ipv4 src_ip, const MacAddr& dst_mac, Ipv4 dst_ip);
Frame make_tcp(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
               uint16_t src_port, uint16_t dst_port, uint32_t seq, uint32_t ack, TcpFlags flags,
               const Bytes& payload);
Frame make_udp(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
               uint16_t src_port, uint16_t dst_port, const Bytes& payload);
Frame make_icmp_echo(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
                     bool reply, uint16_t ident, uint16_t seq);

// Re-derive the parsed view from raw bytes (used by the PCAP analyzer).
// Returns nullopt for frames shorter than an Ethernet header.
std::optional<Frame> parse_frame(const Bytes& bytes);

// ARP target IP of a request frame, if the frame is an ARP request.
std::optional<Ipv4> arp_target(const Frame& f);
std::optional<Ipv4> arp_sender(const Frame& f);
bool arp_is_request(const Frame& f);

}  // namespace gridtrace

#endif
