#include "gridtrace/frame.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "gridtrace/errors.hpp"

namespace gridtrace {

const char* to_string(ProtoTag tag) {
    switch (tag) {
        case ProtoTag::ARP: return "ARP";
        case ProtoTag::IEC104: return "IEC104";
        case ProtoTag::SSH: return "SSH";
        case ProtoTag::HTTP: return "HTTP";
        default: return "OTHER";
    }
}

ProtoTag classify(uint16_t ethertype, bool has_l4, uint16_t src_port, uint16_t dst_port) {
    if (ethertype == kEthertypeArp) return ProtoTag::ARP;
    if (has_l4) {
        if (src_port == kPortIec104 || dst_port == kPortIec104) return ProtoTag::IEC104;
        if (src_port == kPortSsh || dst_port == kPortSsh) return ProtoTag::SSH;
        if (src_port == kPortC2Http || dst_port == kPortC2Http) return ProtoTag::HTTP;
    }
    return ProtoTag::OTHER;
}

Ipv4 parse_ipv4(const std::string& dotted) {
    Ipv4 out = 0;
    int parts = 0;
    size_t pos = 0;
    if (std::count(dotted.begin(), dotted.end(), '.') != 3)
        throw ParseError("bad IPv4 address: " + dotted);
    while (pos <= dotted.size() && parts < 4) {
        size_t dot = dotted.find('.', pos);
        std::string part = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (part.empty() || part.size() > 3) throw ParseError("bad IPv4 address: " + dotted);
        int v = 0;
        for (char c : part) {
            if (c < '0' || c > '9') throw ParseError("bad IPv4 address: " + dotted);
            v = v * 10 + (c - '0');
        }
        if (v > 255) throw ParseError("bad IPv4 address: " + dotted);
        out = (out << 8) | static_cast<Ipv4>(v);
        ++parts;
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    if (parts != 4) throw ParseError("bad IPv4 address: " + dotted);
    return out;
}

std::string format_ipv4(Ipv4 ip) {
    char buf[16];
    snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip >> 24) & 0xff, (ip >> 16) & 0xff, (ip >> 8) & 0xff,
             ip & 0xff);
    return buf;
}

std::string format_mac(const MacAddr& mac) {
    char buf[18];
    snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3],
             mac[4], mac[5]);
    return buf;
}

namespace {

void put16(Bytes& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v & 0xff));
}

void put32(Bytes& b, uint32_t v) {
    put16(b, static_cast<uint16_t>(v >> 16));
    put16(b, static_cast<uint16_t>(v & 0xffff));
}

uint16_t get16(const Bytes& b, size_t off) {
    return static_cast<uint16_t>(b[off] << 8 | b[off + 1]);
}

uint32_t get32(const Bytes& b, size_t off) {
    return static_cast<uint32_t>(get16(b, off)) << 16 | get16(b, off + 2);
}

uint16_t inet_checksum(const uint8_t* data, size_t len, uint32_t initial = 0) {
    uint32_t sum = initial;
    for (size_t i = 0; i + 1 < len; i += 2) sum += static_cast<uint32_t>(data[i]) << 8 | data[i + 1];
    if (len & 1) sum += static_cast<uint32_t>(data[len - 1]) << 8;
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<uint16_t>(~sum & 0xffff);
}

uint32_t pseudo_header_sum(Ipv4 src, Ipv4 dst, uint8_t proto, uint16_t l4_len) {
    uint32_t sum = 0;
    sum += (src >> 16) & 0xffff;
    sum += src & 0xffff;
    sum += (dst >> 16) & 0xffff;
    sum += dst & 0xffff;
    sum += proto;
    sum += l4_len;
    return sum;
}

Bytes ethernet_header(const MacAddr& dst, const MacAddr& src, uint16_t ethertype) {
    Bytes b;
    b.insert(b.end(), dst.begin(), dst.end());
    b.insert(b.end(), src.begin(), src.end());
    put16(b, ethertype);
    return b;
}

void pad_min_frame(Bytes& b) {
    if (b.size() < 60) b.resize(60, 0);
}

Bytes ipv4_header(Ipv4 src, Ipv4 dst, uint8_t proto, uint16_t payload_len, uint16_t ident) {
    Bytes h;
    h.push_back(0x45);  // version 4, IHL 5
    h.push_back(0x00);
    put16(h, static_cast<uint16_t>(20 + payload_len));
    put16(h, ident);
    put16(h, 0x4000);  // DF
    h.push_back(64);   // TTL
    h.push_back(proto);
    put16(h, 0);  // checksum placeholder
    put32(h, src);
    put32(h, dst);
    uint16_t csum = inet_checksum(h.data(), h.size());
    h[10] = static_cast<uint8_t>(csum >> 8);
    h[11] = static_cast<uint8_t>(csum & 0xff);
    return h;
}

Frame finish_ip_frame(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
                      uint8_t ip_proto, Bytes l4) {
    Frame f;
    f.bytes = ethernet_header(dst_mac, src_mac, kEthertypeIpv4);
    // DF is set and nothing fragments, so the identification field can
    // stay zero; a global counter here would leak state across runs.
    Bytes ip = ipv4_header(src_ip, dst_ip, ip_proto, static_cast<uint16_t>(l4.size()), 0);
    f.bytes.insert(f.bytes.end(), ip.begin(), ip.end());
    f.bytes.insert(f.bytes.end(), l4.begin(), l4.end());
    pad_min_frame(f.bytes);
    f.src_mac = src_mac;
    f.dst_mac = dst_mac;
    f.ethertype = kEthertypeIpv4;
    f.has_ip = true;
    f.src_ip = src_ip;
    f.dst_ip = dst_ip;
    f.ip_proto = ip_proto;
    return f;
}

}  // namespace

Frame make_arp_request(const MacAddr& src_mac, Ipv4 src_ip, Ipv4 target_ip) {
    Frame f;
    f.bytes = ethernet_header(kBroadcastMac, src_mac, kEthertypeArp);
    put16(f.bytes, 1);  // hardware: ethernet
    put16(f.bytes, kEthertypeIpv4);
    f.bytes.push_back(6);
    f.bytes.push_back(4);
    put16(f.bytes, 1);  // opcode: request
    f.bytes.insert(f.bytes.end(), src_mac.begin(), src_mac.end());
    put32(f.bytes, src_ip);
    f.bytes.insert(f.bytes.end(), 6, 0x00);  // unknown target MAC
    put32(f.bytes, target_ip);
    pad_min_frame(f.bytes);
    f.src_mac = src_mac;
    f.dst_mac = kBroadcastMac;
    f.ethertype = kEthertypeArp;
    return f;
}

Frame make_arp_reply(const MacAddr& src_mac, Ipv4 src_ip, const MacAddr& dst_mac, Ipv4 dst_ip) {
    Frame f;
    f.bytes = ethernet_header(dst_mac, src_mac, kEthertypeArp);
    put16(f.bytes, 1);
    put16(f.bytes, kEthertypeIpv4);
    f.bytes.push_back(6);
    f.bytes.push_back(4);
    put16(f.bytes, 2);  // opcode: reply
    f.bytes.insert(f.bytes.end(), src_mac.begin(), src_mac.end());
    put32(f.bytes, src_ip);
    f.bytes.insert(f.bytes.end(), dst_mac.begin(), dst_mac.end());
    put32(f.bytes, dst_ip);
    pad_min_frame(f.bytes);
    f.src_mac = src_mac;
    f.dst_mac = dst_mac;
    f.ethertype = kEthertypeArp;
    return f;
}

Frame make_tcp(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
               uint16_t src_port, uint16_t dst_port, uint32_t seq, uint32_t ack, TcpFlags flags,
               const Bytes& payload) {
    Bytes tcp;
    put16(tcp, src_port);
    put16(tcp, dst_port);
    put32(tcp, seq);
    put32(tcp, ack);
    uint8_t flag_bits = 0;
    if (flags.fin) flag_bits |= 0x01;
    if (flags.syn) flag_bits |= 0x02;
    if (flags.rst) flag_bits |= 0x04;
    if (flags.psh) flag_bits |= 0x08;
    if (flags.ack) flag_bits |= 0x10;
    tcp.push_back(0x50);  // data offset 5
    tcp.push_back(flag_bits);
    put16(tcp, 64240);  // window
    put16(tcp, 0);      // checksum placeholder
    put16(tcp, 0);      // urgent
    tcp.insert(tcp.end(), payload.begin(), payload.end());
    uint32_t pseudo = pseudo_header_sum(src_ip, dst_ip, 6, static_cast<uint16_t>(tcp.size()));
    uint16_t csum = inet_checksum(tcp.data(), tcp.size(), pseudo);
    tcp[16] = static_cast<uint8_t>(csum >> 8);
    tcp[17] = static_cast<uint8_t>(csum & 0xff);

    Frame f = finish_ip_frame(src_mac, dst_mac, src_ip, dst_ip, 6, std::move(tcp));
    f.has_l4 = true;
    f.src_port = src_port;
    f.dst_port = dst_port;
    f.tcp = flags;
    f.tcp_seq = seq;
    f.tcp_ack = ack;
    f.payload = payload;
    return f;
}

Frame make_udp(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
               uint16_t src_port, uint16_t dst_port, const Bytes& payload) {
    Bytes udp;
    put16(udp, src_port);
    put16(udp, dst_port);
    put16(udp, static_cast<uint16_t>(8 + payload.size()));
    put16(udp, 0);
    udp.insert(udp.end(), payload.begin(), payload.end());
    uint32_t pseudo = pseudo_header_sum(src_ip, dst_ip, 17, static_cast<uint16_t>(udp.size()));
    uint16_t csum = inet_checksum(udp.data(), udp.size(), pseudo);
    if (csum == 0) csum = 0xffff;
    udp[6] = static_cast<uint8_t>(csum >> 8);
    udp[7] = static_cast<uint8_t>(csum & 0xff);

    Frame f = finish_ip_frame(src_mac, dst_mac, src_ip, dst_ip, 17, std::move(udp));
    f.has_l4 = true;
    f.src_port = src_port;
    f.dst_port = dst_port;
    f.payload = payload;
    return f;
}

Frame make_icmp_echo(const MacAddr& src_mac, const MacAddr& dst_mac, Ipv4 src_ip, Ipv4 dst_ip,
                     bool reply, uint16_t ident, uint16_t seq) {
    Bytes icmp;
    icmp.push_back(reply ? 0 : 8);
    icmp.push_back(0);
    put16(icmp, 0);  // checksum placeholder
    put16(icmp, ident);
    put16(icmp, seq);
    for (int i = 0; i < 16; ++i) icmp.push_back(static_cast<uint8_t>('a' + i));
    uint16_t csum = inet_checksum(icmp.data(), icmp.size());
    icmp[2] = static_cast<uint8_t>(csum >> 8);
    icmp[3] = static_cast<uint8_t>(csum & 0xff);
    return finish_ip_frame(src_mac, dst_mac, src_ip, dst_ip, 1, std::move(icmp));
}

std::optional<Frame> parse_frame(const Bytes& bytes) {
    if (bytes.size() < 14) return std::nullopt;
    Frame f;
    f.bytes = bytes;
    std::memcpy(f.dst_mac.data(), bytes.data(), 6);
    std::memcpy(f.src_mac.data(), bytes.data() + 6, 6);
    f.ethertype = get16(bytes, 12);
    if (f.ethertype == kEthertypeIpv4 && bytes.size() >= 14 + 20) {
        size_t ip_off = 14;
        uint8_t ihl = (bytes[ip_off] & 0x0f) * 4;
        uint16_t total_len = get16(bytes, ip_off + 2);
        if (bytes.size() < ip_off + ihl || total_len < ihl) return f;
        f.has_ip = true;
        f.ip_proto = bytes[ip_off + 9];
        f.src_ip = get32(bytes, ip_off + 12);
        f.dst_ip = get32(bytes, ip_off + 16);
        size_t l4_off = ip_off + ihl;
        size_t l4_len = std::min<size_t>(total_len - ihl, bytes.size() - l4_off);
        if (f.ip_proto == 6 && l4_len >= 20) {
            f.has_l4 = true;
            f.src_port = get16(bytes, l4_off);
            f.dst_port = get16(bytes, l4_off + 2);
            f.tcp_seq = get32(bytes, l4_off + 4);
            f.tcp_ack = get32(bytes, l4_off + 8);
            uint8_t off = (bytes[l4_off + 12] >> 4) * 4;
            uint8_t flag_bits = bytes[l4_off + 13];
            f.tcp.fin = flag_bits & 0x01;
            f.tcp.syn = flag_bits & 0x02;
            f.tcp.rst = flag_bits & 0x04;
            f.tcp.psh = flag_bits & 0x08;
            f.tcp.ack = flag_bits & 0x10;
            if (l4_len > off)
                f.payload.assign(bytes.begin() + l4_off + off, bytes.begin() + l4_off + l4_len);
        } else if (f.ip_proto == 17 && l4_len >= 8) {
            f.has_l4 = true;
            f.src_port = get16(bytes, l4_off);
            f.dst_port = get16(bytes, l4_off + 2);
            if (l4_len > 8)
                f.payload.assign(bytes.begin() + l4_off + 8, bytes.begin() + l4_off + l4_len);
        }
    }
    return f;
}

bool arp_is_request(const Frame& f) {
    return f.ethertype == kEthertypeArp && f.bytes.size() >= 42 && get16(f.bytes, 20) == 1;
}

std::optional<Ipv4> arp_target(const Frame& f) {
    if (f.ethertype != kEthertypeArp || f.bytes.size() < 42) return std::nullopt;
    return get32(f.bytes, 38);
}

std::optional<Ipv4> arp_sender(const Frame& f) {
    if (f.ethertype != kEthertypeArp || f.bytes.size() < 42) return std::nullopt;
    return get32(f.bytes, 28);
}

}  // namespace gridtrace
