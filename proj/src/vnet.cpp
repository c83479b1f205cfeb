#include "gridtrace/vnet.hpp"

#include <cstdio>

#include "gridtrace/errors.hpp"

namespace gridtrace {

Node& Network::add_node(const std::string& name, Ipv4 ip) {
    auto node = std::make_unique<Node>();
    node->name = name;
    node->index = static_cast<int>(nodes_.size());
    node->iface.ip = ip;
    node->iface.mac = {0x02, 0x00, 0x00, 0x00, 0x00, ++next_mac_suffix_};
    mac_registry_[node->iface.mac] = node.get();
    nodes_.push_back(std::move(node));
    return *nodes_.back();
}

Node* Network::find_node(const std::string& name) {
    for (auto& n : nodes_)
        if (n->name == name) return n.get();
    return nullptr;
}

Node* Network::node_by_ip(Ipv4 ip) {
    for (auto& n : nodes_)
        if (n->iface.ip == ip) return n.get();
    return nullptr;
}

void Network::attach(Node& node, int switch_port, SimTime delay_us, uint64_t bandwidth) {
    if (ports_.count(switch_port)) throw PortInUse("switch port already occupied");
    ports_[switch_port] = Port{&node, delay_us, bandwidth};
    node_port_[node.index] = switch_port;
}

SimTime Network::link_latency(const Port& p, size_t frame_len) const {
    SimTime t = p.delay_us;
    if (p.bandwidth > 0) {
        // serialization delay, rounded up to whole microseconds
        t += (static_cast<uint64_t>(frame_len) * kMicrosPerSec + p.bandwidth - 1) / p.bandwidth;
    }
    return t;
}

void Network::send_frame(Node& node, Frame frame) {
    if (!node.iface.up) {
        ++drops_;
        return;
    }
    auto it = node_port_.find(node.index);
    if (it == node_port_.end()) throw UnknownInterface("node not attached: " + node.name);
    int port = it->second;
    SimTime latency = link_latency(ports_[port], frame.wire_len());
    sched_.schedule_in(latency, [this, port, frame = std::move(frame)]() mutable {
        switch_receive(port, std::move(frame));
    });
}

void Network::switch_receive(int in_port, Frame frame) {
    mac_table_[frame.src_mac] = in_port;

    bool broadcast = frame.dst_mac == kBroadcastMac;
    if (!broadcast) {
        // A unicast frame to a known-but-downed interface is dropped at
        // forwarding time and never enters the capture.
        auto reg = mac_registry_.find(frame.dst_mac);
        if (reg != mac_registry_.end() && !reg->second->iface.up) {
            ++drops_;
            return;
        }
    }

    capture_.push_back(CaptureEntry{sched_.now(), frame});

    auto forward = [&](int out_port) {
        const Port& p = ports_[out_port];
        Node* dst = p.node;
        SimTime latency = link_latency(p, frame.wire_len());
        sched_.schedule_in(latency, [this, dst, frame]() { deliver(dst, frame); });
    };

    if (!broadcast) {
        auto learned = mac_table_.find(frame.dst_mac);
        if (learned != mac_table_.end()) {
            if (learned->second != in_port) forward(learned->second);
            return;
        }
    }
    // broadcast or unknown destination: flood all other ports
    for (auto& [port, p] : ports_)
        if (port != in_port) forward(port);
}

void Network::deliver(Node* node, const Frame& frame) {
    if (!node->iface.up) {
        ++drops_;
        return;
    }
    if (frame.dst_mac != kBroadcastMac && frame.dst_mac != node->iface.mac) return;
    if (node->on_frame) node->on_frame(frame);
}

void Network::set_interface_up(Node& node, bool up) { node.iface.up = up; }

namespace {

void le16(FILE* f, uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
    fwrite(b, 1, 2, f);
}

void le32(FILE* f, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>((v >> 8) & 0xff),
                    static_cast<uint8_t>((v >> 16) & 0xff), static_cast<uint8_t>(v >> 24)};
    fwrite(b, 1, 4, f);
}

}  // namespace

void Network::write_pcap(const Capture& cap, const std::string& path, uint64_t* bytes_out) {
    FILE* f = fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    le32(f, 0xa1b2c3d4);  // magic
    le16(f, 2);           // version 2.4
    le16(f, 4);
    le32(f, 0);      // thiszone
    le32(f, 0);      // sigfigs
    le32(f, 65535);  // snaplen
    le32(f, 1);      // linktype: Ethernet
    uint64_t total = 24;
    for (const auto& entry : cap) {
        le32(f, static_cast<uint32_t>(entry.ts / kMicrosPerSec));
        le32(f, static_cast<uint32_t>(entry.ts % kMicrosPerSec));
        uint32_t len = static_cast<uint32_t>(entry.frame.wire_len());
        le32(f, len);
        le32(f, len);
        fwrite(entry.frame.bytes.data(), 1, len, f);
        total += 16 + len;
    }
    if (fclose(f) != 0) throw IoError("write failed: " + path);
    if (bytes_out) *bytes_out = total;
}

uint64_t Network::export_pcap(const std::string& path) const {
    uint64_t bytes = 0;
    write_pcap(capture_, path, &bytes);
    return bytes;
}

}  // namespace gridtrace
