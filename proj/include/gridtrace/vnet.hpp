#ifndef GRIDTRACE_VNET_HPP
#define GRIDTRACE_VNET_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gridtrace/frame.hpp"
#include "gridtrace/simcore.hpp"

namespace gridtrace {

struct Interface {
    MacAddr mac{};
    Ipv4 ip = 0;
    bool up = true;
};

struct CaptureEntry {
    SimTime ts;
    Frame frame;
};

// Everything that traverses the switch, in timestamp order.
using Capture = std::vector<CaptureEntry>;

class Network;

// A simulated machine's network attachment point. The owning host stack
// registers on_frame to receive delivered frames.
struct Node {
    std::string name;
    int index = -1;
    Interface iface;
    std::function<void(const Frame&)> on_frame;
};

// Virtual L2 star network: every node hangs off one MAC-learning switch
// that taps all forwarded traffic into the capture.
class Network {
public:
    explicit Network(Scheduler& sched) : sched_(sched) {}

    Node& add_node(const std::string& name, Ipv4 ip);
    Node* find_node(const std::string& name);
    Node* node_by_ip(Ipv4 ip);
    const std::vector<std::unique_ptr<Node>>& nodes() const { return nodes_; }

    // Attach a node to a switch port. Throws PortInUse / UnknownInterface.
    void attach(Node& node, int switch_port, SimTime delay_us = 1000, uint64_t bandwidth = 0);

    // Transmit out of the node's interface. A frame from a downed
    // interface is dropped at the source and never reaches the switch.
    void send_frame(Node& node, Frame frame);

    void set_interface_up(Node& node, bool up);

    const Capture& capture() const { return capture_; }
    uint64_t drop_count() const { return drops_; }

    // Classic PCAP, linktype 1, snaplen 65535, little-endian.
    uint64_t export_pcap(const std::string& path) const;
    static void write_pcap(const Capture& cap, const std::string& path, uint64_t* bytes_out);

private:
    struct Port {
        Node* node = nullptr;
        SimTime delay_us = 1000;
        uint64_t bandwidth = 0;  // bytes/second, 0 = unlimited
    };

    SimTime link_latency(const Port& p, size_t frame_len) const;
    void switch_receive(int in_port, Frame frame);
    void deliver(Node* node, const Frame& frame);

    Scheduler& sched_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::map<int, Port> ports_;
    std::map<int, int> node_port_;           // node index -> switch port
    std::map<MacAddr, int> mac_table_;       // learned forwarding entries
    std::map<MacAddr, Node*> mac_registry_;  // all known interfaces
    Capture capture_;
    uint64_t drops_ = 0;
    uint8_t next_mac_suffix_ = 0;
};

}  // namespace gridtrace

#endif
