#ifndef GRIDTRACE_NETSTACK_HPP
#define GRIDTRACE_NETSTACK_HPP

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <tuple>

#include "gridtrace/frame.hpp"
#include "gridtrace/simcore.hpp"
#include "gridtrace/vnet.hpp"

namespace gridtrace {

enum class TcpState { Handshaking, Open, Closing, Closed, Dead };

class HostStack;

// TCP-lite session with deterministic packet accounting: 3 frames to
// open, one data + one ACK per application message, 4 frames on clean
// close. One message in flight at a time; later sends queue up.
struct TcpSession {
    uint64_t id = 0;
    HostStack* stack = nullptr;
    Ipv4 local_ip = 0, remote_ip = 0;
    uint16_t local_port = 0, remote_port = 0;
    TcpState state = TcpState::Handshaking;
    bool is_client = false;

    uint32_t snd_seq = 0;
    uint32_t rcv_seq = 0;

    std::deque<Bytes> tx_queue;
    Bytes inflight;
    bool awaiting_ack = false;
    int retries = 0;
    Ticket retx_ticket = 0;
    int syn_tries = 0;
    bool fin_acked = false;        // our FIN was acknowledged
    bool peer_fin_received = false;

    std::function<void(TcpSession&, const Bytes&)> on_data;
    std::function<void(TcpSession&, bool ok)> on_open;
    std::function<void(TcpSession&)> on_dead;
};

// Per-node IPv4/ARP/TCP endpoint. All state is owned by the node and
// driven by sim-core events; no internal concurrency.
class HostStack {
public:
    static constexpr SimTime kRetxTimeout = 1 * kMicrosPerSec;
    static constexpr int kMaxRetries = 2;  // retry policy fixed at 2

    HostStack(Scheduler& sched, Network& net, Node& node, SimTime arp_ttl_us);

    Node& node() { return node_; }
    Ipv4 ip() const { return node_.iface.ip; }
    bool up() const { return node_.iface.up; }

    void listen(uint16_t port, std::function<void(TcpSession&)> on_accept);

    // Open a client session. on_open fires with ok=false after SYN (or
    // ARP) retries are exhausted.
    TcpSession& connect(Ipv4 remote_ip, uint16_t remote_port,
                        std::function<void(TcpSession&, bool)> on_open);

    // Queue one application message on an open session.
    void send(TcpSession& s, Bytes payload);
    void close(TcpSession& s);

    // ARP-probe a host: cb(true) if it answers within the timeout.
    void arp_probe(Ipv4 target, std::function<void(bool)> cb);
    // ICMP echo; cb(true) on reply.
    void ping(Ipv4 target, std::function<void(bool)> cb);

    TcpSession* find_session(uint64_t id);

private:
    using Key = std::tuple<uint16_t, Ipv4, uint16_t>;  // local port, remote ip/port

    void handle_frame(const Frame& f);
    void handle_arp(const Frame& f);
    void handle_tcp(const Frame& f);
    void handle_icmp(const Frame& f);
    void resolve_and_send(Ipv4 dst_ip, Frame frame);
    void transmit_tcp(TcpSession& s, TcpFlags flags, const Bytes& payload, bool advance_seq);
    void start_data(TcpSession& s);
    void arm_retransmit(TcpSession& s, bool syn);
    void session_dead(TcpSession& s);
    void erase_session(TcpSession& s);
    MacAddr mac_for(Ipv4 ip) const;

    Scheduler& sched_;
    Network& net_;
    Node& node_;
    SimTime arp_ttl_;

    struct ArpEntry {
        MacAddr mac;
        SimTime expires;
    };
    std::map<Ipv4, ArpEntry> arp_cache_;
    std::map<Ipv4, std::vector<Frame>> arp_pending_;
    std::map<Ipv4, Ticket> arp_timer_;
    std::map<Ipv4, std::vector<std::function<void(bool)>>> arp_probes_;
    std::map<uint16_t, std::vector<std::function<void(bool)>>> ping_waiters_;

    std::map<uint16_t, std::function<void(TcpSession&)>> listeners_;
    std::map<Key, std::unique_ptr<TcpSession>> sessions_;
    std::map<uint64_t, TcpSession*> by_id_;
    uint16_t next_ephemeral_ = 49152;
    uint16_t next_icmp_ident_ = 1;
    uint64_t next_session_id_ = 0;
    uint32_t next_isn_ = 1000;
};

}  // namespace gridtrace

#endif
