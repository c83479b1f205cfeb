#include "gridtrace/netstack.hpp"

#include "gridtrace/errors.hpp"

namespace gridtrace {

HostStack::HostStack(Scheduler& sched, Network& net, Node& node, SimTime arp_ttl_us)
    : sched_(sched), net_(net), node_(node), arp_ttl_(arp_ttl_us) {
    node_.on_frame = [this](const Frame& f) { handle_frame(f); };
}

void HostStack::listen(uint16_t port, std::function<void(TcpSession&)> on_accept) {
    listeners_[port] = std::move(on_accept);
}

TcpSession* HostStack::find_session(uint64_t id) {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
}

MacAddr HostStack::mac_for(Ipv4 ip) const {
    auto it = arp_cache_.find(ip);
    return it == arp_cache_.end() ? kBroadcastMac : it->second.mac;
}

void HostStack::handle_frame(const Frame& f) {
    if (f.ethertype == kEthertypeArp) {
        handle_arp(f);
        return;
    }
    if (!f.has_ip || f.dst_ip != ip()) return;
    // Passive learning: adopt the sender's mapping when we have no live
    // entry. Entries are never refreshed in place, so the TTL keeps
    // producing periodic ARP exchanges from active senders.
    auto it = arp_cache_.find(f.src_ip);
    if (it == arp_cache_.end() || it->second.expires <= sched_.now())
        arp_cache_[f.src_ip] = ArpEntry{f.src_mac, sched_.now() + arp_ttl_};
    if (f.ip_proto == 6 && f.has_l4)
        handle_tcp(f);
    else if (f.ip_proto == 1)
        handle_icmp(f);
}

void HostStack::handle_arp(const Frame& f) {
    auto sender_ip = arp_sender(f);
    auto target_ip = arp_target(f);
    if (!sender_ip || !target_ip) return;
    if (arp_is_request(f)) {
        if (*target_ip != ip()) return;
        auto it = arp_cache_.find(*sender_ip);
        if (it == arp_cache_.end() || it->second.expires <= sched_.now())
            arp_cache_[*sender_ip] = ArpEntry{f.src_mac, sched_.now() + arp_ttl_};
        net_.send_frame(node_, make_arp_reply(node_.iface.mac, ip(), f.src_mac, *sender_ip));
        return;
    }
    // reply addressed to us
    if (*target_ip != ip()) return;
    arp_cache_[*sender_ip] = ArpEntry{f.src_mac, sched_.now() + arp_ttl_};
    if (auto t = arp_timer_.find(*sender_ip); t != arp_timer_.end()) {
        sched_.cancel(t->second);
        arp_timer_.erase(t);
    }
    if (auto p = arp_pending_.find(*sender_ip); p != arp_pending_.end()) {
        auto frames = std::move(p->second);
        arp_pending_.erase(p);
        for (auto& fr : frames) {
            std::copy(f.src_mac.begin(), f.src_mac.end(), fr.bytes.begin());
            fr.dst_mac = f.src_mac;
            net_.send_frame(node_, fr);
        }
    }
    if (auto pr = arp_probes_.find(*sender_ip); pr != arp_probes_.end()) {
        auto cbs = std::move(pr->second);
        arp_probes_.erase(pr);
        for (auto& cb : cbs) cb(true);
    }
}

void HostStack::resolve_and_send(Ipv4 dst_ip, Frame frame) {
    auto it = arp_cache_.find(dst_ip);
    if (it != arp_cache_.end() && it->second.expires > sched_.now()) {
        std::copy(it->second.mac.begin(), it->second.mac.end(), frame.bytes.begin());
        frame.dst_mac = it->second.mac;
        net_.send_frame(node_, frame);
        return;
    }
    bool outstanding = arp_pending_.count(dst_ip) || arp_probes_.count(dst_ip);
    arp_pending_[dst_ip].push_back(std::move(frame));
    if (!outstanding) {
        net_.send_frame(node_, make_arp_request(node_.iface.mac, ip(), dst_ip));
        arp_timer_[dst_ip] = sched_.schedule_in(kRetxTimeout, [this, dst_ip]() {
            arp_timer_.erase(dst_ip);
            arp_pending_.erase(dst_ip);  // unresolved: drop queued frames
        });
    }
}

void HostStack::arp_probe(Ipv4 target, std::function<void(bool)> cb) {
    bool outstanding = arp_pending_.count(target) || arp_probes_.count(target);
    arp_probes_[target].push_back(std::move(cb));
    if (!outstanding) {
        net_.send_frame(node_, make_arp_request(node_.iface.mac, ip(), target));
        arp_timer_[target] = sched_.schedule_in(kRetxTimeout, [this, target]() {
            arp_timer_.erase(target);
            arp_pending_.erase(target);
            if (auto pr = arp_probes_.find(target); pr != arp_probes_.end()) {
                auto cbs = std::move(pr->second);
                arp_probes_.erase(pr);
                for (auto& f : cbs) f(false);
            }
        });
    }
}

void HostStack::ping(Ipv4 target, std::function<void(bool)> cb) {
    uint16_t ident = next_icmp_ident_++;
    ping_waiters_[ident].push_back(std::move(cb));
    resolve_and_send(target, make_icmp_echo(node_.iface.mac, kBroadcastMac, ip(), target, false,
                                            ident, 1));
    sched_.schedule_in(kRetxTimeout, [this, ident]() {
        if (auto it = ping_waiters_.find(ident); it != ping_waiters_.end()) {
            auto cbs = std::move(it->second);
            ping_waiters_.erase(it);
            for (auto& f : cbs) f(false);
        }
    });
}

void HostStack::handle_icmp(const Frame& f) {
    if (f.bytes.size() < 14 + 20 + 8) return;
    uint8_t type = f.bytes[34];
    uint16_t ident = static_cast<uint16_t>(f.bytes[38] << 8 | f.bytes[39]);
    if (type == 8) {
        resolve_and_send(f.src_ip, make_icmp_echo(node_.iface.mac, kBroadcastMac, ip(), f.src_ip,
                                                  true, ident, 1));
    } else if (type == 0) {
        if (auto it = ping_waiters_.find(ident); it != ping_waiters_.end()) {
            auto cbs = std::move(it->second);
            ping_waiters_.erase(it);
            for (auto& cb : cbs) cb(true);
        }
    }
}

TcpSession& HostStack::connect(Ipv4 remote_ip, uint16_t remote_port,
                               std::function<void(TcpSession&, bool)> on_open) {
    auto s = std::make_unique<TcpSession>();
    s->id = ++next_session_id_;
    s->stack = this;
    s->local_ip = ip();
    s->remote_ip = remote_ip;
    s->local_port = next_ephemeral_++;
    s->remote_port = remote_port;
    s->is_client = true;
    s->snd_seq = next_isn_ += 64000;
    s->on_open = std::move(on_open);
    Key key{s->local_port, remote_ip, remote_port};
    TcpSession& ref = *s;
    by_id_[ref.id] = s.get();
    sessions_[key] = std::move(s);

    transmit_tcp(ref, TcpFlags{.syn = true}, {}, false);
    arm_retransmit(ref, true);
    return ref;
}

void HostStack::transmit_tcp(TcpSession& s, TcpFlags flags, const Bytes& payload, bool) {
    Frame f = make_tcp(node_.iface.mac, mac_for(s.remote_ip), s.local_ip, s.remote_ip,
                       s.local_port, s.remote_port, s.snd_seq, s.rcv_seq, flags, payload);
    resolve_and_send(s.remote_ip, std::move(f));
}

void HostStack::arm_retransmit(TcpSession& s, bool syn) {
    uint64_t id = s.id;
    s.retx_ticket = sched_.schedule_in(kRetxTimeout, [this, id, syn]() {
        TcpSession* s = find_session(id);
        if (!s) return;
        if (syn) {
            if (s->state != TcpState::Handshaking) return;
            if (++s->syn_tries > kMaxRetries) {
                auto cb = std::move(s->on_open);
                TcpSession copy_ref = *s;  // keep fields alive for the callback
                erase_session(*s);
                if (cb) cb(copy_ref, false);
                return;
            }
            transmit_tcp(*s, TcpFlags{.syn = true}, {}, false);
            arm_retransmit(*s, true);
        } else {
            if (!s->awaiting_ack) return;
            if (++s->retries > kMaxRetries) {
                session_dead(*s);
                return;
            }
            transmit_tcp(*s, TcpFlags{.ack = true, .psh = true}, s->inflight, false);
            arm_retransmit(*s, false);
        }
    });
}

void HostStack::send(TcpSession& s, Bytes payload) {
    if (s.state != TcpState::Open) throw SessionClosed("send on non-open session");
    s.tx_queue.push_back(std::move(payload));
    start_data(s);
}

void HostStack::start_data(TcpSession& s) {
    if (s.awaiting_ack || s.tx_queue.empty() || s.state != TcpState::Open) return;
    s.inflight = std::move(s.tx_queue.front());
    s.tx_queue.pop_front();
    s.awaiting_ack = true;
    s.retries = 0;
    transmit_tcp(s, TcpFlags{.ack = true, .psh = true}, s.inflight, false);
    arm_retransmit(s, false);
}

void HostStack::close(TcpSession& s) {
    if (s.state == TcpState::Closed || s.state == TcpState::Dead) return;
    s.state = TcpState::Closing;
    transmit_tcp(s, TcpFlags{.ack = true, .fin = true}, {}, false);
    s.snd_seq += 1;
}

void HostStack::session_dead(TcpSession& s) {
    s.state = TcpState::Dead;
    auto cb = s.on_dead;
    TcpSession copy = s;
    erase_session(s);
    if (cb) cb(copy);
}

void HostStack::erase_session(TcpSession& s) {
    if (s.retx_ticket) sched_.cancel(s.retx_ticket);
    by_id_.erase(s.id);
    sessions_.erase(Key{s.local_port, s.remote_ip, s.remote_port});
}

void HostStack::handle_tcp(const Frame& f) {
    Key key{f.dst_port, f.src_ip, f.src_port};
    auto it = sessions_.find(key);

    if (it == sessions_.end()) {
        if (f.tcp.syn && !f.tcp.ack) {
            auto lst = listeners_.find(f.dst_port);
            if (lst == listeners_.end()) return;  // no RST modeled; silently ignored
            auto s = std::make_unique<TcpSession>();
            s->id = ++next_session_id_;
            s->stack = this;
            s->local_ip = ip();
            s->remote_ip = f.src_ip;
            s->local_port = f.dst_port;
            s->remote_port = f.src_port;
            s->snd_seq = next_isn_ += 64000;
            s->rcv_seq = f.tcp_seq + 1;
            TcpSession& ref = *s;
            by_id_[ref.id] = s.get();
            sessions_[key] = std::move(s);
            transmit_tcp(ref, TcpFlags{.syn = true, .ack = true}, {}, false);
        }
        return;
    }

    TcpSession& s = *it->second;

    if (f.tcp.syn && f.tcp.ack && s.is_client && s.state == TcpState::Handshaking) {
        s.rcv_seq = f.tcp_seq + 1;
        s.snd_seq += 1;
        s.state = TcpState::Open;
        if (s.retx_ticket) sched_.cancel(s.retx_ticket);
        transmit_tcp(s, TcpFlags{.ack = true}, {}, false);
        if (s.on_open) s.on_open(s, true);
        start_data(s);
        return;
    }
    if (f.tcp.syn && !f.tcp.ack && !s.is_client) {
        // duplicate SYN: repeat the SYN-ACK
        transmit_tcp(s, TcpFlags{.syn = true, .ack = true}, {}, false);
        return;
    }

    if (f.tcp.fin) {
        s.rcv_seq = f.tcp_seq + static_cast<uint32_t>(f.payload.size()) + 1;
        s.peer_fin_received = true;
        transmit_tcp(s, TcpFlags{.ack = true}, {}, false);
        if (s.state == TcpState::Closing) {
            // active closer: done once our own FIN is acknowledged
            if (s.fin_acked) {
                s.state = TcpState::Closed;
                erase_session(s);
            }
        } else {
            s.state = TcpState::Closing;
            transmit_tcp(s, TcpFlags{.ack = true, .fin = true}, {}, false);
            s.snd_seq += 1;
        }
        return;
    }

    if (!f.payload.empty()) {
        if (f.tcp_seq < s.rcv_seq) {
            // retransmit of already-delivered data; just re-ACK
            transmit_tcp(s, TcpFlags{.ack = true}, {}, false);
            return;
        }
        s.rcv_seq = f.tcp_seq + static_cast<uint32_t>(f.payload.size());
        transmit_tcp(s, TcpFlags{.ack = true}, {}, false);
        if (s.on_data) s.on_data(s, f.payload);
        return;
    }

    if (f.tcp.ack) {
        if (!s.is_client && s.state == TcpState::Handshaking) {
            s.snd_seq += 1;
            s.state = TcpState::Open;
            auto lst = listeners_.find(s.local_port);
            if (lst != listeners_.end()) lst->second(s);
            return;
        }
        if (s.state == TcpState::Closing) {
            s.fin_acked = true;
            if (s.peer_fin_received) {
                s.state = TcpState::Closed;
                erase_session(s);
            }
            return;
        }
        if (s.awaiting_ack && f.tcp_ack == s.snd_seq + s.inflight.size()) {
            s.snd_seq += static_cast<uint32_t>(s.inflight.size());
            s.inflight.clear();
            s.awaiting_ack = false;
            if (s.retx_ticket) sched_.cancel(s.retx_ticket);
            start_data(s);
        }
    }
}

}  // namespace gridtrace
