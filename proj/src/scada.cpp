#include "gridtrace/scada.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "gridtrace/errors.hpp"

namespace gridtrace {

// ---------------------------------------------------------------------
// SimHost
// ---------------------------------------------------------------------

SimHost::SimHost(Scheduler& sched, Network& net, Node& node, SimTime arp_ttl_us,
                 std::string hostname)
    : hostname_(std::move(hostname)), stack_(sched, net, node, arp_ttl_us) {
    fs_[update_dir] = SimFile{0, "", true};
}

void SimHost::write_file(const std::string& path, const std::string& content) {
    fs_[path] = SimFile{content.size(), content, false};
}

void SimHost::write_file(const std::string& path, uint64_t size) {
    fs_[path] = SimFile{size, "", false};
}

bool SimHost::remove_file(const std::string& path) { return fs_.erase(path) > 0; }

bool SimHost::has_file(const std::string& path) const { return fs_.count(path) > 0; }

std::string SimHost::list_files() const {
    std::ostringstream out;
    for (const auto& [path, file] : fs_) {
        if (file.is_dir) continue;
        out << path << " " << file.size << "\n";
    }
    return out.str();
}

double SimHost::apply_override(const std::string& ioa_name, double computed) {
    auto it = fs_.find(update_dir + "/" + ioa_name);
    if (it == fs_.end() || it->second.is_dir) return computed;
    const std::string& text = it->second.content;
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || !std::isfinite(v)) {
        ++override_fallbacks;  // unparsable: fail open
        return computed;
    }
    return v;
}

bool SimHost::ssh_auth(const std::string& user, const std::string& password) const {
    auto it = credentials.find(user);
    return it != credentials.end() && it->second == password;
}

void SimHost::enable_ssh() {
    stack_.listen(kPortSsh, [this](TcpSession& s) {
        ssh_sessions_[s.id] = SshServerSession{};
        s.on_data = [this](TcpSession& ses, const Bytes& payload) { ssh_data(ses, payload); };
        s.on_dead = [this](TcpSession& ses) { ssh_sessions_.erase(ses.id); };
    });
}

void SimHost::ssh_data(TcpSession& s, const Bytes& payload) {
    auto it = ssh_sessions_.find(s.id);
    if (it == ssh_sessions_.end()) return;
    SshEvent ev;
    try {
        ev = decode_ssh(payload);
    } catch (const MalformedMessage&) {
        return;  // garbage on port 22: ignore
    }
    switch (ev.kind) {
        case SshKind::Handshake: {
            if (ev.stage == 0 || ev.stage == 2) {
                SshEvent reply;
                reply.kind = SshKind::Handshake;
                reply.stage = static_cast<uint8_t>(ev.stage + 1);
                stack_.send(s, encode(reply));
            }
            break;
        }
        case SshKind::AuthAttempt: {
            SshEvent reply;
            reply.kind = SshKind::AuthResult;
            reply.success = ssh_auth(ev.user, ev.password);
            if (reply.success) it->second.authed = true;
            stack_.send(s, encode(reply));
            break;
        }
        case SshKind::ChannelData: {
            if (!it->second.authed) break;
            std::string cmd(ev.data.begin(), ev.data.end());
            std::string out = shell ? shell(cmd) : std::string();
            SshEvent reply;
            reply.kind = SshKind::ChannelData;
            reply.data.assign(out.begin(), out.end());
            stack_.send(s, encode(reply));
            break;
        }
        case SshKind::Close:
            break;
        case SshKind::AuthResult:
            break;  // server never receives results
    }
}

// ---------------------------------------------------------------------
// Rtu
// ---------------------------------------------------------------------

Rtu::Rtu(Scheduler& sched, SimHost& host, PowerGrid& grid, RtuConfig cfg)
    : sched_(sched), host_(host), grid_(grid), cfg_(std::move(cfg)) {}

void Rtu::start() {
    // Accept inbound IEC 104 too, so the master can dial back in after
    // the RTU-initiated session dies.
    host_.stack().listen(kPortIec104, [this](TcpSession& s) {
        s.on_data = [this](TcpSession& ses, const Bytes& payload) {
            try {
                on_command(decode_iec104(payload), ses);
            } catch (const MalformedMessage&) {
            }
        };
    });
    tick();
}

double Rtu::read_source(DeviceSource src) const {
    switch (src) {
        case DeviceSource::PV: return grid_.pv_kw();
        case DeviceSource::BSS: return grid_.bss_kw();
        case DeviceSource::LOAD: return grid_.load_kw(sched_.now());
    }
    return 0.0;
}

void Rtu::tick() {
    sched_.schedule_in(seconds(cfg_.report_interval_s), [this] { tick(); });
    if (!host_.stack().up()) return;

    TcpSession* s = session_id_ ? host_.stack().find_session(session_id_) : nullptr;
    if (!s || s->state != TcpState::Open) {
        if (!connecting_ && !s) {
            connecting_ = true;
            TcpSession& ns = host_.stack().connect(
                cfg_.mtu_ip, kPortIec104, [this](TcpSession& ses, bool ok) {
                    connecting_ = false;
                    if (!ok) return;
                    session_id_ = ses.id;
                    ses.on_data = [this](TcpSession& inner, const Bytes& payload) {
                        try {
                            on_command(decode_iec104(payload), inner);
                        } catch (const MalformedMessage&) {
                        }
                    };
                    ses.on_dead = [this](TcpSession&) { session_id_ = 0; };
                });
            (void)ns;
        }
        return;  // report on the next tick once connected
    }

    for (const auto& point : cfg_.measurements) {
        Iec104Message m;
        m.kind = Iec104Kind::Measurement;
        m.ioa = point.ioa;
        m.cot = 3;  // spontaneous
        m.value_kw = host_.apply_override(point.name, read_source(point.source));
        host_.stack().send(*s, encode(m));
    }
}

void Rtu::on_command(const Iec104Message& msg, TcpSession& session) {
    if (msg.kind != Iec104Kind::SetpointCommand) return;
    if (!cfg_.command || msg.ioa != cfg_.command->ioa) return;
    grid_.apply_setpoint(msg.value_kw);
    Iec104Message ack;
    ack.kind = Iec104Kind::Ack;
    ack.ioa = msg.ioa;
    ack.cot = 7;  // activation confirmation
    host_.stack().send(session, encode(ack));
}

// ---------------------------------------------------------------------
// Mtu
// ---------------------------------------------------------------------

Mtu::Mtu(Scheduler& sched, SimHost& host, MtuConfig cfg)
    : sched_(sched), host_(host), cfg_(std::move(cfg)) {}

void Mtu::start() {
    host_.stack().listen(kPortIec104, [this](TcpSession& s) { on_session(s); });
    control_tick();
}

void Mtu::on_session(TcpSession& s) {
    rtu_sessions_[s.remote_ip] = s.id;
    s.on_data = [this](TcpSession& ses, const Bytes& payload) { on_data(ses, payload); };
    s.on_dead = [this](TcpSession& ses) {
        auto it = rtu_sessions_.find(ses.remote_ip);
        if (it != rtu_sessions_.end() && it->second == ses.id) rtu_sessions_.erase(it);
    };
}

void Mtu::on_data(TcpSession& s, const Bytes& payload) {
    Iec104Message msg;
    try {
        msg = decode_iec104(payload);
    } catch (const MalformedMessage&) {
        return;
    }
    if (msg.kind != Iec104Kind::Measurement) return;  // Acks need no bookkeeping
    Latest& slot = latest_[{s.remote_ip, msg.ioa}];
    slot.value = msg.value_kw;
    slot.ts = sched_.now();
    slot.seen = true;
}

const Mtu::Latest& Mtu::latest(Ipv4 rtu_ip, uint32_t ioa) const {
    static const Latest kNone{};
    auto it = latest_.find({rtu_ip, ioa});
    return it == latest_.end() ? kNone : it->second;
}

void Mtu::control_tick() {
    sched_.schedule_in(seconds(cfg_.control_interval_s), [this] { control_tick(); });
    if (!host_.stack().up() || cfg_.commands.empty()) return;

    // Balance only from telemetry actually received.
    double load = 0.0, pv = 0.0;
    bool have_load = false, have_pv = false;
    for (const auto& p : cfg_.points) {
        const Latest& slot = latest(p.rtu_ip, p.ioa);
        if (!slot.seen) continue;
        if (p.role == DeviceSource::LOAD) {
            load += slot.value;
            have_load = true;
        } else if (p.role == DeviceSource::PV) {
            pv += slot.value;
            have_pv = true;
        }
    }
    if (!have_load || !have_pv) return;

    double total = -(load + pv) / static_cast<double>(cfg_.commands.size());
    for (const auto& target : cfg_.commands) {
        send_command(target, host_.apply_override(target.ioa_name, total));
    }
}

void Mtu::send_command(const MtuCommandTarget& target, double value) {
    Iec104Message cmd;
    cmd.kind = Iec104Kind::SetpointCommand;
    cmd.ioa = target.ioa;
    cmd.cot = 6;  // activation
    cmd.value_kw = value;

    auto it = rtu_sessions_.find(target.rtu_ip);
    TcpSession* s = it == rtu_sessions_.end() ? nullptr : host_.stack().find_session(it->second);
    if (s && s->state == TcpState::Open) {
        host_.stack().send(*s, encode(cmd));
        return;
    }
    if (dialing_[target.rtu_ip]) return;
    dialing_[target.rtu_ip] = true;
    host_.stack().connect(target.rtu_ip, kPortIec104, [this, cmd](TcpSession& ses, bool ok) {
        dialing_[ses.remote_ip] = false;
        if (!ok) return;
        rtu_sessions_[ses.remote_ip] = ses.id;
        ses.on_data = [this](TcpSession& inner, const Bytes& payload) { on_data(inner, payload); };
        ses.on_dead = [this](TcpSession& inner) {
            auto it2 = rtu_sessions_.find(inner.remote_ip);
            if (it2 != rtu_sessions_.end() && it2->second == inner.id) rtu_sessions_.erase(it2);
        };
        host_.stack().send(ses, encode(cmd));
    });
}

}  // namespace gridtrace
