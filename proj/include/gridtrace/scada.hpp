#ifndef GRIDTRACE_SCADA_HPP
#define GRIDTRACE_SCADA_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtrace/netstack.hpp"
#include "gridtrace/powergrid.hpp"
#include "gridtrace/protocols.hpp"

namespace gridtrace {

struct SimFile {
    uint64_t size = 0;
    std::string content;
    bool is_dir = false;
};

// A simulated machine: mini-filesystem, credential store, SSH endpoint,
// and a tiny shell hook that the attack emulation drives.
class SimHost {
public:
    SimHost(Scheduler& sched, Network& net, Node& node, SimTime arp_ttl_us,
            std::string hostname);

    HostStack& stack() { return stack_; }
    Node& node() { return stack_.node(); }
    const std::string& hostname() const { return hostname_; }

    std::map<std::string, std::string> credentials;  // user -> password
    std::string update_dir = "/tmp/upd";

    void write_file(const std::string& path, const std::string& content);
    void write_file(const std::string& path, uint64_t size);  // sized, no content
    bool remove_file(const std::string& path);
    bool has_file(const std::string& path) const;
    const std::map<std::string, SimFile>& fs() const { return fs_; }

    // `du`-style listing: "path size" per line, directories excluded.
    std::string list_files() const;

    // Value-override weakness: if update_dir/<ioa_name> exists, its
    // parsed value replaces the computed one. Unparsable files fail
    // open: the computed value is sent and the event is noted.
    double apply_override(const std::string& ioa_name, double computed);

    // Default-credential weakness: plaintext comparison.
    bool ssh_auth(const std::string& user, const std::string& password) const;

    // Start the SSH-lite server on port 22. Authenticated channel
    // commands are run through the shell hook.
    void enable_ssh();

    std::function<std::string(const std::string& command)> shell;
    uint64_t override_fallbacks = 0;  // unparsable override files seen

private:
    struct SshServerSession {
        bool authed = false;
    };
    void ssh_data(TcpSession& s, const Bytes& payload);

    std::string hostname_;
    HostStack stack_;
    std::map<std::string, SimFile> fs_;
    std::map<uint64_t, SshServerSession> ssh_sessions_;
};

enum class DeviceSource { PV, BSS, LOAD };

struct IoaPoint {
    uint32_t ioa = 0;
    std::string name;
    DeviceSource source = DeviceSource::PV;
};

struct RtuConfig {
    std::vector<IoaPoint> measurements;
    std::optional<IoaPoint> command;  // BSS setpoint target, if any
    double report_interval_s = 5.0;
    Ipv4 mtu_ip = 0;
};

// Remote terminal unit: pushes measurements to the MTU on a timer
// (spontaneous transmission) and applies received setpoints.
class Rtu {
public:
    Rtu(Scheduler& sched, SimHost& host, PowerGrid& grid, RtuConfig cfg);

    void start();
    SimHost& host() { return host_; }
    const RtuConfig& config() const { return cfg_; }

private:
    void tick();
    void on_command(const Iec104Message& msg, TcpSession& session);
    double read_source(DeviceSource src) const;

    Scheduler& sched_;
    SimHost& host_;
    PowerGrid& grid_;
    RtuConfig cfg_;
    uint64_t session_id_ = 0;  // 0 = none
    bool connecting_ = false;
};

struct MtuPoint {
    Ipv4 rtu_ip = 0;
    uint32_t ioa = 0;
    DeviceSource role = DeviceSource::PV;
};

struct MtuCommandTarget {
    Ipv4 rtu_ip = 0;
    uint32_t ioa = 0;
    std::string ioa_name;  // override file name on the MTU side
};

struct MtuConfig {
    std::vector<MtuPoint> points;
    std::vector<MtuCommandTarget> commands;
    double control_interval_s = 5.0;
};

// Master terminal unit: aggregates RTU measurements and issues the
// self-consumption balancing setpoint. Commands are derived only from
// received measurements, never from direct grid reads.
class Mtu {
public:
    Mtu(Scheduler& sched, SimHost& host, MtuConfig cfg);

    void start();
    SimHost& host() { return host_; }

    struct Latest {
        double value = 0.0;
        SimTime ts = 0;
        bool seen = false;
    };
    const Latest& latest(Ipv4 rtu_ip, uint32_t ioa) const;

private:
    void control_tick();
    void on_session(TcpSession& s);
    void on_data(TcpSession& s, const Bytes& payload);
    void send_command(const MtuCommandTarget& target, double value);

    Scheduler& sched_;
    SimHost& host_;
    MtuConfig cfg_;
    std::map<std::pair<Ipv4, uint32_t>, Latest> latest_;
    std::map<Ipv4, uint64_t> rtu_sessions_;  // peer ip -> session id
    std::map<Ipv4, bool> dialing_;
};

}  // namespace gridtrace

#endif
