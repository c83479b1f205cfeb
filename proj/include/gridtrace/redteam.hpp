#ifndef GRIDTRACE_REDTEAM_HPP
#define GRIDTRACE_REDTEAM_HPP

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridtrace/scada.hpp"

namespace gridtrace {

// ---------------------------------------------------------------------
// Ability / Adversary / Fact model
// ---------------------------------------------------------------------

struct AbilityParserRule {
    std::string regex;  // capture group 1 becomes the fact value
    std::string trait;
};

struct Ability {
    std::string id;
    std::string name;
    std::string platform = "linux";
    std::string command;  // template with #{trait} placeholders
    std::vector<std::string> payloads;
    std::vector<std::string> cleanup;
    std::vector<std::string> requirements;  // fact traits
    std::vector<AbilityParserRule> parsers;
};

class AbilityLibrary {
public:
    // Load every *.yml / *.yaml in dir. Throws ParseError / DuplicateId.
    void load_dir(const std::string& dir);
    void add(Ability ability);  // DuplicateId on repeat
    const Ability* find(const std::string& id) const;
    size_t size() const { return abilities_.size(); }

private:
    std::map<std::string, Ability> abilities_;
};

struct Fact {
    std::string trait;
    std::string value;
    std::string origin;  // agent id or "seed"
};

struct FactRule {
    std::string trait;
    bool deny = false;  // else ALLOW
    std::string match;  // glob, '*' matches any run of characters
};

bool glob_match(const std::string& pattern, const std::string& value);

// Operation-scoped fact store. (trait, value) pairs are deduplicated;
// rule filtering is ALLOW-first with DENY winning on conflict.
class FactStore {
public:
    bool add(Fact fact);  // false if already present
    void add_rule(FactRule rule) { rules_.push_back(std::move(rule)); }

    // Values for a trait that survive the rules: matching any ALLOW
    // pattern (no ALLOW rule for the trait => all) minus DENY matches.
    std::vector<std::string> values(const std::string& trait) const;

    const std::vector<Fact>& all() const { return facts_; }
    const std::vector<FactRule>& rules() const { return rules_; }

private:
    std::vector<Fact> facts_;
    std::vector<FactRule> rules_;
};

struct Adversary {
    std::string id;
    std::string name;
    std::vector<std::string> ability_ids;
};

Adversary load_adversary_file(const std::string& path);

// ---------------------------------------------------------------------
// Operation + atomic planner
// ---------------------------------------------------------------------

enum class StepStatus { Pending, Running, Done, Failed, Skipped };

struct Instruction {
    std::string ability_id;
    std::string command;  // fully rendered
    std::vector<std::string> payloads;
    std::vector<std::string> cleanup;  // rendered cleanup commands
};

struct ExecutedStep {
    SimTime ts = 0;
    std::string agent_id;
    std::string ability_id;
    std::string command;
    std::string stdout_text;
    int exit_code = 0;
    std::vector<std::string> facts_produced;  // "trait=value"
};

class Operation {
public:
    Operation(std::string id, const AbilityLibrary& library, Adversary adversary,
              std::string agent_group, FactStore facts, size_t cross_product_cap = 256);

    const std::string& id() const { return id_; }
    const std::string& group() const { return group_; }
    const Adversary& adversary() const { return adversary_; }
    FactStore& facts() { return facts_; }
    const FactStore& facts() const { return facts_; }

    void register_agent(const std::string& agent_id);

    // Atomic planner: next instruction for this agent, or nullopt when
    // the agent must wait (requirements still producible or a step is
    // in flight). Marks dead-end abilities Skipped as a side effect.
    std::optional<Instruction> plan_next(const std::string& agent_id);

    void record_result(const std::string& agent_id, const ExecutedStep& step);

    // No pending or running (agent, ability) pairs remain.
    bool finished() const;

    // Mark abilities still waiting on facts as skipped.
    void finalize();

    StepStatus status(const std::string& agent_id, const std::string& ability_id) const;
    const std::vector<ExecutedStep>& steps() const { return steps_; }
    std::vector<ExecutedStep>& steps() { return steps_; }

private:
    struct AbilityState {
        StepStatus status = StepStatus::Pending;
        std::deque<Instruction> queued;  // expanded, not yet issued
        size_t issued = 0;
        size_t completed = 0;
        size_t succeeded = 0;
        std::set<std::string> seen_commands;  // dedup across expansions
    };

    bool requirements_satisfied(const Ability& ability) const;
    bool producible(const std::string& trait, const std::string& agent_id, size_t before_idx) const;
    void expand(const Ability& ability, AbilityState& state);

    std::string id_;
    const AbilityLibrary& library_;
    Adversary adversary_;
    std::string group_;
    FactStore facts_;
    size_t cap_;
    std::map<std::string, std::vector<AbilityState>> per_agent_;  // agent -> per ability idx
    std::vector<ExecutedStep> steps_;
};

// ---------------------------------------------------------------------
// C2 server + agents
// ---------------------------------------------------------------------

class C2Server;

// Implant on a (simulated) compromised host. Remote agents talk to the
// C2 over HTTP-lite through the switch; the agent local to the C2 host
// is driven directly (loopback traffic is invisible to the capture).
class Agent {
public:
    Agent(Scheduler& sched, C2Server& c2, SimHost& host, std::string id, std::string group,
          double beacon_interval_s, bool local);

    void start();
    void stop() { alive_ = false; }
    bool alive() const { return alive_; }

    const std::string& id() const { return id_; }
    const std::string& group() const { return group_; }
    SimHost& host() { return host_; }

    void push_cleanup(const std::string& command) { cleanup_stack_.push_back(command); }
    void run_cleanup();

private:
    friend class C2Server;
    void beacon();
    void handle_instruction(const Instruction& instr);
    void finish(const Instruction& instr, int exit_code, const std::string& out);
    void send_result(const ExecutedStep& step);

    Scheduler& sched_;
    C2Server& c2_;
    SimHost& host_;
    std::string id_;
    std::string group_;
    SimTime beacon_interval_;
    bool local_;
    bool alive_ = true;
    bool busy_ = false;
    std::vector<std::string> cleanup_stack_;
};

struct RedteamConfig {
    std::string abilities_dir;
    std::string phase1_adversary;
    std::string phase2;  // none | dos | extract | manipulate
    double start_delay_s = 0.0;
    double phase2_delay_s = 600.0;
    double step_interval_s = 5.0;
    double beacon_interval_s = 15.0;
    std::vector<std::string> wordlist{"123456", "admin", "password", "root"};
    std::vector<FactRule> rules;
    bool cleanup = true;
    double duration_s = 1200.0;  // used to time end-of-run cleanup
    std::string adversaries_dir;
    size_t cross_product_cap = 256;
};

// The attacker node: HTTP C2 endpoint, payload hosting, operation
// lifecycle (phase 1 at start_delay, phase 2 against group "infected"
// after phase2_delay, cleanup near scenario end).
class C2Server {
public:
    C2Server(Scheduler& sched, Network& net, SimHost& host, RedteamConfig cfg);

    void load_abilities();  // from cfg.abilities_dir
    AbilityLibrary& library() { return library_; }

    // Wire up victims so ssh/deploy effects can reach them.
    void register_host(SimHost& host);

    void start();

    // Agent-facing API (direct for the local agent, HTTP for remote).
    std::optional<Instruction> next_instruction(const std::string& agent_id,
                                                const std::string& group);
    std::optional<Instruction> take_pending(const std::string& agent_id);
    void post_result(const std::string& agent_id, const ExecutedStep& step);
    Bytes payload(const std::string& name) const;

    // Victim-side effect of the deploy channel command: fetch the agent
    // binary from the C2 over HTTP and start beaconing.
    void victim_fetch_agent(SimHost& victim);

    void finalize_operations();

    Agent* spawn_agent(SimHost& host, const std::string& group, bool local);

    const std::vector<std::unique_ptr<Operation>>& operations() const { return operations_; }
    const std::vector<std::unique_ptr<Agent>>& agents() const { return agents_; }
    SimHost& host() { return host_; }
    const RedteamConfig& config() const { return cfg_; }
    Scheduler& scheduler() { return sched_; }
    Network& network() { return net_; }

    SimHost* host_by_ip(Ipv4 ip);

    // Executors for ability commands; returns async via callback.
    void execute_on(Agent& agent, const Instruction& instr,
                    std::function<void(int, std::string)> done);

private:
    void http_accept(TcpSession& s);
    void http_data(TcpSession& s, const Bytes& payload);
    void start_phase1();
    void start_phase2();
    void start_cleanup_phase();
    Operation* operation_for(const std::string& group);

    void exec_scan(Agent& agent, const std::string& range,
                   std::function<void(int, std::string)> done);
    void exec_bruteforce(Agent& agent, Ipv4 target, std::function<void(int, std::string)> done);
    void exec_deploy(Agent& agent, Ipv4 target, std::function<void(int, std::string)> done);

    Scheduler& sched_;
    Network& net_;
    SimHost& host_;
    RedteamConfig cfg_;
    AbilityLibrary library_;
    std::map<std::string, Adversary> adversaries_;
    std::vector<std::unique_ptr<Operation>> operations_;
    std::vector<std::unique_ptr<Agent>> agents_;
    std::vector<SimHost*> victims_;
    std::map<std::string, Instruction> pending_;  // remote pickup after beacon
    struct Cred {
        std::string user, password;
    };
    std::map<Ipv4, Cred> creds_;  // learned during brute-force
    uint64_t next_agent_ = 0;
    uint64_t next_op_ = 0;
};

// Structured report for all operations of a run.
std::string operation_report_json(const std::vector<std::unique_ptr<Operation>>& ops);
void export_operation_report(const std::vector<std::unique_ptr<Operation>>& ops,
                             const std::string& path);

}  // namespace gridtrace

#endif
