#include "gridtrace/redteam.hpp"

#include <algorithm>
#include <filesystem>
#include <regex>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "gridtrace/errors.hpp"

namespace gridtrace {

namespace {

constexpr const char* kKeyName = "id_attacker";
constexpr const char* kVictimKeyPath = "/root/.ssh/id_attacker.pub";
constexpr const char* kAgentPayload = "agent.bin";
constexpr const char* kInfectedGroup = "infected";

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& binding) {
    std::string out;
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find("#{", pos);
        if (open == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        size_t close = tmpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tmpl, pos, std::string::npos);
            break;
        }
        out.append(tmpl, pos, open - pos);
        std::string trait = tmpl.substr(open + 2, close - open - 2);
        auto it = binding.find(trait);
        out += it == binding.end() ? tmpl.substr(open, close - open + 1) : it->second;
        pos = close + 1;
    }
    return out;
}

const char* status_name(StepStatus s) {
    switch (s) {
        case StepStatus::Pending: return "pending";
        case StepStatus::Running: return "running";
        case StepStatus::Done: return "done";
        case StepStatus::Failed: return "failed";
        case StepStatus::Skipped: return "skipped";
    }
    return "?";
}

}  // namespace

// ---------------------------------------------------------------------
// Glob + fact store
// ---------------------------------------------------------------------

bool glob_match(const std::string& pattern, const std::string& value) {
    size_t p = 0, v = 0, star = std::string::npos, mark = 0;
    while (v < value.size()) {
        if (p < pattern.size() && (pattern[p] == value[v])) {
            ++p, ++v;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = v;
        } else if (star != std::string::npos) {
            p = star + 1;
            v = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

bool FactStore::add(Fact fact) {
    for (const auto& f : facts_) {
        if (f.trait == fact.trait && f.value == fact.value) return false;
    }
    facts_.push_back(std::move(fact));
    return true;
}

std::vector<std::string> FactStore::values(const std::string& trait) const {
    bool has_allow = false;
    for (const auto& r : rules_) {
        if (!r.deny && r.trait == trait) has_allow = true;
    }
    std::vector<std::string> out;
    for (const auto& f : facts_) {
        if (f.trait != trait) continue;
        bool ok = !has_allow;
        for (const auto& r : rules_) {
            if (r.trait != trait || r.deny || !glob_match(r.match, f.value)) continue;
            ok = true;
            break;
        }
        for (const auto& r : rules_) {
            if (r.trait == trait && r.deny && glob_match(r.match, f.value)) ok = false;
        }
        if (ok && std::find(out.begin(), out.end(), f.value) == out.end()) out.push_back(f.value);
    }
    return out;
}

// ---------------------------------------------------------------------
// Ability / adversary loading
// ---------------------------------------------------------------------

static Ability parse_ability(const YAML::Node& doc, const std::string& where) {
    if (!doc.IsMap()) throw ParseError("ability document is not a map: " + where);
    Ability a;
    if (!doc["id"]) throw ParseError("ability missing id: " + where);
    a.id = doc["id"].as<std::string>();
    if (doc["name"]) a.name = doc["name"].as<std::string>();
    if (doc["platform"]) a.platform = doc["platform"].as<std::string>();
    if (!doc["command"]) throw ParseError("ability missing command: " + where);
    a.command = doc["command"].as<std::string>();
    if (doc["payloads"])
        for (const auto& n : doc["payloads"]) a.payloads.push_back(n.as<std::string>());
    if (doc["cleanup"])
        for (const auto& n : doc["cleanup"]) a.cleanup.push_back(n.as<std::string>());
    if (doc["requirements"])
        for (const auto& n : doc["requirements"]) a.requirements.push_back(n.as<std::string>());
    if (doc["parsers"]) {
        for (const auto& n : doc["parsers"]) {
            AbilityParserRule r;
            if (!n["regex"] || !n["trait"])
                throw ParseError("ability parser needs regex + trait: " + where);
            r.regex = n["regex"].as<std::string>();
            r.trait = n["trait"].as<std::string>();
            a.parsers.push_back(std::move(r));
        }
    }
    // Every placeholder trait must appear in requirements.
    size_t pos = 0;
    while ((pos = a.command.find("#{", pos)) != std::string::npos) {
        size_t close = a.command.find('}', pos);
        if (close == std::string::npos) break;
        std::string trait = a.command.substr(pos + 2, close - pos - 2);
        if (std::find(a.requirements.begin(), a.requirements.end(), trait) ==
            a.requirements.end())
            throw ParseError("placeholder " + trait + " not in requirements: " + where);
        pos = close + 1;
    }
    return a;
}

void AbilityLibrary::add(Ability ability) {
    if (abilities_.count(ability.id)) throw DuplicateId("duplicate ability id: " + ability.id);
    abilities_.emplace(ability.id, std::move(ability));
}

void AbilityLibrary::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        if (ext == ".yml" || ext == ".yaml") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        YAML::Node doc;
        try {
            doc = YAML::LoadFile(p);
        } catch (const YAML::Exception& ex) {
            throw ParseError("bad yaml in " + p + ": " + ex.what());
        }
        add(parse_ability(doc, p));
    }
}

const Ability* AbilityLibrary::find(const std::string& id) const {
    auto it = abilities_.find(id);
    return it == abilities_.end() ? nullptr : &it->second;
}

Adversary load_adversary_file(const std::string& path) {
    YAML::Node doc;
    try {
        doc = YAML::LoadFile(path);
    } catch (const YAML::Exception& ex) {
        throw ParseError("bad yaml in " + path + ": " + ex.what());
    }
    Adversary adv;
    if (!doc["id"]) throw ParseError("adversary missing id: " + path);
    adv.id = doc["id"].as<std::string>();
    if (doc["name"]) adv.name = doc["name"].as<std::string>();
    if (!doc["abilities"] || !doc["abilities"].IsSequence())
        throw ParseError("adversary missing abilities list: " + path);
    for (const auto& n : doc["abilities"]) adv.ability_ids.push_back(n.as<std::string>());
    return adv;
}

// ---------------------------------------------------------------------
// Operation / atomic planner
// ---------------------------------------------------------------------

Operation::Operation(std::string id, const AbilityLibrary& library, Adversary adversary,
                     std::string agent_group, FactStore facts, size_t cross_product_cap)
    : id_(std::move(id)), library_(library), adversary_(std::move(adversary)),
      group_(std::move(agent_group)), facts_(std::move(facts)), cap_(cross_product_cap) {
    for (const auto& aid : adversary_.ability_ids) {
        if (!library_.find(aid)) throw UnknownComponent("adversary references unknown ability: " + aid);
    }
}

void Operation::register_agent(const std::string& agent_id) {
    auto [it, inserted] = per_agent_.try_emplace(agent_id);
    if (inserted) it->second.resize(adversary_.ability_ids.size());
}

bool Operation::requirements_satisfied(const Ability& ability) const {
    for (const auto& trait : ability.requirements) {
        if (facts_.values(trait).empty()) return false;
    }
    return true;
}

bool Operation::producible(const std::string& trait, const std::string& agent_id,
                           size_t before_idx) const {
    const auto& states = per_agent_.at(agent_id);
    for (size_t j = 0; j < before_idx; ++j) {
        StepStatus st = states[j].status;
        if (st != StepStatus::Pending && st != StepStatus::Running) continue;
        const Ability* a = library_.find(adversary_.ability_ids[j]);
        for (const auto& p : a->parsers) {
            if (p.trait == trait) return true;
        }
    }
    return false;
}

void Operation::expand(const Ability& ability, AbilityState& state) {
    std::vector<std::vector<std::string>> lists;
    for (const auto& trait : ability.requirements) lists.push_back(facts_.values(trait));

    std::vector<size_t> odo(lists.size(), 0);
    size_t produced = 0;
    bool exhausted = lists.empty();
    do {
        if (produced++ >= cap_) break;
        std::map<std::string, std::string> binding;
        for (size_t k = 0; k < lists.size(); ++k) binding[ability.requirements[k]] = lists[k][odo[k]];
        std::string cmd = render_template(ability.command, binding);
        if (state.seen_commands.insert(cmd).second) {
            Instruction instr;
            instr.ability_id = ability.id;
            instr.command = cmd;
            instr.payloads = ability.payloads;
            for (const auto& c : ability.cleanup) instr.cleanup.push_back(render_template(c, binding));
            state.queued.push_back(std::move(instr));
        }
        // advance odometer
        size_t k = 0;
        for (; k < lists.size(); ++k) {
            if (++odo[k] < lists[k].size()) break;
            odo[k] = 0;
        }
        if (k == lists.size()) exhausted = true;
    } while (!exhausted);

    if (lists.empty()) {
        // no requirements: single literal instruction (added above once)
    }
}

std::optional<Instruction> Operation::plan_next(const std::string& agent_id) {
    register_agent(agent_id);
    if (finished()) throw OperationFinished("operation " + id_ + " finished");
    auto& states = per_agent_.at(agent_id);

    for (size_t i = 0; i < states.size(); ++i) {
        AbilityState& st = states[i];
        if (st.status == StepStatus::Done || st.status == StepStatus::Failed ||
            st.status == StepStatus::Skipped)
            continue;
        if (st.status == StepStatus::Running) {
            if (!st.queued.empty()) {
                Instruction instr = std::move(st.queued.front());
                st.queued.pop_front();
                ++st.issued;
                return instr;
            }
            return std::nullopt;  // results still in flight
        }
        const Ability& ability = *library_.find(adversary_.ability_ids[i]);
        if (requirements_satisfied(ability)) {
            expand(ability, st);
            if (st.queued.empty()) {
                st.status = StepStatus::Done;  // nothing concrete to run
                continue;
            }
            st.status = StepStatus::Running;
            Instruction instr = std::move(st.queued.front());
            st.queued.pop_front();
            ++st.issued;
            return instr;
        }
        // Unsatisfied: wait while an earlier pending/running ability could
        // still produce every missing trait; dead ends get skipped.
        bool waitable = true;
        for (const auto& trait : ability.requirements) {
            if (!facts_.values(trait).empty()) continue;
            if (!producible(trait, agent_id, i)) {
                waitable = false;
                break;
            }
        }
        if (!waitable) st.status = StepStatus::Skipped;
        // Either way, scan on: a later satisfiable ability may run first.
    }
    return std::nullopt;
}

void Operation::record_result(const std::string& agent_id, const ExecutedStep& raw) {
    register_agent(agent_id);
    auto& states = per_agent_.at(agent_id);
    ExecutedStep step = raw;

    for (size_t i = 0; i < states.size(); ++i) {
        if (adversary_.ability_ids[i] != step.ability_id) continue;
        AbilityState& st = states[i];
        if (st.status != StepStatus::Running) continue;

        const Ability& ability = *library_.find(step.ability_id);
        if (step.exit_code == 0) {
            std::istringstream lines(step.stdout_text);
            std::string line;
            while (std::getline(lines, line)) {
                for (const auto& p : ability.parsers) {
                    std::smatch m;
                    if (std::regex_search(line, m, std::regex(p.regex)) && m.size() > 1) {
                        if (facts_.add(Fact{p.trait, m[1].str(), agent_id}))
                            step.facts_produced.push_back(p.trait + "=" + m[1].str());
                    }
                }
            }
        }
        ++st.completed;
        if (step.exit_code == 0) ++st.succeeded;
        if (st.queued.empty() && st.completed == st.issued)
            st.status = st.succeeded > 0 ? StepStatus::Done : StepStatus::Failed;
        break;
    }
    steps_.push_back(std::move(step));
}

bool Operation::finished() const {
    for (const auto& [agent, states] : per_agent_) {
        for (const auto& st : states) {
            if (st.status == StepStatus::Pending || st.status == StepStatus::Running) return false;
        }
    }
    return !per_agent_.empty();
}

void Operation::finalize() {
    for (auto& [agent, states] : per_agent_) {
        for (auto& st : states) {
            if (st.status == StepStatus::Pending) st.status = StepStatus::Skipped;
            if (st.status == StepStatus::Running && st.completed == st.issued)
                st.status = StepStatus::Skipped;  // expanded but never finished
        }
    }
}

StepStatus Operation::status(const std::string& agent_id, const std::string& ability_id) const {
    auto it = per_agent_.find(agent_id);
    if (it == per_agent_.end()) return StepStatus::Pending;
    for (size_t i = 0; i < adversary_.ability_ids.size(); ++i) {
        if (adversary_.ability_ids[i] == ability_id) return it->second[i].status;
    }
    return StepStatus::Pending;
}

// ---------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------

Agent::Agent(Scheduler& sched, C2Server& c2, SimHost& host, std::string id, std::string group,
             double beacon_interval_s, bool local)
    : sched_(sched), c2_(c2), host_(host), id_(std::move(id)), group_(std::move(group)),
      beacon_interval_(seconds(beacon_interval_s)), local_(local) {}

void Agent::start() {
    // Remote beacons land on a shared absolute grid (plus a small offset
    // keeping them clear of the grid-step instant); the local agent just
    // polls at its own cadence.
    SimTime first;
    if (local_) {
        first = sched_.now();
    } else {
        SimTime k = sched_.now() / beacon_interval_ + 1;
        first = k * beacon_interval_ + kMicrosPerSec / 2;
    }
    sched_.schedule(first, [this] { beacon(); });
}

void Agent::run_cleanup() {
    for (auto it = cleanup_stack_.rbegin(); it != cleanup_stack_.rend(); ++it) {
        auto toks = split_ws(*it);
        if (toks.size() == 2 && (toks[0] == "rm" || toks[0] == "/bin/rm"))
            host_.remove_file(toks[1]);
    }
    cleanup_stack_.clear();
}

void Agent::beacon() {
    if (!alive_) return;
    sched_.schedule_in(beacon_interval_, [this] { beacon(); });
    if (!host_.stack().up() || busy_) return;

    if (local_) {
        auto instr = c2_.next_instruction(id_, group_);
        if (instr) handle_instruction(*instr);
        return;
    }

    host_.stack().connect(c2_.host().stack().ip(), kPortC2Http, [this](TcpSession& s, bool ok) {
        if (!ok) return;
        s.on_data = [this](TcpSession& ses, const Bytes& payload) {
            C2Message resp;
            try {
                resp = decode_c2(payload);
            } catch (const MalformedMessage&) {
                host_.stack().close(ses);
                return;
            }
            host_.stack().close(ses);
            if (resp.kind == C2Kind::Instruction && !resp.ability_id.empty()) {
                auto instr = c2_.take_pending(id_);
                if (instr) handle_instruction(*instr);
            }
        };
        C2Message b;
        b.kind = C2Kind::Beacon;
        b.agent_id = id_;
        b.group = group_;
        host_.stack().send(s, encode(b));
    });
}

void Agent::handle_instruction(const Instruction& instr) {
    busy_ = true;
    auto run = [this, instr] {
        c2_.execute_on(*this, instr,
                       [this, instr](int code, std::string out) { finish(instr, code, out); });
    };

    if (instr.payloads.empty()) {
        run();
        return;
    }
    // Fetch payloads first; remote agents pull them over HTTP.
    auto fetch = std::make_shared<std::function<void(size_t)>>();
    *fetch = [this, instr, run, fetch](size_t idx) {
        if (idx >= instr.payloads.size()) {
            run();
            return;
        }
        const std::string& name = instr.payloads[idx];
        auto store = [this, name, fetch, idx](const Bytes& data) {
            host_.write_file(name, static_cast<uint64_t>(data.size()));
            push_cleanup("rm " + name);
            (*fetch)(idx + 1);
        };
        if (local_) {
            store(c2_.payload(name));
            return;
        }
        host_.stack().connect(c2_.host().stack().ip(), kPortC2Http,
                              [this, name, store](TcpSession& s, bool ok) {
                                  if (!ok) return;  // stalls the instruction; host likely dead
                                  s.on_data = [this, store](TcpSession& ses, const Bytes& pl) {
                                      C2Message resp;
                                      try {
                                          resp = decode_c2(pl);
                                      } catch (const MalformedMessage&) {
                                          host_.stack().close(ses);
                                          return;
                                      }
                                      host_.stack().close(ses);
                                      if (resp.kind == C2Kind::PayloadData) store(resp.payload_data);
                                  };
                                  C2Message req;
                                  req.kind = C2Kind::PayloadRequest;
                                  req.agent_id = id_;
                                  req.payload_name = name;
                                  host_.stack().send(s, encode(req));
                              });
    };
    (*fetch)(0);
}

void Agent::finish(const Instruction& instr, int exit_code, const std::string& out) {
    if (exit_code == 0) {
        for (const auto& c : instr.cleanup) push_cleanup(c);
    }
    ExecutedStep step;
    step.ts = sched_.now();
    step.agent_id = id_;
    step.ability_id = instr.ability_id;
    step.command = instr.command;
    step.stdout_text = out;
    step.exit_code = exit_code;
    send_result(step);
}

void Agent::send_result(const ExecutedStep& step) {
    if (local_) {
        c2_.post_result(id_, step);
        busy_ = false;
        return;
    }
    if (!host_.stack().up()) {  // e.g. self-inflicted outage
        busy_ = false;
        return;
    }
    host_.stack().connect(c2_.host().stack().ip(), kPortC2Http, [this, step](TcpSession& s, bool ok) {
        if (!ok) {
            busy_ = false;
            return;
        }
        s.on_data = [this](TcpSession& ses, const Bytes&) {
            host_.stack().close(ses);
            busy_ = false;
        };
        C2Message r;
        r.kind = C2Kind::Result;
        r.agent_id = id_;
        r.ability_id = step.ability_id;
        r.command = step.command;
        r.stdout_text = step.stdout_text;
        r.exit_code = step.exit_code;
        host_.stack().send(s, encode(r));
    });
}

// ---------------------------------------------------------------------
// C2 server
// ---------------------------------------------------------------------

C2Server::C2Server(Scheduler& sched, Network& net, SimHost& host, RedteamConfig cfg)
    : sched_(sched), net_(net), host_(host), cfg_(std::move(cfg)) {}

void C2Server::load_abilities() {
    library_.load_dir(cfg_.abilities_dir);
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(cfg_.adversaries_dir)) {
        auto ext = e.path().extension().string();
        if (ext == ".yml" || ext == ".yaml") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        Adversary adv = load_adversary_file(p);
        if (adversaries_.count(adv.id)) throw DuplicateId("duplicate adversary id: " + adv.id);
        adversaries_.emplace(adv.id, std::move(adv));
    }
}

void C2Server::register_host(SimHost& victim) {
    victims_.push_back(&victim);
    victim.shell = [this, &victim](const std::string& cmd) -> std::string {
        auto toks = split_ws(cmd);
        if (toks.empty()) return "";
        if (toks[0] == "install-key" && toks.size() == 2) {
            victim.write_file(std::string("/root/.ssh/") + toks[1] + ".pub", "ssh-ed25519 attacker");
            return "ok";
        }
        if (toks[0] == "fetch-agent") {
            victim_fetch_agent(victim);
            return "ok";
        }
        if (toks[0] == "rm" && toks.size() == 2) {
            return victim.remove_file(toks[1]) ? "ok" : "no such file";
        }
        return "";
    };
}

SimHost* C2Server::host_by_ip(Ipv4 ip) {
    for (auto* v : victims_) {
        if (v->stack().ip() == ip) return v;
    }
    return host_.stack().ip() == ip ? &host_ : nullptr;
}

void C2Server::start() {
    host_.stack().listen(kPortC2Http, [this](TcpSession& s) { http_accept(s); });
    sched_.schedule(seconds(cfg_.start_delay_s), [this] { start_phase1(); });
    if (cfg_.phase2 != "none" && !cfg_.phase2.empty()) {
        sched_.schedule(seconds(cfg_.start_delay_s + cfg_.phase2_delay_s), [this] { start_phase2(); });
    }
    if (cfg_.cleanup && cfg_.phase2 != "dos") {
        double at = cfg_.duration_s - cfg_.beacon_interval_s - 5.0;
        if (at > cfg_.start_delay_s) sched_.schedule(seconds(at), [this] { start_cleanup_phase(); });
    }
}

Agent* C2Server::spawn_agent(SimHost& agent_host, const std::string& group, bool local) {
    std::string id = "agent-" + std::to_string(next_agent_++);
    agents_.push_back(std::make_unique<Agent>(sched_, *this, agent_host, id, group,
                                              local ? cfg_.step_interval_s : cfg_.beacon_interval_s,
                                              local));
    return agents_.back().get();
}

void C2Server::start_phase1() {
    auto it = adversaries_.find(cfg_.phase1_adversary);
    if (it == adversaries_.end())
        throw UnknownComponent("unknown adversary: " + cfg_.phase1_adversary);
    FactStore facts;
    for (const auto& r : cfg_.rules) facts.add_rule(r);
    operations_.push_back(std::make_unique<Operation>(
        "op-" + std::to_string(next_op_++), library_, it->second, "red", std::move(facts),
        cfg_.cross_product_cap));
    Agent* a = spawn_agent(host_, "red", true);
    operations_.back()->register_agent(a->id());
    a->start();
}

void C2Server::start_phase2() {
    auto it = adversaries_.find(cfg_.phase2);
    if (it == adversaries_.end()) throw UnknownComponent("unknown adversary: " + cfg_.phase2);
    FactStore facts;
    for (const auto& r : cfg_.rules) facts.add_rule(r);
    operations_.push_back(std::make_unique<Operation>(
        "op-" + std::to_string(next_op_++), library_, it->second, kInfectedGroup, std::move(facts),
        cfg_.cross_product_cap));
    for (const auto& a : agents_) {
        if (a->group() == kInfectedGroup && a->alive()) operations_.back()->register_agent(a->id());
    }
}

void C2Server::start_cleanup_phase() {
    auto it = adversaries_.find("cleanup");
    if (it == adversaries_.end()) return;  // ability set shipped without cleanup stage
    bool any = false;
    for (const auto& a : agents_) {
        if (a->group() == kInfectedGroup && a->alive()) any = true;
    }
    if (!any) return;
    FactStore facts;
    // Absolute firing time: late enough that no further control-loop
    // command lands inside the exported window.
    SimTime at = seconds(cfg_.duration_s) - 800000;
    facts.add(Fact{"cleanup.at", std::to_string(at), "seed"});
    operations_.push_back(std::make_unique<Operation>(
        "op-" + std::to_string(next_op_++), library_, it->second, kInfectedGroup, std::move(facts),
        cfg_.cross_product_cap));
    for (const auto& a : agents_) {
        if (a->group() == kInfectedGroup && a->alive()) operations_.back()->register_agent(a->id());
    }
}

std::optional<Instruction> C2Server::next_instruction(const std::string& agent_id,
                                                      const std::string& group) {
    for (auto rit = operations_.rbegin(); rit != operations_.rend(); ++rit) {
        Operation& op = **rit;
        if (op.group() != group) continue;
        try {
            auto instr = op.plan_next(agent_id);
            if (instr) return instr;
        } catch (const OperationFinished&) {
            continue;
        }
    }
    return std::nullopt;
}

std::optional<Instruction> C2Server::take_pending(const std::string& agent_id) {
    auto it = pending_.find(agent_id);
    if (it == pending_.end()) return std::nullopt;
    Instruction instr = std::move(it->second);
    pending_.erase(it);
    return instr;
}

void C2Server::post_result(const std::string& agent_id, const ExecutedStep& step) {
    for (auto rit = operations_.rbegin(); rit != operations_.rend(); ++rit) {
        Operation& op = **rit;
        if (op.status(agent_id, step.ability_id) == StepStatus::Running) {
            op.record_result(agent_id, step);
            return;
        }
    }
}

Bytes C2Server::payload(const std::string& name) const {
    size_t size = name == kAgentPayload ? 4096 : 1024;
    Bytes out(size);
    for (size_t i = 0; i < size; ++i) out[i] = static_cast<uint8_t>(name[i % name.size()]);
    return out;
}

void C2Server::finalize_operations() {
    for (auto& op : operations_) op->finalize();
}

void C2Server::http_accept(TcpSession& s) {
    s.on_data = [this](TcpSession& ses, const Bytes& payload) { http_data(ses, payload); };
}

void C2Server::http_data(TcpSession& s, const Bytes& payload) {
    C2Message msg;
    try {
        msg = decode_c2(payload);
    } catch (const MalformedMessage&) {
        return;
    }
    switch (msg.kind) {
        case C2Kind::Beacon: {
            C2Message resp;
            resp.kind = C2Kind::Instruction;
            auto instr = next_instruction(msg.agent_id, msg.group);
            if (instr) {
                resp.ability_id = instr->ability_id;
                resp.command = instr->command;
                pending_[msg.agent_id] = *instr;
            }
            host_.stack().send(s, encode(resp));
            break;
        }
        case C2Kind::Result: {
            ExecutedStep step;
            step.ts = sched_.now();
            step.agent_id = msg.agent_id;
            step.ability_id = msg.ability_id;
            step.command = msg.command;
            step.stdout_text = msg.stdout_text;
            step.exit_code = msg.exit_code;
            post_result(msg.agent_id, step);
            C2Message resp;
            resp.kind = C2Kind::Instruction;  // empty ack
            host_.stack().send(s, encode(resp));
            break;
        }
        case C2Kind::PayloadRequest: {
            C2Message resp;
            resp.kind = C2Kind::PayloadData;
            resp.payload_name = msg.payload_name;
            resp.payload_data = this->payload(msg.payload_name);
            host_.stack().send(s, encode(resp));
            break;
        }
        default:
            break;
    }
}

void C2Server::victim_fetch_agent(SimHost& victim) {
    victim.stack().connect(host_.stack().ip(), kPortC2Http, [this, &victim](TcpSession& s, bool ok) {
        if (!ok) return;
        s.on_data = [this, &victim](TcpSession& ses, const Bytes& pl) {
            C2Message resp;
            try {
                resp = decode_c2(pl);
            } catch (const MalformedMessage&) {
                victim.stack().close(ses);
                return;
            }
            victim.stack().close(ses);
            if (resp.kind != C2Kind::PayloadData) return;
            victim.write_file(kAgentPayload, static_cast<uint64_t>(resp.payload_data.size()));
            Agent* a = spawn_agent(victim, kInfectedGroup, false);
            a->push_cleanup(std::string("rm ") + kAgentPayload);
            a->push_cleanup(std::string("rm ") + kVictimKeyPath);
            a->start();
        };
        C2Message req;
        req.kind = C2Kind::PayloadRequest;
        req.payload_name = kAgentPayload;
        victim.stack().send(s, encode(req));
    });
}

// ---------------------------------------------------------------------
// Ability executors
// ---------------------------------------------------------------------

void C2Server::exec_scan(Agent& agent, const std::string& range,
                         std::function<void(int, std::string)> done) {
    auto toks = split_ws(range);
    std::string cidr = toks.empty() ? "" : toks[0];
    size_t slash = cidr.find('/');
    if (slash == std::string::npos || cidr.substr(slash + 1) != "24") {
        done(1, "unsupported range " + cidr);
        return;
    }
    Ipv4 base;
    try {
        base = parse_ipv4(cidr.substr(0, slash)) & 0xffffff00u;
    } catch (const ParseError&) {
        done(1, "bad range " + cidr);
        return;
    }

    struct Sweep {
        std::set<Ipv4> found;
        int remaining = 0;
    };
    auto sw = std::make_shared<Sweep>();
    HostStack& stack = agent.host().stack();
    Ipv4 self = stack.ip();

    auto finish_one = [sw, done] {
        if (--sw->remaining > 0) return;
        std::ostringstream out;
        for (Ipv4 ip : sw->found) out << "host " << format_ipv4(ip) << "\n";
        done(0, out.str());
    };

    int idx = 0;
    for (uint32_t h = 1; h <= 254; ++h) {
        Ipv4 ip = base | h;
        if (ip == self) continue;
        ++sw->remaining;
        // Staggered sweep: one probe every 10 ms.
        sched_.schedule_in(10000ull * idx++, [&stack, ip, sw, finish_one] {
            stack.arp_probe(ip, [&stack, ip, sw, finish_one](bool alive) {
                if (!alive) {
                    finish_one();
                    return;
                }
                stack.ping(ip, [ip, sw, finish_one](bool replied) {
                    if (replied) sw->found.insert(ip);
                    finish_one();
                });
            });
        });
    }
    if (sw->remaining == 0) done(0, "");
}

namespace {

// SSH-lite client driving handshake, auth attempts, and one channel
// command; used for both brute-force and agent deployment.
struct SshClient {
    HostStack& stack;
    Ipv4 target;
    std::string user;
    std::vector<std::string> passwords;
    std::string channel_command;  // run after successful auth, if any
    std::function<void(bool authed, size_t password_idx, std::string reply)> done;

    size_t idx = 0;
    bool completed = false;
    uint64_t session = 0;

    void run() {
        stack.connect(target, kPortSsh, [this](TcpSession& s, bool ok) {
            if (!ok) {
                finish(false, "");
                return;
            }
            session = s.id;
            s.on_data = [this](TcpSession& ses, const Bytes& pl) { data(ses, pl); };
            s.on_dead = [this](TcpSession&) {
                if (!completed) finish(false, "");
            };
            SshEvent hs;
            hs.kind = SshKind::Handshake;
            hs.stage = 0;
            stack.send(s, encode(hs));
        });
    }

    void data(TcpSession& s, const Bytes& pl) {
        SshEvent ev;
        try {
            ev = decode_ssh(pl);
        } catch (const MalformedMessage&) {
            return;
        }
        switch (ev.kind) {
            case SshKind::Handshake:
                if (ev.stage == 1) {
                    SshEvent hs;
                    hs.kind = SshKind::Handshake;
                    hs.stage = 2;
                    stack.send(s, encode(hs));
                } else if (ev.stage == 3) {
                    attempt(s);
                }
                break;
            case SshKind::AuthResult:
                if (ev.success) {
                    if (channel_command.empty()) {
                        stack.close(s);
                        finish(true, "");
                    } else {
                        SshEvent ch;
                        ch.kind = SshKind::ChannelData;
                        ch.data.assign(channel_command.begin(), channel_command.end());
                        stack.send(s, encode(ch));
                    }
                } else {
                    ++idx;
                    if (idx < passwords.size()) {
                        attempt(s);
                    } else {
                        stack.close(s);
                        finish(false, "");
                    }
                }
                break;
            case SshKind::ChannelData: {
                std::string reply(ev.data.begin(), ev.data.end());
                stack.close(s);
                finish(true, reply);
                break;
            }
            default:
                break;
        }
    }

    void attempt(TcpSession& s) {
        SshEvent a;
        a.kind = SshKind::AuthAttempt;
        a.user = user;
        a.password = passwords[idx];
        stack.send(s, encode(a));
    }

    void finish(bool ok, const std::string& reply) {
        if (completed) return;
        completed = true;
        auto cb = std::move(done);
        size_t i = idx;
        cb(ok, i, reply);
    }
};

}  // namespace

void C2Server::exec_bruteforce(Agent& agent, Ipv4 target,
                               std::function<void(int, std::string)> done) {
    auto cli = std::make_shared<SshClient>(SshClient{agent.host().stack(), target, "root",
                                                     cfg_.wordlist,
                                                     std::string("install-key ") + kKeyName,
                                                     nullptr});
    cli->done = [this, cli, target, done](bool ok, size_t idx, const std::string&) {
        if (!ok) {
            done(1, "");
            return;
        }
        creds_[target] = Cred{"root", cfg_.wordlist[idx]};
        done(0, "compromised " + format_ipv4(target) + "\n");
    };
    cli->run();
}

void C2Server::exec_deploy(Agent& agent, Ipv4 target,
                           std::function<void(int, std::string)> done) {
    auto cred = creds_.find(target);
    if (cred == creds_.end()) {
        done(1, "no credentials for " + format_ipv4(target));
        return;
    }
    std::string cmd = std::string("fetch-agent ") + format_ipv4(host_.stack().ip()) + " " +
                      kAgentPayload + " " + kInfectedGroup;
    auto cli = std::make_shared<SshClient>(SshClient{
        agent.host().stack(), target, cred->second.user,
        std::vector<std::string>{cred->second.password}, cmd, nullptr});
    cli->done = [cli, target, done](bool ok, size_t, const std::string&) {
        if (!ok) {
            done(1, "");
            return;
        }
        done(0, "deployed " + format_ipv4(target) + "\n");
    };
    cli->run();
}

void C2Server::execute_on(Agent& agent, const Instruction& instr,
                          std::function<void(int, std::string)> done) {
    auto toks = split_ws(instr.command);
    if (toks.empty()) {
        done(127, "");
        return;
    }
    SimHost& h = agent.host();
    const std::string& verb = toks[0];

    if (verb == "hostname") {
        done(0, h.hostname() + "\n");
    } else if (verb == "ifconfig") {
        Ipv4 ip = h.stack().ip();
        std::ostringstream out;
        out << "inet " << format_ipv4(ip) << "\n"
            << "range " << format_ipv4(ip & 0xffffff00u) << "/24\n";
        done(0, out.str());
    } else if (verb == "scan" && toks.size() == 2) {
        exec_scan(agent, toks[1], std::move(done));
    } else if (verb == "keygen" && toks.size() == 2) {
        h.write_file("/root/.ssh/" + toks[1], "ed25519 private key");
        done(0, "key " + toks[1] + "\n");
    } else if (verb == "rmkey" && toks.size() == 2) {
        bool existed = h.remove_file("/root/.ssh/" + toks[1]);
        done(existed ? 0 : 1, existed ? "removed " + toks[1] + "\n" : "");
    } else if (verb == "bruteforce" && toks.size() == 2) {
        Ipv4 target;
        try {
            target = parse_ipv4(toks[1]);
        } catch (const ParseError&) {
            done(1, "bad target");
            return;
        }
        exec_bruteforce(agent, target, std::move(done));
    } else if (verb == "deploy" && toks.size() == 2) {
        Ipv4 target;
        try {
            target = parse_ipv4(toks[1]);
        } catch (const ParseError&) {
            done(1, "bad target");
            return;
        }
        exec_deploy(agent, target, std::move(done));
    } else if (verb == "dos") {
        // Result goes out first; the interface drops moments later.
        Agent* ap = &agent;
        sched_.schedule_in(300000, [this, ap] {
            ap->run_cleanup();
            net_.set_interface_up(ap->host().node(), false);
            ap->stop();
        });
        done(0, "interface disabled\n");
    } else if (verb == "extract") {
        done(0, h.list_files());
    } else if (verb == "manipulate" && toks.size() == 3) {
        h.write_file(h.update_dir + "/" + toks[1], toks[2]);
        done(0, "override " + toks[1] + "\n");
    } else if (verb == "cleanup" && toks.size() == 2 && toks[1][0] == '@') {
        SimTime at = 0;
        try {
            at = std::stoull(toks[1].substr(1));
        } catch (const std::exception&) {
            done(1, "bad schedule");
            return;
        }
        Agent* ap = &agent;
        SimTime delay = at > sched_.now() ? at - sched_.now() : 0;
        sched_.schedule_in(delay, [ap] {
            if (ap->alive()) ap->run_cleanup();
        });
        done(0, "cleanup scheduled\n");
    } else if (verb == "rm" && toks.size() == 2) {
        done(h.remove_file(toks[1]) ? 0 : 1, "");
    } else {
        done(127, "unknown command: " + verb);
    }
}

// ---------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------

std::string operation_report_json(const std::vector<std::unique_ptr<Operation>>& ops) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["operations"] = nlohmann::ordered_json::array();
    for (const auto& op : ops) {
        op->finalize();
        nlohmann::ordered_json o;
        o["id"] = op->id();
        o["adversary"] = {{"id", op->adversary().id}, {"name", op->adversary().name}};
        o["group"] = op->group();
        o["steps"] = nlohmann::ordered_json::array();
        for (const auto& s : op->steps()) {
            nlohmann::ordered_json j;
            j["ts_us"] = s.ts;
            j["agent"] = s.agent_id;
            j["ability_id"] = s.ability_id;
            j["command"] = s.command;
            j["stdout"] = s.stdout_text;
            j["exit_code"] = s.exit_code;
            j["facts_produced"] = s.facts_produced;
            o["steps"].push_back(std::move(j));
        }
        std::set<std::string> agents;
        for (const auto& s : op->steps()) agents.insert(s.agent_id);
        o["statuses"] = nlohmann::ordered_json::array();
        for (const auto& agent : agents) {
            for (const auto& aid : op->adversary().ability_ids) {
                o["statuses"].push_back({{"agent", agent},
                                         {"ability_id", aid},
                                         {"status", status_name(op->status(agent, aid))}});
            }
        }
        o["facts"] = nlohmann::ordered_json::array();
        for (const auto& f : op->facts().all()) {
            o["facts"].push_back({{"trait", f.trait}, {"value", f.value}, {"origin", f.origin}});
        }
        doc["operations"].push_back(std::move(o));
    }
    return doc.dump(2) + "\n";
}

void export_operation_report(const std::vector<std::unique_ptr<Operation>>& ops,
                             const std::string& path) {
    std::string text = operation_report_json(ops);
    FILE* f = fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    fwrite(text.data(), 1, text.size(), f);
    if (fclose(f) != 0) throw IoError("write failed: " + path);
}

}  // namespace gridtrace
