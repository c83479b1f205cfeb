#ifndef GRIDTRACE_SIMCORE_HPP
#define GRIDTRACE_SIMCORE_HPP

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "gridtrace/errors.hpp"

namespace gridtrace {

// Simulation time in microseconds since scenario start.
using SimTime = uint64_t;

constexpr SimTime kMicrosPerSec = 1000000;

inline SimTime seconds(double s) { return static_cast<SimTime>(s * 1e6 + 0.5); }

using Ticket = uint64_t;

// Single-threaded discrete-event kernel. Events fire in (fire_at, seq)
// order; seq is the insertion counter, so same-time events run in the
// order they were scheduled. That stable order is what makes whole
// scenario runs reproducible.
class Scheduler {
public:
    Ticket schedule(SimTime fire_at, std::function<void()> action) {
        if (fire_at < now_) throw PastEvent("schedule: fire_at is in the past");
        Ticket t = ++next_seq_;
        queue_.push(Item{fire_at, t, std::move(action)});
        return t;
    }

    Ticket schedule_in(SimTime delay, std::function<void()> action) {
        return schedule(now_ + delay, std::move(action));
    }

    // Cancelled tickets never fire. Lazy removal: the queue entry stays
    // but is discarded when popped.
    void cancel(Ticket t) { cancelled_.insert(t); }

    // Process all events with fire_at <= end; clock ends at end.
    uint64_t run_until(SimTime end) {
        if (end < now_) throw PastEvent("run_until: end before current clock");
        uint64_t steps = 0;
        while (!queue_.empty() && queue_.top().fire_at <= end) {
            Item item = queue_.top();
            queue_.pop();
            if (auto it = cancelled_.find(item.seq); it != cancelled_.end()) {
                cancelled_.erase(it);
                continue;
            }
            now_ = item.fire_at;
            item.action();
            ++steps;
        }
        now_ = end;
        return steps;
    }

    SimTime now() const { return now_; }
    size_t pending() const { return queue_.size(); }

private:
    struct Item {
        SimTime fire_at;
        Ticket seq;
        std::function<void()> action;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Item, std::vector<Item>, Later> queue_;
    std::unordered_set<Ticket> cancelled_;
    SimTime now_ = 0;
    uint64_t next_seq_ = 0;
};

}  // namespace gridtrace

#endif
