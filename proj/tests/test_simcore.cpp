#include <doctest.h>

#include <vector>

#include "gridtrace/simcore.hpp"

using namespace gridtrace;

TEST_CASE("schedule on empty queue grows the queue") {
    Scheduler sched;
    sched.schedule(0, [] {});
    CHECK(sched.pending() == 1);
}

TEST_CASE("same fire_at events run in insertion order") {
    Scheduler sched;
    std::vector<int> order;
    sched.schedule(seconds(2.0), [&] { order.push_back(1); });
    sched.schedule(seconds(2.0), [&] { order.push_back(2); });
    sched.schedule(seconds(1.0), [&] { order.push_back(0); });
    sched.run_until(seconds(3.0));
    CHECK(order == std::vector<int>{0, 1, 2});
}

TEST_CASE("scheduling into the past throws") {
    Scheduler sched;
    sched.schedule(seconds(10.0), [] {});
    sched.run_until(seconds(10.0));
    CHECK(sched.now() == seconds(10.0));
    CHECK_THROWS_AS(sched.schedule(seconds(5.0), [] {}), PastEvent);
    CHECK_THROWS_AS(sched.run_until(seconds(5.0)), PastEvent);
}

TEST_CASE("run_until on empty queue advances the clock without steps") {
    Scheduler sched;
    CHECK(sched.run_until(seconds(1200.0)) == 0);
    CHECK(sched.now() == seconds(1200.0));
}

TEST_CASE("events strictly after end stay queued") {
    Scheduler sched;
    int fired = 0;
    sched.schedule(seconds(1.0), [&] { ++fired; });
    sched.schedule(seconds(2.0), [&] { ++fired; });
    sched.schedule(seconds(2.5), [&] { ++fired; });
    CHECK(sched.run_until(seconds(2.0)) == 2);
    CHECK(fired == 2);
    CHECK(sched.pending() == 1);
    CHECK(sched.run_until(seconds(3.0)) == 1);
    CHECK(fired == 3);
}

TEST_CASE("cancelled tickets never fire") {
    Scheduler sched;
    int fired = 0;
    Ticket t = sched.schedule(seconds(1.0), [&] { ++fired; });
    sched.schedule(seconds(1.0), [&] { ++fired; });
    sched.cancel(t);
    sched.run_until(seconds(2.0));
    CHECK(fired == 1);
}

TEST_CASE("handlers may schedule follow-up events within the window") {
    Scheduler sched;
    std::vector<SimTime> fired_at;
    sched.schedule(seconds(1.0), [&] {
        fired_at.push_back(sched.now());
        sched.schedule_in(seconds(1.0), [&] { fired_at.push_back(sched.now()); });
    });
    sched.run_until(seconds(5.0));
    CHECK(fired_at == std::vector<SimTime>{seconds(1.0), seconds(2.0)});
}

TEST_CASE("identical schedules replay identically") {
    auto trace = [] {
        Scheduler sched;
        std::vector<std::pair<SimTime, int>> out;
        for (int i = 0; i < 100; ++i) {
            sched.schedule(static_cast<SimTime>((i * 37) % 50) * 1000,
                           [&out, i, &sched] { out.emplace_back(sched.now(), i); });
        }
        sched.run_until(seconds(1.0));
        return out;
    };
    CHECK(trace() == trace());
}
