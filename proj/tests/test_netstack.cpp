#include <doctest.h>

#include "gridtrace/netstack.hpp"

using namespace gridtrace;

namespace {

struct TwoHosts {
    Scheduler sched;
    Network net{sched};
    Node& na;
    Node& nb;
    HostStack a;
    HostStack b;

    TwoHosts(SimTime arp_ttl = seconds(60.0))
        : na(net.add_node("a", parse_ipv4("10.0.0.1"))),
          nb(net.add_node("b", parse_ipv4("10.0.0.2"))),
          a(sched, net, na, arp_ttl),
          b(sched, net, nb, arp_ttl) {
        net.attach(na, 1);
        net.attach(nb, 2);
    }
};

size_t count_tag(const Capture& cap, ProtoTag tag) {
    size_t n = 0;
    for (const auto& e : cap)
        if (e.frame.proto_tag() == tag) ++n;
    return n;
}

}  // namespace

TEST_CASE("first contact costs 2 ARP + 3 TCP frames") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});
    bool opened = false;
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession&, bool ok) { opened = ok; });
    t.sched.run_until(seconds(1.0));
    CHECK(opened);
    CHECK(count_tag(t.net.capture(), ProtoTag::ARP) == 2);
    CHECK(count_tag(t.net.capture(), ProtoTag::IEC104) == 3);  // SYN, SYN-ACK, ACK
    CHECK(t.net.capture().size() == 5);
}

TEST_CASE("warm arp cache: handshake is 3 frames only") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [](TcpSession&, bool) {});
    t.sched.run_until(seconds(1.0));
    size_t before = t.net.capture().size();

    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [](TcpSession&, bool) {});
    t.sched.run_until(seconds(2.0));
    CHECK(t.net.capture().size() - before == 3);
    CHECK(count_tag(t.net.capture(), ProtoTag::ARP) == 2);  // unchanged
}

TEST_CASE("one message costs exactly one data frame and one ack") {
    TwoHosts t;
    Bytes got;
    t.b.listen(2404, [&](TcpSession& s) {
        s.on_data = [&](TcpSession&, const Bytes& payload) { got = payload; };
    });
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession& s, bool ok) {
        REQUIRE(ok);
        t.a.send(s, Bytes{1, 2, 3});
    });
    t.sched.run_until(seconds(1.0));
    CHECK(got == Bytes{1, 2, 3});
    // 2 ARP + 3 handshake + data + ack
    CHECK(t.net.capture().size() == 7);
}

TEST_CASE("ten messages cost twenty frames") {
    TwoHosts t;
    int received = 0;
    t.b.listen(2404, [&](TcpSession& s) {
        s.on_data = [&](TcpSession&, const Bytes&) { ++received; };
    });
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession& s, bool ok) {
        REQUIRE(ok);
        for (int i = 0; i < 10; ++i) t.a.send(s, Bytes{static_cast<uint8_t>(i)});
    });
    t.sched.run_until(seconds(2.0));
    CHECK(received == 10);
    CHECK(t.net.capture().size() == 2 + 3 + 20);
}

TEST_CASE("clean close costs 4 frames") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});
    uint64_t session = 0;
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession& s, bool ok) {
        REQUIRE(ok);
        session = s.id;
    });
    t.sched.run_until(seconds(1.0));
    size_t before = t.net.capture().size();
    t.a.close(*t.a.find_session(session));
    t.sched.run_until(seconds(2.0));
    CHECK(t.net.capture().size() - before == 4);  // FIN, ACK, FIN, ACK
    CHECK(t.a.find_session(session) == nullptr);
}

TEST_CASE("connect to a downed peer: SYN plus 2 retransmits, then failure") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});

    // Warm a's arp cache first so the SYNs actually hit the wire.
    bool pinged = false;
    t.a.ping(parse_ipv4("10.0.0.2"), [&](bool ok) { pinged = ok; });
    t.sched.run_until(seconds(1.0));
    REQUIRE(pinged);

    t.net.set_interface_up(t.nb, false);
    uint64_t drops_before = t.net.drop_count();
    bool opened = true;
    bool done = false;
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession&, bool ok) {
        opened = ok;
        done = true;
    });
    t.sched.run_until(seconds(10.0));
    CHECK(done);
    CHECK(!opened);
    // Initial SYN + kMaxRetries retransmits, all dropped at the switch.
    CHECK(t.net.drop_count() - drops_before == 1 + HostStack::kMaxRetries);
}

TEST_CASE("peer downed mid-stream: 3 data transmissions, no ack, session dead") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});
    uint64_t session = 0;
    t.a.connect(parse_ipv4("10.0.0.2"), 2404, [&](TcpSession& s, bool ok) {
        REQUIRE(ok);
        session = s.id;
    });
    t.sched.run_until(seconds(1.0));

    t.net.set_interface_up(t.nb, false);
    uint64_t drops_before = t.net.drop_count();
    bool dead = false;
    TcpSession* s = t.a.find_session(session);
    REQUIRE(s != nullptr);
    s->on_dead = [&](TcpSession&) { dead = true; };
    t.a.send(*s, Bytes{42});
    t.sched.run_until(seconds(10.0));
    CHECK(dead);
    CHECK(t.net.drop_count() - drops_before == 3);  // data + 2 retransmits
    CHECK(t.a.find_session(session) == nullptr);
}

TEST_CASE("arp probe answers for live hosts and times out for dead ones") {
    TwoHosts t;
    bool live = false, dead = true;
    t.a.arp_probe(parse_ipv4("10.0.0.2"), [&](bool ok) { live = ok; });
    t.sched.run_until(seconds(2.0));
    CHECK(live);

    t.a.arp_probe(parse_ipv4("10.0.0.99"), [&](bool ok) { dead = ok; });
    t.sched.run_until(seconds(5.0));
    CHECK(!dead);
}

TEST_CASE("ping round-trips through icmp echo") {
    TwoHosts t;
    bool ok = false;
    t.a.ping(parse_ipv4("10.0.0.2"), [&](bool v) { ok = v; });
    t.sched.run_until(seconds(1.0));
    CHECK(ok);
    // ARP pair + echo request + echo reply, all tagged OTHER except ARP.
    CHECK(count_tag(t.net.capture(), ProtoTag::OTHER) == 2);
}

TEST_CASE("send on a non-open session throws") {
    TwoHosts t;
    t.b.listen(2404, [](TcpSession&) {});
    TcpSession& s = t.a.connect(parse_ipv4("10.0.0.2"), 2404, [](TcpSession&, bool) {});
    CHECK(s.state == TcpState::Handshaking);
    CHECK_THROWS_AS(t.a.send(s, Bytes{1}), SessionClosed);
}
