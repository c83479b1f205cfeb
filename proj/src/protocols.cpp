#include "gridtrace/protocols.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "gridtrace/errors.hpp"

namespace gridtrace {

namespace {

void put32be(Bytes& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v >> 24));
    b.push_back(static_cast<uint8_t>(v >> 16));
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v));
}

uint32_t get32be(const Bytes& b, size_t off) {
    return static_cast<uint32_t>(b[off]) << 24 | static_cast<uint32_t>(b[off + 1]) << 16 |
           static_cast<uint32_t>(b[off + 2]) << 8 | b[off + 3];
}

void put_f64(Bytes& b, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put32be(b, static_cast<uint32_t>(bits >> 32));
    put32be(b, static_cast<uint32_t>(bits & 0xffffffffu));
}

double get_f64(const Bytes& b, size_t off) {
    uint64_t bits = static_cast<uint64_t>(get32be(b, off)) << 32 | get32be(b, off + 4);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_str(Bytes& b, const std::string& s) {
    if (s.size() > 0xffff) throw MalformedMessage("string field too long");
    b.push_back(static_cast<uint8_t>(s.size() >> 8));
    b.push_back(static_cast<uint8_t>(s.size() & 0xff));
    b.insert(b.end(), s.begin(), s.end());
}

std::string get_str(const Bytes& b, size_t& off) {
    if (off + 2 > b.size()) throw MalformedMessage("truncated string field");
    size_t len = static_cast<size_t>(b[off]) << 8 | b[off + 1];
    off += 2;
    if (off + len > b.size()) throw MalformedMessage("truncated string field");
    std::string s(b.begin() + off, b.begin() + off + len);
    off += len;
    return s;
}

}  // namespace

Bytes encode(const Iec104Message& msg) {
    Bytes b;
    b.push_back(0x68);
    bool has_value = msg.kind != Iec104Kind::Ack;
    b.push_back(static_cast<uint8_t>(has_value ? 22 : 14));  // bytes after the length field
    b.push_back(static_cast<uint8_t>(msg.kind));
    b.push_back(msg.cot);
    put32be(b, msg.ioa);
    b.insert(b.end(), 8, 0x00);
    if (has_value) {
        if (!std::isfinite(msg.value_kw)) throw MalformedMessage("iec104 value must be finite");
        put_f64(b, msg.value_kw);
    }
    return b;
}

Iec104Message decode_iec104(const Bytes& bytes) {
    if (bytes.size() < 16 || bytes[0] != 0x68) throw MalformedMessage("bad iec104 header");
    Iec104Message msg;
    uint8_t kind = bytes[2];
    if (kind < 1 || kind > 3) throw MalformedMessage("bad iec104 kind");
    msg.kind = static_cast<Iec104Kind>(kind);
    msg.cot = bytes[3];
    msg.ioa = get32be(bytes, 4);
    size_t expect = msg.kind == Iec104Kind::Ack ? 16 : 24;
    if (bytes.size() != expect || bytes[1] != expect - 2)
        throw MalformedMessage("bad iec104 length");
    if (msg.kind != Iec104Kind::Ack) {
        msg.value_kw = get_f64(bytes, 16);
        if (!std::isfinite(msg.value_kw)) throw MalformedMessage("iec104 value must be finite");
    }
    return msg;
}

Bytes encode(const SshEvent& ev) {
    Bytes body;
    body.push_back(static_cast<uint8_t>(ev.kind));
    switch (ev.kind) {
        case SshKind::Handshake:
            body.push_back(ev.stage);
            break;
        case SshKind::AuthAttempt:
            put_str(body, ev.user);
            put_str(body, ev.password);
            break;
        case SshKind::AuthResult:
            body.push_back(ev.success ? 1 : 0);
            break;
        case SshKind::ChannelData: {
            if (ev.data.size() > kSshChunkSize) throw MalformedMessage("ssh chunk too large");
            put32be(body, static_cast<uint32_t>(ev.data.size()));
            body.insert(body.end(), ev.data.begin(), ev.data.end());
            break;
        }
        case SshKind::Close:
            break;
    }
    Bytes out;
    out.push_back('S');
    out.push_back('H');
    put32be(out, static_cast<uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    size_t target = out.size();
    if (ev.kind == SshKind::Handshake) target = kSshHandshakeSize;
    if (ev.kind == SshKind::AuthAttempt || ev.kind == SshKind::AuthResult) target = kSshAuthSize;
    if (out.size() < target) out.resize(target, 0);
    return out;
}

SshEvent decode_ssh(const Bytes& bytes) {
    if (bytes.size() < 7 || bytes[0] != 'S' || bytes[1] != 'H')
        throw MalformedMessage("bad ssh header");
    size_t body_len = get32be(bytes, 2);
    if (6 + body_len > bytes.size()) throw MalformedMessage("truncated ssh message");
    SshEvent ev;
    uint8_t kind = bytes[6];
    if (kind < 1 || kind > 5) throw MalformedMessage("bad ssh kind");
    ev.kind = static_cast<SshKind>(kind);
    size_t off = 7;
    switch (ev.kind) {
        case SshKind::Handshake:
            if (body_len < 2) throw MalformedMessage("truncated ssh handshake");
            ev.stage = bytes[off];
            break;
        case SshKind::AuthAttempt:
            ev.user = get_str(bytes, off);
            ev.password = get_str(bytes, off);
            break;
        case SshKind::AuthResult:
            if (body_len < 2) throw MalformedMessage("truncated ssh auth result");
            ev.success = bytes[off] != 0;
            break;
        case SshKind::ChannelData: {
            if (body_len < 5) throw MalformedMessage("truncated ssh channel data");
            uint32_t n = get32be(bytes, off);
            off += 4;
            if (off + n > bytes.size() || n > kSshChunkSize)
                throw MalformedMessage("truncated ssh channel data");
            ev.data.assign(bytes.begin() + off, bytes.begin() + off + n);
            break;
        }
        case SshKind::Close:
            break;
    }
    return ev;
}

namespace {

using nlohmann::json;

Bytes http_request(const std::string& method, const std::string& path, const std::string& body) {
    std::string s = method + " " + path +
                    " HTTP/1.1\r\nHost: c2\r\nUser-Agent: agent\r\nContent-Length: " +
                    std::to_string(body.size()) + "\r\n\r\n" + body;
    return Bytes(s.begin(), s.end());
}

Bytes http_response(const std::string& body) {
    std::string s = "HTTP/1.1 200 OK\r\nServer: c2\r\nContent-Length: " +
                    std::to_string(body.size()) + "\r\n\r\n" + body;
    return Bytes(s.begin(), s.end());
}

}  // namespace

Bytes encode(const C2Message& msg) {
    json j;
    switch (msg.kind) {
        case C2Kind::Beacon:
            j = {{"type", "beacon"}, {"agent", msg.agent_id}, {"group", msg.group}};
            return http_request("POST", "/beacon", j.dump());
        case C2Kind::Instruction:
            j = {{"type", "instruction"},
                 {"ability", msg.ability_id},
                 {"command", msg.command}};
            return http_response(j.dump());
        case C2Kind::Result:
            j = {{"type", "result"},
                 {"agent", msg.agent_id},
                 {"ability", msg.ability_id},
                 {"command", msg.command},
                 {"stdout", msg.stdout_text},
                 {"exit", msg.exit_code}};
            return http_request("POST", "/result", j.dump());
        case C2Kind::PayloadRequest:
            return http_request("GET", "/file/" + msg.payload_name, "");
        case C2Kind::PayloadData: {
            std::string body(msg.payload_data.begin(), msg.payload_data.end());
            return http_response(body);
        }
    }
    throw MalformedMessage("unknown c2 kind");
}

C2Message decode_c2(const Bytes& bytes) {
    std::string text(bytes.begin(), bytes.end());
    size_t header_end = text.find("\r\n\r\n");
    if (header_end == std::string::npos) throw MalformedMessage("bad http message");
    std::string body = text.substr(header_end + 4);
    C2Message msg;

    if (text.rfind("GET /file/", 0) == 0) {
        msg.kind = C2Kind::PayloadRequest;
        size_t end = text.find(' ', 10);
        if (end == std::string::npos) throw MalformedMessage("bad payload request");
        msg.payload_name = text.substr(10, end - 10);
        return msg;
    }

    if (text.rfind("HTTP/1.1 200", 0) == 0) {
        // response: instruction or payload data
        if (!body.empty() && body.front() == '{') {
            json j = json::parse(body, nullptr, false);
            if (!j.is_discarded() && j.value("type", "") == "instruction") {
                msg.kind = C2Kind::Instruction;
                msg.ability_id = j.value("ability", "");
                msg.command = j.value("command", "");
                return msg;
            }
        }
        msg.kind = C2Kind::PayloadData;
        msg.payload_data.assign(body.begin(), body.end());
        return msg;
    }

    if (text.rfind("POST ", 0) == 0) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded()) throw MalformedMessage("bad c2 body");
        std::string type = j.value("type", "");
        if (type == "beacon") {
            msg.kind = C2Kind::Beacon;
            msg.agent_id = j.value("agent", "");
            msg.group = j.value("group", "");
            return msg;
        }
        if (type == "result") {
            msg.kind = C2Kind::Result;
            msg.agent_id = j.value("agent", "");
            msg.ability_id = j.value("ability", "");
            msg.command = j.value("command", "");
            msg.stdout_text = j.value("stdout", "");
            msg.exit_code = j.value("exit", 0);
            return msg;
        }
        throw MalformedMessage("unknown c2 body type");
    }
    throw MalformedMessage("unrecognized c2 message");
}

}  // namespace gridtrace
