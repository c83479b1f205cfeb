#ifndef GRIDTRACE_PROTOCOLS_HPP
#define GRIDTRACE_PROTOCOLS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gridtrace/frame.hpp"

namespace gridtrace {

// ---------------------------------------------------------------------
// IEC 104-lite: fixed 16-byte header + optional 8-byte value.
// Layout: 0x68, length, kind, cause-of-transmission, ioa (u32),
// 8 reserved bytes, then an IEEE-754 double (big-endian) for kinds
// that carry a value. The full ASDU grammar is out of scope.
// ---------------------------------------------------------------------

enum class Iec104Kind : uint8_t { Measurement = 1, SetpointCommand = 2, Ack = 3 };

struct Iec104Message {
    Iec104Kind kind = Iec104Kind::Measurement;
    uint32_t ioa = 0;
    double value_kw = 0.0;  // ignored for Ack
    uint8_t cot = 3;        // cause of transmission (3 = spontaneous, 6 = activation)

    bool operator==(const Iec104Message&) const = default;
};

Bytes encode(const Iec104Message& msg);
Iec104Message decode_iec104(const Bytes& bytes);

// ---------------------------------------------------------------------
// SSH-lite: plaintext-compared auth, no real cryptography. Handshake
// messages are padded to 256 bytes, auth messages to 128 bytes; channel
// data is chunked at 1024 bytes by the sender.
// ---------------------------------------------------------------------

enum class SshKind : uint8_t { Handshake = 1, AuthAttempt = 2, AuthResult = 3, ChannelData = 4, Close = 5 };

struct SshEvent {
    SshKind kind = SshKind::Handshake;
    uint8_t stage = 0;      // handshake stage 0..3
    std::string user;       // AuthAttempt
    std::string password;   // AuthAttempt
    bool success = false;   // AuthResult
    Bytes data;             // ChannelData

    bool operator==(const SshEvent&) const = default;
};

constexpr size_t kSshHandshakeSize = 256;
constexpr size_t kSshAuthSize = 128;
constexpr size_t kSshChunkSize = 1024;

Bytes encode(const SshEvent& ev);
SshEvent decode_ssh(const Bytes& bytes);

// ---------------------------------------------------------------------
// C2 HTTP-lite: plain-text request/response pairs with JSON bodies,
// no TLS. Good enough for standard tooling to recognize as HTTP.
// ---------------------------------------------------------------------

enum class C2Kind : uint8_t { Beacon = 1, Instruction = 2, Result = 3, PayloadRequest = 4, PayloadData = 5 };

struct C2Message {
    C2Kind kind = C2Kind::Beacon;
    std::string agent_id;
    std::string group;
    std::string ability_id;
    std::string command;
    std::string stdout_text;
    int exit_code = 0;
    std::string payload_name;
    Bytes payload_data;

    bool operator==(const C2Message&) const = default;
};

Bytes encode(const C2Message& msg);
C2Message decode_c2(const Bytes& bytes);

}  // namespace gridtrace

#endif
