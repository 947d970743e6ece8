#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "iotwl/pcap.hpp"

namespace iotwl {

enum class Direction : uint8_t { A, B }; // A = client->server

enum class Termination : uint8_t { FIN, RST, TIMEOUT, TRUNCATED };

const char* termination_name(Termination t);

// Canonical 4-tuple; the client is whoever sent the opening SYN.
struct FlowKey {
    uint32_t client_ip = 0;
    uint32_t server_ip = 0;
    uint16_t client_port = 0;
    uint16_t server_port = 0;

    bool operator==(const FlowKey&) const = default;
};

struct SessionPacket {
    PacketRecord pkt;
    Direction dir = Direction::A;
};

struct Session {
    FlowKey key;
    std::vector<SessionPacket> packets; // time-ordered; packet 0 is the SYN
    double start_time = 0.0;
    double end_time = 0.0;
    Termination termination = Termination::TRUNCATED;
    std::string label; // empty = unlabeled; attached by dataset assembly

    size_t packet_count(Direction d) const;
};

struct ReconstructCounters {
    uint64_t accepted = 0; // packets placed into a session
    uint64_t dropped = 0;  // non-SYN packets with no open session
};

// Stateful fold over one packet stream; one instance per capture.
class SessionReconstructor {
public:
    explicit SessionReconstructor(double idle_timeout = 300.0);

    void push(const PacketRecord& pkt);
    std::vector<Session> finish(); // closes open sessions as TRUNCATED, sorts by start
    const ReconstructCounters& counters() const { return counters_; }

private:
    struct Endpoint {
        uint32_t ip;
        uint16_t port;
        bool operator<(const Endpoint& o) const {
            return ip != o.ip ? ip < o.ip : port < o.port;
        }
        bool operator==(const Endpoint&) const = default;
    };
    struct CanonKey {
        Endpoint lo, hi;
        bool operator==(const CanonKey&) const = default;
    };
    struct CanonKeyHash {
        size_t operator()(const CanonKey& k) const;
    };

    double idle_timeout_;
    ReconstructCounters counters_;
    std::vector<Session> sessions_;
    std::unordered_map<CanonKey, size_t, CanonKeyHash> open_; // key -> sessions_ index

    static CanonKey canon(const PacketRecord& pkt);
    void close_session(size_t idx, Termination t);
};

std::vector<Session> reconstruct_sessions(std::span<const PacketRecord> packets,
                                          double idle_timeout = 300.0,
                                          ReconstructCounters* counters = nullptr);

} // namespace iotwl
