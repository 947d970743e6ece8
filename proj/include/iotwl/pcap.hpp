#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "iotwl/errors.hpp"

namespace iotwl {

// TCP flag bits as they appear in the header's flags byte.
namespace tcp_flags {
inline constexpr uint8_t FIN = 0x01;
inline constexpr uint8_t SYN = 0x02;
inline constexpr uint8_t RST = 0x04;
inline constexpr uint8_t PSH = 0x08;
inline constexpr uint8_t ACK = 0x10;
inline constexpr uint8_t URG = 0x20;
} // namespace tcp_flags

struct PacketRecord {
    double timestamp = 0.0; // seconds since epoch, microsecond precision
    uint32_t src_ip = 0;    // host byte order
    uint32_t dst_ip = 0;
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    uint8_t ttl = 0;
    uint8_t flags = 0;
    std::vector<uint8_t> payload;

    uint32_t payload_len() const { return static_cast<uint32_t>(payload.size()); }
    bool has(uint8_t flag) const { return (flags & flag) != 0; }
};

// Microsecond-grid timestamps; the same conversion is used by the reader and
// the synthetic generator so pcap round trips are bit-exact.
inline double ts_from_usec(int64_t usec) {
    return static_cast<double>(usec / 1000000) + static_cast<double>(usec % 1000000) * 1e-6;
}

int64_t usec_from_ts(double ts);

std::string ip_to_string(uint32_t ip);
uint32_t ip_from_string(const std::string& s); // throws MalformedFileError on bad input

struct ParseCounters {
    uint64_t records = 0;      // pcap records seen
    uint64_t accepted = 0;     // IPv4/TCP packets yielded
    uint64_t skipped = 0;      // non-Ethernet-IPv4-TCP frames
    uint64_t truncated = 0;    // records cut short by snaplen or file end
    uint64_t filtered = 0;     // dropped by the IP allow-list
};

// Classic pcap reader (magic 0xa1b2c3d4, either endianness, Ethernet link
// type). Yields IPv4/TCP packets; everything else is counted and skipped.
class PcapReader {
public:
    explicit PcapReader(const std::string& path);

    void set_ip_filter(std::vector<uint32_t> allow);
    std::optional<PacketRecord> next();
    const ParseCounters& counters() const { return counters_; }

private:
    std::ifstream in_;
    bool swap_ = false;
    ParseCounters counters_;
    std::vector<uint32_t> filter_;

    uint16_t rd16(const uint8_t* p) const;
    uint32_t rd32(const uint8_t* p) const;
};

std::vector<PacketRecord> parse_capture(const std::string& path,
                                        const std::vector<uint32_t>* ip_filter = nullptr,
                                        ParseCounters* counters = nullptr);

// Writes classic pcap (big-endian-host magic, Ethernet). Frames are
// synthesized around each PacketRecord with fixed MACs and zero seq/ack.
class PcapWriter {
public:
    explicit PcapWriter(const std::string& path);
    void write(const PacketRecord& pkt);
    void close();

private:
    std::ofstream out_;
};

} // namespace iotwl
