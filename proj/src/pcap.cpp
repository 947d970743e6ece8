#include "iotwl/pcap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace iotwl {

namespace {

constexpr uint32_t kMagic = 0xa1b2c3d4;
constexpr uint32_t kMagicSwapped = 0xd4c3b2a1;
constexpr uint32_t kLinkEthernet = 1;

uint32_t bswap32(uint32_t v) {
    return ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
}

uint16_t be16(const uint8_t* p) { return static_cast<uint16_t>(p[0] << 8 | p[1]); }
uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

void put16be(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(static_cast<uint8_t>(v >> 8));
    b.push_back(static_cast<uint8_t>(v & 0xff));
}

void put32be(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back(static_cast<uint8_t>(v >> 24));
    b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    b.push_back(static_cast<uint8_t>(v & 0xff));
}

void put32le(std::ofstream& out, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>((v >> 8) & 0xff),
                    static_cast<uint8_t>((v >> 16) & 0xff), static_cast<uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put16le(std::ofstream& out, uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

} // namespace

int64_t usec_from_ts(double ts) {
    return static_cast<int64_t>(std::llround(ts * 1e6));
}

std::string ip_to_string(uint32_t ip) {
    return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
           std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff);
}

uint32_t ip_from_string(const std::string& s) {
    uint32_t parts[4];
    size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        size_t dot = (i < 3) ? s.find('.', pos) : s.size();
        if (dot == std::string::npos) throw MalformedFileError("bad IPv4 address: " + s);
        const std::string tok = s.substr(pos, dot - pos);
        if (tok.empty() || tok.size() > 3 ||
            tok.find_first_not_of("0123456789") != std::string::npos)
            throw MalformedFileError("bad IPv4 address: " + s);
        unsigned long v = std::stoul(tok);
        if (v > 255) throw MalformedFileError("bad IPv4 address: " + s);
        parts[i] = static_cast<uint32_t>(v);
        pos = dot + 1;
    }
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

PcapReader::PcapReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open pcap file: " + path);
    uint8_t hdr[24];
    in_.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (in_.gcount() != sizeof(hdr))
        throw MalformedFileError("truncated pcap global header: " + path);
    uint32_t magic;
    std::memcpy(&magic, hdr, 4);
    if (magic == kMagic) {
        swap_ = false;
    } else if (magic == kMagicSwapped) {
        swap_ = true;
    } else {
        throw MalformedFileError("bad pcap magic in " + path);
    }
    uint32_t link;
    std::memcpy(&link, hdr + 20, 4);
    if (swap_) link = bswap32(link);
    if (link != kLinkEthernet)
        throw MalformedFileError("unsupported pcap link type (want Ethernet): " + path);
}

uint16_t PcapReader::rd16(const uint8_t* p) const {
    uint16_t v;
    std::memcpy(&v, p, 2);
    if (swap_) v = static_cast<uint16_t>((v << 8) | (v >> 8));
    return v;
}

uint32_t PcapReader::rd32(const uint8_t* p) const {
    uint32_t v;
    std::memcpy(&v, p, 4);
    if (swap_) v = bswap32(v);
    return v;
}

void PcapReader::set_ip_filter(std::vector<uint32_t> allow) {
    filter_ = std::move(allow);
}

std::optional<PacketRecord> PcapReader::next() {
    std::vector<uint8_t> frame;
    for (;;) {
        uint8_t rec[16];
        in_.read(reinterpret_cast<char*>(rec), sizeof(rec));
        if (in_.gcount() == 0) return std::nullopt; // clean EOF
        if (in_.gcount() != sizeof(rec)) {
            counters_.truncated++;
            return std::nullopt;
        }
        counters_.records++;
        const uint32_t ts_sec = rd32(rec);
        const uint32_t ts_usec = rd32(rec + 4);
        const uint32_t incl_len = rd32(rec + 8);
        const uint32_t orig_len = rd32(rec + 12);

        frame.resize(incl_len);
        in_.read(reinterpret_cast<char*>(frame.data()), incl_len);
        if (static_cast<uint32_t>(in_.gcount()) != incl_len) {
            counters_.truncated++;
            return std::nullopt;
        }

        // Ethernet + IPv4 + TCP; anything else is skipped
        if (frame.size() < 14 + 20) {
            counters_.skipped++;
            continue;
        }
        if (be16(frame.data() + 12) != 0x0800) {
            counters_.skipped++;
            continue;
        }
        const uint8_t* ip = frame.data() + 14;
        const uint8_t version = ip[0] >> 4;
        const size_t ihl = (ip[0] & 0x0f) * 4u;
        if (version != 4 || ihl < 20 || 14 + ihl > frame.size()) {
            counters_.skipped++;
            continue;
        }
        if (ip[9] != 6) { // not TCP
            counters_.skipped++;
            continue;
        }
        const uint16_t ip_total = be16(ip + 2);
        if (ip_total < ihl || 14u + ip_total > orig_len) {
            // inconsistent header lengths; treat as unparseable
            counters_.skipped++;
            continue;
        }
        if (14 + ihl + 20 > frame.size()) {
            counters_.truncated++;
            continue;
        }
        const uint8_t* tcp = ip + ihl;
        const size_t doff = (tcp[12] >> 4) * 4u;
        if (doff < 20 || ihl + doff > ip_total) {
            counters_.skipped++;
            continue;
        }
        if (14 + ihl + doff > frame.size()) {
            counters_.truncated++;
            continue;
        }

        PacketRecord pkt;
        pkt.timestamp = ts_from_usec(int64_t(ts_sec) * 1000000 + ts_usec);
        pkt.src_ip = be32(ip + 12);
        pkt.dst_ip = be32(ip + 16);
        pkt.ttl = ip[8];
        pkt.src_port = be16(tcp);
        pkt.dst_port = be16(tcp + 2);
        pkt.flags = tcp[13] & 0x3f;

        if (!filter_.empty() &&
            std::find(filter_.begin(), filter_.end(), pkt.src_ip) == filter_.end() &&
            std::find(filter_.begin(), filter_.end(), pkt.dst_ip) == filter_.end()) {
            counters_.filtered++;
            continue;
        }

        const size_t payload_declared = ip_total - ihl - doff;
        const size_t payload_off = 14 + ihl + doff;
        const size_t payload_avail = std::min(payload_declared, frame.size() - payload_off);
        if (payload_avail < payload_declared) counters_.truncated++;
        pkt.payload.assign(frame.begin() + payload_off, frame.begin() + payload_off + payload_avail);

        counters_.accepted++;
        return pkt;
    }
}

std::vector<PacketRecord> parse_capture(const std::string& path,
                                        const std::vector<uint32_t>* ip_filter,
                                        ParseCounters* counters) {
    PcapReader reader(path);
    if (ip_filter) reader.set_ip_filter(*ip_filter);
    std::vector<PacketRecord> out;
    while (auto pkt = reader.next()) out.push_back(std::move(*pkt));
    if (counters) *counters = reader.counters();
    return out;
}

PcapWriter::PcapWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open pcap file for writing: " + path);
    put32le(out_, kMagic);
    put16le(out_, 2); // version 2.4
    put16le(out_, 4);
    put32le(out_, 0);       // thiszone
    put32le(out_, 0);       // sigfigs
    put32le(out_, 0x40000); // snaplen
    put32le(out_, kLinkEthernet);
}

void PcapWriter::write(const PacketRecord& pkt) {
    std::vector<uint8_t> frame;
    frame.reserve(54 + pkt.payload.size());

    // Ethernet
    const std::array<uint8_t, 6> dst_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0x02};
    const std::array<uint8_t, 6> src_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
    frame.insert(frame.end(), dst_mac.begin(), dst_mac.end());
    frame.insert(frame.end(), src_mac.begin(), src_mac.end());
    put16be(frame, 0x0800);

    // IPv4, no options
    const uint16_t ip_total = static_cast<uint16_t>(20 + 20 + pkt.payload.size());
    frame.push_back(0x45);
    frame.push_back(0);
    put16be(frame, ip_total);
    put16be(frame, 0);      // id
    put16be(frame, 0x4000); // DF
    frame.push_back(pkt.ttl);
    frame.push_back(6); // TCP
    put16be(frame, 0);  // checksum (not validated by the reader)
    put32be(frame, pkt.src_ip);
    put32be(frame, pkt.dst_ip);

    // TCP, no options
    put16be(frame, pkt.src_port);
    put16be(frame, pkt.dst_port);
    put32be(frame, 0); // seq
    put32be(frame, 0); // ack
    frame.push_back(5 << 4);
    frame.push_back(pkt.flags);
    put16be(frame, 0xffff); // window
    put16be(frame, 0);      // checksum
    put16be(frame, 0);      // urgent

    frame.insert(frame.end(), pkt.payload.begin(), pkt.payload.end());

    const int64_t usec = usec_from_ts(pkt.timestamp);
    put32le(out_, static_cast<uint32_t>(usec / 1000000));
    put32le(out_, static_cast<uint32_t>(usec % 1000000));
    put32le(out_, static_cast<uint32_t>(frame.size()));
    put32le(out_, static_cast<uint32_t>(frame.size()));
    out_.write(reinterpret_cast<const char*>(frame.data()), frame.size());
    if (!out_) throw IoError("pcap write failed");
}

void PcapWriter::close() {
    out_.close();
    if (out_.fail()) throw IoError("pcap close failed");
}

} // namespace iotwl
