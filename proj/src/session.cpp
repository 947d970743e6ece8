#include "iotwl/session.hpp"

#include <algorithm>

namespace iotwl {

const char* termination_name(Termination t) {
    switch (t) {
    case Termination::FIN: return "FIN";
    case Termination::RST: return "RST";
    case Termination::TIMEOUT: return "TIMEOUT";
    case Termination::TRUNCATED: return "TRUNCATED";
    }
    return "?";
}

size_t Session::packet_count(Direction d) const {
    size_t n = 0;
    for (const auto& sp : packets)
        if (sp.dir == d) ++n;
    return n;
}

size_t SessionReconstructor::CanonKeyHash::operator()(const CanonKey& k) const {
    uint64_t a = (uint64_t(k.lo.ip) << 16) ^ k.lo.port;
    uint64_t b = (uint64_t(k.hi.ip) << 16) ^ k.hi.port;
    uint64_t h = a * 0x9e3779b97f4a7c15ULL ^ b;
    h ^= h >> 29;
    return static_cast<size_t>(h * 0xbf58476d1ce4e5b9ULL);
}

SessionReconstructor::SessionReconstructor(double idle_timeout) : idle_timeout_(idle_timeout) {}

SessionReconstructor::CanonKey SessionReconstructor::canon(const PacketRecord& pkt) {
    Endpoint a{pkt.src_ip, pkt.src_port};
    Endpoint b{pkt.dst_ip, pkt.dst_port};
    return a < b ? CanonKey{a, b} : CanonKey{b, a};
}

void SessionReconstructor::close_session(size_t idx, Termination t) {
    sessions_[idx].termination = t;
}

void SessionReconstructor::push(const PacketRecord& pkt) {
    const CanonKey key = canon(pkt);
    auto it = open_.find(key);

    if (it != open_.end()) {
        Session& s = sessions_[it->second];
        if (pkt.timestamp - s.end_time > idle_timeout_) {
            close_session(it->second, Termination::TIMEOUT);
            open_.erase(it);
            it = open_.end();
        }
    }

    if (it == open_.end()) {
        // only a SYN opens a session; its sender becomes the client
        if (!pkt.has(tcp_flags::SYN)) {
            counters_.dropped++;
            return;
        }
        Session s;
        s.key = FlowKey{pkt.src_ip, pkt.dst_ip, pkt.src_port, pkt.dst_port};
        s.start_time = s.end_time = pkt.timestamp;
        s.termination = Termination::TRUNCATED;
        s.packets.push_back({pkt, Direction::A});
        counters_.accepted++;
        sessions_.push_back(std::move(s));
        size_t idx = sessions_.size() - 1;
        if (pkt.has(tcp_flags::FIN) || pkt.has(tcp_flags::RST)) {
            close_session(idx, pkt.has(tcp_flags::RST) ? Termination::RST : Termination::FIN);
        } else {
            open_.emplace(key, idx);
        }
        return;
    }

    Session& s = sessions_[it->second];
    const bool from_client = pkt.src_ip == s.key.client_ip && pkt.src_port == s.key.client_port;
    s.packets.push_back({pkt, from_client ? Direction::A : Direction::B});
    s.end_time = pkt.timestamp;
    counters_.accepted++;

    // first FIN or RST on either side closes the session; that packet is its last
    if (pkt.has(tcp_flags::RST)) {
        close_session(it->second, Termination::RST);
        open_.erase(it);
    } else if (pkt.has(tcp_flags::FIN)) {
        close_session(it->second, Termination::FIN);
        open_.erase(it);
    }
}

std::vector<Session> SessionReconstructor::finish() {
    open_.clear(); // whatever is left stays TRUNCATED
    std::stable_sort(sessions_.begin(), sessions_.end(),
                     [](const Session& a, const Session& b) {
                         if (a.start_time != b.start_time) return a.start_time < b.start_time;
                         return a.key.client_ip < b.key.client_ip;
                     });
    return std::move(sessions_);
}

std::vector<Session> reconstruct_sessions(std::span<const PacketRecord> packets,
                                          double idle_timeout,
                                          ReconstructCounters* counters) {
    SessionReconstructor rec(idle_timeout);
    for (const auto& pkt : packets) rec.push(pkt);
    auto out = rec.finish();
    if (counters) *counters = rec.counters();
    return out;
}

} // namespace iotwl
