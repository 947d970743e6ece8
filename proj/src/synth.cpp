#include "iotwl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"
#include "iotwl/features.hpp"
#include "iotwl/pcap.hpp"
#include "iotwl/rng.hpp"

namespace iotwl {

namespace {

constexpr int64_t kUsec = 1'000'000;

uint8_t pick_ttl(Rng& rng, const std::vector<WeightedTtl>& dist) {
    double total = 0.0;
    for (const auto& w : dist) total += w.weight;
    double u = rng.uniform01() * total;
    for (const auto& w : dist) {
        u -= w.weight;
        if (u < 0.0) return w.value;
    }
    return dist.back().value;
}

const std::string* pick_host(Rng& rng, const std::vector<WeightedHost>& pool) {
    if (pool.empty()) return nullptr;
    double total = 0.0;
    for (const auto& w : pool) total += w.weight;
    double u = rng.uniform01() * total;
    for (const auto& w : pool) {
        u -= w.weight;
        if (u < 0.0) return &w.hostname;
    }
    return &pool.back().hostname;
}

std::vector<uint8_t> filler_payload(size_t n) {
    std::vector<uint8_t> p(n);
    for (size_t j = 0; j < n; ++j) p[j] = static_cast<uint8_t>((j * 131 + 7) & 0xFF);
    return p;
}

void put16(std::vector<uint8_t>& v, size_t at, uint16_t x) {
    v[at] = static_cast<uint8_t>(x >> 8);
    v[at + 1] = static_cast<uint8_t>(x & 0xFF);
}

std::vector<uint8_t> client_hello_payload(const std::string& host) {
    size_t sni_entry = 3 + host.size();   // name type + length + bytes
    size_t ext_len = 2 + sni_entry;       // server_name_list length field + entry
    size_t ext_total = 4 + ext_len;       // extension header + body
    size_t hs_len = 43 + ext_total;
    size_t rec_len = 4 + hs_len;
    std::vector<uint8_t> p;
    p.reserve(5 + rec_len);
    p.insert(p.end(), {0x16, 0x03, 0x01, 0, 0});
    put16(p, 3, static_cast<uint16_t>(rec_len));
    p.push_back(0x01);
    p.push_back(0x00);
    p.push_back(static_cast<uint8_t>(hs_len >> 8));
    p.push_back(static_cast<uint8_t>(hs_len & 0xFF));
    p.insert(p.end(), {0x03, 0x03});
    p.insert(p.end(), 32, 0xAB); // client random, content irrelevant
    p.push_back(0x00);           // empty session id
    p.insert(p.end(), {0x00, 0x02, 0x13, 0x01});
    p.insert(p.end(), {0x01, 0x00});
    p.push_back(static_cast<uint8_t>(ext_total >> 8));
    p.push_back(static_cast<uint8_t>(ext_total & 0xFF));
    p.insert(p.end(), {0x00, 0x00});
    p.push_back(static_cast<uint8_t>(ext_len >> 8));
    p.push_back(static_cast<uint8_t>(ext_len & 0xFF));
    p.push_back(static_cast<uint8_t>((sni_entry) >> 8));
    p.push_back(static_cast<uint8_t>((sni_entry) & 0xFF));
    p.push_back(0x00);
    p.push_back(static_cast<uint8_t>(host.size() >> 8));
    p.push_back(static_cast<uint8_t>(host.size() & 0xFF));
    p.insert(p.end(), host.begin(), host.end());
    return p;
}

std::vector<uint8_t> http_get_payload(const std::string& host) {
    std::string req = "GET / HTTP/1.1\r\nHost: " + host +
                      "\r\nUser-Agent: embedded\r\nAccept: */*\r\n\r\n";
    return {req.begin(), req.end()};
}

uint32_t fnv1a32(const std::string& s) {
    uint32_t h = 2166136261u;
    for (char ch : s) {
        h ^= static_cast<uint8_t>(ch);
        h *= 16777619u;
    }
    return h;
}

uint32_t server_ip_for(const std::string* host) {
    if (!host) return 0x5DB8FFFEu; // 93.184.255.254
    return 0x5DB80000u | (fnv1a32(*host) & 0xFFFFu);
}

struct BuiltSession {
    Session session;
    bool closed = false;
    int64_t end_us = 0;
};

int64_t gap_us(Rng& rng, double mean_s) {
    int64_t g = std::llround(rng.exponential(mean_s) * 1e6);
    return std::clamp<int64_t>(g, 1, 2 * kUsec);
}

BuiltSession make_session(const DeviceProfile& p, Rng& rng, uint32_t client_ip,
                          uint16_t client_port, int64_t start_us) {
    BuiltSession out;
    Session& s = out.session;

    int n_a = p.pkts_a_min +
              static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(p.pkts_a_max - p.pkts_a_min + 1)));
    int n_b = p.pkts_b_min +
              static_cast<int>(rng.uniform_u64(static_cast<uint64_t>(p.pkts_b_max - p.pkts_b_min + 1)));
    int64_t total_b = p.bytes_b_min +
                      static_cast<int64_t>(rng.uniform_u64(
                          static_cast<uint64_t>(p.bytes_b_max - p.bytes_b_min + 1)));
    double ratio = rng.lognormal(p.ratio_log_mean, p.ratio_log_sigma);
    int64_t total_a = std::max<int64_t>(1, std::llround(ratio * static_cast<double>(total_b)));
    double gap_mean = p.pkt_gap_sigma > 0.0
                          ? p.pkt_gap_mean * rng.lognormal(0.0, p.pkt_gap_sigma)
                          : p.pkt_gap_mean;
    const std::string* host = pick_host(rng, p.hostname_pool);
    bool http = host && rng.bernoulli(p.http_probability);
    bool rst = rng.bernoulli(p.rst_probability);
    bool fin = !rst && rng.bernoulli(p.fin_probability);

    s.key.client_ip = client_ip;
    s.key.server_ip = server_ip_for(host);
    s.key.client_port = client_port;
    s.key.server_port = p.server_port;
    s.label = p.type_name;

    int64_t t = start_us;
    auto push = [&](Direction dir, uint8_t flags, std::vector<uint8_t> payload) {
        PacketRecord pkt;
        pkt.timestamp = ts_from_usec(t);
        if (dir == Direction::A) {
            pkt.src_ip = s.key.client_ip;
            pkt.dst_ip = s.key.server_ip;
            pkt.src_port = s.key.client_port;
            pkt.dst_port = s.key.server_port;
            pkt.ttl = pick_ttl(rng, p.ttl_a);
        } else {
            pkt.src_ip = s.key.server_ip;
            pkt.dst_ip = s.key.client_ip;
            pkt.src_port = s.key.server_port;
            pkt.dst_port = s.key.client_port;
            pkt.ttl = pick_ttl(rng, p.ttl_b);
        }
        pkt.flags = flags;
        pkt.payload = std::move(payload);
        s.packets.push_back({std::move(pkt), dir});
        t += gap_us(rng, gap_mean);
    };

    using namespace tcp_flags;
    push(Direction::A, SYN, {});
    push(Direction::B, uint8_t(SYN | ACK), {});
    push(Direction::A, ACK, {});

    std::vector<uint8_t> first_a =
        host ? (http ? http_get_payload(*host) : client_hello_payload(*host))
             : filler_payload(static_cast<size_t>(std::max<int64_t>(1, total_a / std::max(1, n_a))));
    int64_t base_a = 1;
    if (n_a > 1) {
        int64_t rest = total_a - static_cast<int64_t>(first_a.size());
        base_a = std::clamp<int64_t>(rest / (n_a - 1), 1, 16000);
    }
    int64_t base_b = n_b > 0 ? std::clamp<int64_t>(total_b / n_b, 1, 16000) : 0;

    for (int j = 0; j < std::max(n_a, n_b); ++j) {
        if (j < n_a)
            push(Direction::A, uint8_t(PSH | ACK),
                 j == 0 ? first_a : filler_payload(static_cast<size_t>(base_a)));
        if (j < n_b)
            push(Direction::B, uint8_t(PSH | ACK), filler_payload(static_cast<size_t>(base_b)));
    }

    if (rst) {
        push(Direction::A, uint8_t(RST | ACK), {});
        s.termination = Termination::RST;
        out.closed = true;
    } else if (fin) {
        push(Direction::A, uint8_t(FIN | ACK), {});
        s.termination = Termination::FIN;
        out.closed = true;
    } else {
        s.termination = Termination::TRUNCATED; // fixed up by the caller
    }

    s.start_time = s.packets.front().pkt.timestamp;
    s.end_time = s.packets.back().pkt.timestamp;
    out.end_us = usec_from_ts(s.end_time);
    return out;
}

void check(bool ok, const std::string& msg) {
    if (!ok) throw InvalidSpecError(msg);
}

} // namespace

void validate_spec(const CorpusSpec& spec) {
    check(spec.duration >= 0.0, "duration must be >= 0");
    check(spec.idle_timeout > 0.0, "idle_timeout must be > 0");
    std::vector<std::string> names;
    for (const DeviceProfile& p : spec.profiles) {
        const std::string& t = p.type_name;
        check(!t.empty(), "profile type_name empty");
        check(std::find(names.begin(), names.end(), t) == names.end(),
              "duplicate profile type_name: " + t);
        names.push_back(t);
        check(!p.ttl_a.empty() && !p.ttl_b.empty(), t + ": ttl distributions required");
        for (const auto& w : p.ttl_a) check(w.weight > 0.0, t + ": ttl_a weight <= 0");
        for (const auto& w : p.ttl_b) check(w.weight > 0.0, t + ": ttl_b weight <= 0");
        for (const auto& h : p.hostname_pool) {
            check(!h.hostname.empty(), t + ": empty hostname");
            check(h.weight > 0.0, t + ": hostname weight <= 0");
        }
        check(p.ratio_log_sigma >= 0.0, t + ": ratio_log_sigma < 0");
        check(p.rst_probability >= 0.0 && p.rst_probability <= 1.0, t + ": rst_probability");
        check(p.http_probability >= 0.0 && p.http_probability <= 1.0, t + ": http_probability");
        check(p.fin_probability >= 0.0 && p.fin_probability <= 1.0, t + ": fin_probability");
        check(p.rate_mean > 0.0, t + ": rate_mean must be > 0");
        check(p.rate_jitter >= 0.0 && p.rate_jitter < 1.0, t + ": rate_jitter in [0,1)");
        check(p.n_devices >= 1, t + ": n_devices must be >= 1");
        check(p.pkts_a_min >= 0 && p.pkts_a_max >= p.pkts_a_min, t + ": pkts_a range");
        check(p.pkts_b_min >= 0 && p.pkts_b_max >= p.pkts_b_min, t + ": pkts_b range");
        check(p.bytes_b_min >= 1 && p.bytes_b_max >= p.bytes_b_min, t + ": bytes_b range");
        check(p.pkt_gap_mean > 0.0, t + ": pkt_gap_mean must be > 0");
        check(p.pkt_gap_sigma >= 0.0, t + ": pkt_gap_sigma < 0");
        check(p.server_port >= 1, t + ": server_port");
    }
}

RankTable rank_table_from_spec(const CorpusSpec& spec) {
    RankTable t;
    for (const auto& [host, rank] : spec.rank_table) t.insert(host, rank);
    return t;
}

std::vector<Session> generate_sessions(const CorpusSpec& spec) {
    validate_spec(spec);
    std::vector<Session> all;
    const int64_t dur_us = std::llround(spec.duration * 1e6);
    const int64_t idle_us = std::llround(spec.idle_timeout * 1e6);

    for (size_t pi = 0; pi < spec.profiles.size(); ++pi) {
        const DeviceProfile& p = spec.profiles[pi];
        for (int inst = 0; inst < p.n_devices; ++inst) {
            Rng rng(derive_seed(derive_seed(spec.rng_seed, pi), static_cast<uint64_t>(inst)));
            uint32_t client_ip = (10u << 24) | (static_cast<uint32_t>(pi + 1) << 16) |
                                 (static_cast<uint32_t>(inst >> 8) << 8) |
                                 ((static_cast<uint32_t>(inst) & 0xFF) + 1);
            int64_t t_us = std::llround(p.rate_mean * rng.uniform01() * 1e6);
            uint32_t counter = 0;
            std::vector<size_t> made;
            std::vector<bool> closed;

            while (t_us < dur_us) {
                uint16_t port = p.reuse_client_port
                                    ? uint16_t{40000}
                                    : static_cast<uint16_t>(10000 + counter % 50000);
                BuiltSession b = make_session(p, rng, client_ip, port, t_us);
                int64_t end_us = b.end_us;
                made.push_back(all.size());
                closed.push_back(b.closed);
                all.push_back(std::move(b.session));
                ++counter;

                double gap = p.rate_mean *
                             (1.0 - p.rate_jitter + 2.0 * p.rate_jitter * rng.uniform01());
                int64_t next = t_us + std::max<int64_t>(1, std::llround(gap * 1e6));
                if (next <= end_us) next = end_us + 1;
                if (!closed.back() && p.reuse_client_port)
                    next = std::max(next, end_us + idle_us + kUsec);
                t_us = next;
            }
            for (size_t k = 0; k < made.size(); ++k) {
                if (closed[k]) continue;
                // an idle-expired key is only observed if the port is reused later
                bool seen_again = p.reuse_client_port && k + 1 < made.size();
                all[made[k]].termination =
                    seen_again ? Termination::TIMEOUT : Termination::TRUNCATED;
            }
        }
    }

    std::stable_sort(all.begin(), all.end(), [](const Session& a, const Session& b) {
        if (a.start_time != b.start_time) return a.start_time < b.start_time;
        return a.key.client_ip < b.key.client_ip;
    });
    return all;
}

LabeledDataset generate_corpus(const CorpusSpec& spec) {
    std::vector<Session> sessions = generate_sessions(spec);
    RankTable ranks = rank_table_from_spec(spec);
    LabeledDataset ds;
    ds.schema = FeatureSchema::v1();
    ds.rows.reserve(sessions.size());
    for (const Session& s : sessions) ds.rows.push_back(extract_features(s, ranks, ds.schema));
    return ds;
}

void generate_pcap_fixture(const CorpusSpec& spec, const std::string& path) {
    std::vector<Session> sessions = generate_sessions(spec);
    std::vector<const PacketRecord*> packets;
    for (const Session& s : sessions)
        for (const SessionPacket& sp : s.packets) packets.push_back(&sp.pkt);
    std::stable_sort(packets.begin(), packets.end(),
                     [](const PacketRecord* a, const PacketRecord* b) {
                         return a->timestamp < b->timestamp;
                     });
    PcapWriter w(path);
    for (const PacketRecord* pkt : packets) w.write(*pkt);
    w.close();
}

namespace {

nlohmann::json ttl_to_json(const std::vector<WeightedTtl>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& w : v) a.push_back({w.value, w.weight});
    return a;
}

std::vector<WeightedTtl> ttl_from_json(const nlohmann::json& a) {
    std::vector<WeightedTtl> v;
    for (const auto& e : a)
        v.push_back({e.at(0).get<uint8_t>(), e.at(1).get<double>()});
    return v;
}

nlohmann::json hosts_to_json(const std::vector<WeightedHost>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& w : v) a.push_back({w.hostname, w.weight});
    return a;
}

std::vector<WeightedHost> hosts_from_json(const nlohmann::json& a) {
    std::vector<WeightedHost> v;
    for (const auto& e : a)
        v.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    return v;
}

} // namespace

nlohmann::json spec_to_json(const CorpusSpec& spec) {
    nlohmann::json profiles = nlohmann::json::array();
    for (const DeviceProfile& p : spec.profiles) {
        profiles.push_back({
            {"type_name", p.type_name},
            {"ttl_a", ttl_to_json(p.ttl_a)},
            {"ttl_b", ttl_to_json(p.ttl_b)},
            {"ratio_log_mean", p.ratio_log_mean},
            {"ratio_log_sigma", p.ratio_log_sigma},
            {"rst_probability", p.rst_probability},
            {"hostname_pool", hosts_to_json(p.hostname_pool)},
            {"rate_mean", p.rate_mean},
            {"rate_jitter", p.rate_jitter},
            {"n_devices", p.n_devices},
            {"pkts_a_min", p.pkts_a_min},
            {"pkts_a_max", p.pkts_a_max},
            {"pkts_b_min", p.pkts_b_min},
            {"pkts_b_max", p.pkts_b_max},
            {"bytes_b_min", p.bytes_b_min},
            {"bytes_b_max", p.bytes_b_max},
            {"pkt_gap_mean", p.pkt_gap_mean},
            {"pkt_gap_sigma", p.pkt_gap_sigma},
            {"http_probability", p.http_probability},
            {"fin_probability", p.fin_probability},
            {"reuse_client_port", p.reuse_client_port},
            {"server_port", p.server_port},
        });
    }
    return nlohmann::json{{"format", "iotwl-corpus-spec"},
                          {"version", 1},
                          {"duration", spec.duration},
                          {"rng_seed", spec.rng_seed},
                          {"idle_timeout", spec.idle_timeout},
                          {"rank_table", spec.rank_table},
                          {"profiles", std::move(profiles)}};
}

CorpusSpec spec_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string{}) != "iotwl-corpus-spec")
            throw MalformedFileError("not a corpus spec document");
        if (j.value("version", 0) != 1)
            throw MalformedFileError("unsupported corpus spec version");
        CorpusSpec spec;
        spec.duration = j.at("duration").get<double>();
        spec.rng_seed = j.value("rng_seed", uint64_t{0});
        spec.idle_timeout = j.value("idle_timeout", 300.0);
        spec.rank_table = j.value("rank_table", std::map<std::string, uint32_t>{});
        for (const auto& pj : j.at("profiles")) {
            DeviceProfile p;
            p.type_name = pj.at("type_name").get<std::string>();
            p.ttl_a = ttl_from_json(pj.at("ttl_a"));
            p.ttl_b = ttl_from_json(pj.at("ttl_b"));
            p.ratio_log_mean = pj.value("ratio_log_mean", p.ratio_log_mean);
            p.ratio_log_sigma = pj.value("ratio_log_sigma", p.ratio_log_sigma);
            p.rst_probability = pj.value("rst_probability", p.rst_probability);
            if (pj.contains("hostname_pool")) p.hostname_pool = hosts_from_json(pj.at("hostname_pool"));
            p.rate_mean = pj.value("rate_mean", p.rate_mean);
            p.rate_jitter = pj.value("rate_jitter", p.rate_jitter);
            p.n_devices = pj.value("n_devices", p.n_devices);
            p.pkts_a_min = pj.value("pkts_a_min", p.pkts_a_min);
            p.pkts_a_max = pj.value("pkts_a_max", p.pkts_a_max);
            p.pkts_b_min = pj.value("pkts_b_min", p.pkts_b_min);
            p.pkts_b_max = pj.value("pkts_b_max", p.pkts_b_max);
            p.bytes_b_min = pj.value("bytes_b_min", p.bytes_b_min);
            p.bytes_b_max = pj.value("bytes_b_max", p.bytes_b_max);
            p.pkt_gap_mean = pj.value("pkt_gap_mean", p.pkt_gap_mean);
            p.pkt_gap_sigma = pj.value("pkt_gap_sigma", p.pkt_gap_sigma);
            p.http_probability = pj.value("http_probability", p.http_probability);
            p.fin_probability = pj.value("fin_probability", p.fin_probability);
            p.reuse_client_port = pj.value("reuse_client_port", p.reuse_client_port);
            p.server_port = pj.value("server_port", p.server_port);
            spec.profiles.push_back(std::move(p));
        }
        validate_spec(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError(std::string("bad corpus spec: ") + e.what());
    }
}

void save_spec(const CorpusSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write spec: " + path);
    out << spec_to_json(spec).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

CorpusSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError(path + ": " + e.what());
    }
    return spec_from_json(j);
}

// Three TTL families of three types each.  Within a family the TTL mixtures
// are identical in both directions, so members are separated on the softer
// axes only.  Each soft axis (bytes ratio, packet counts, server payload size,
// hostname rank) is a disjoint low/mid/high chain and the middle slot rotates
// per axis; a member left out of training then sits mid-gap on some axes and
// past the end on others, with the end positions facing different neighbours,
// so its sessions split between the two survivors instead of piling onto one.
// Hostname pools share their boundary hosts, leaving exactly one cleanly
// separable rank pair per family.  High-ratio members keep small client packet
// counts, so ratio * bytes_b stays under the 16000-byte payload cap.
CorpusSpec default_corpus_spec(uint64_t seed) {
    CorpusSpec spec;
    spec.duration = 20000.0;
    spec.rng_seed = seed;
    spec.rank_table = {
        {"plug.power-cloud.com", 350},
        {"updates.firmhub.example", 9000},
        {"iot.fridgemaker.example", 70000},
        {"media.cloudnine.example", 200000},
        {"cdn.streambox.tv", 420000},
        {"push.alertgrid.example", 1200},
        {"ingest.covereye.com", 15000},
        {"sync.wristhub.io", 120000},
        {"vault.streamstore.example", 900000},
        {"relay.nannycam.net", 1800000},
        {"ping.safealarm.org", 2000},
        {"hub.homelink.example", 25000},
        {"events.sensenet.example", 160000},
        {"climate.heatwise.example", 3200000},
        {"ota.embedfirm.example", 6000000},
    };

    auto add = [&](DeviceProfile p) { spec.profiles.push_back(std::move(p)); };

    // Three TTL families of three types each. Within a family the TTL mixes are
    // identical (both directions), so only the behavioural axes discriminate:
    // bytes ratio, hostname rank, packet counts, and per-direction payload
    // means each form a disjoint low/mid/high chain whose middle member
    // rotates. Dropping any one type leaves it between the two survivors on
    // some axes and outside them on others, so the forest cannot agree on a
    // substitute. Adjacent chain members share one hostname atom, which keeps
    // the rank columns from separating a pair on their own.
    //
    // The generator spreads client payload over at most 16 kB per packet, so
    // every profile keeps ratio_hi * bytes_b_max under ~15.5 kB * (pkts_a_min
    // - 1); otherwise the realised ratio would saturate below its target.

    // family 1: ttl 64
    {
        DeviceProfile p;
        p.type_name = "TV";
        p.ttl_a = {{64, 0.9}, {63, 0.1}};
        p.ttl_b = {{64, 0.9}, {63, 0.1}};
        p.ratio_log_mean = std::log(0.06);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.06;
        p.hostname_pool = {{"media.cloudnine.example", 0.35},
                           {"cdn.streambox.tv", 0.65}};
        p.http_probability = 0.0;
        p.rate_mean = 16.0;
        p.n_devices = 5;
        p.pkts_a_min = 10; p.pkts_a_max = 12;
        p.pkts_b_min = 6; p.pkts_b_max = 8;
        p.bytes_b_min = 23400; p.bytes_b_max = 63000;
        p.pkt_gap_mean = 0.05;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "socket";
        p.ttl_a = {{64, 0.9}, {63, 0.1}};
        p.ttl_b = {{64, 0.9}, {63, 0.1}};
        p.ratio_log_mean = std::log(3.6);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.06;
        p.hostname_pool = {{"plug.power-cloud.com", 0.6},
                           {"updates.firmhub.example", 0.4}};
        p.http_probability = 0.0;
        p.rate_mean = 13.0;
        p.n_devices = 5;
        p.pkts_a_min = 14; p.pkts_a_max = 17;
        p.pkts_b_min = 12; p.pkts_b_max = 16;
        p.bytes_b_min = 680; p.bytes_b_max = 2080;
        p.pkt_gap_mean = 0.05;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "refrigerator";
        p.ttl_a = {{64, 0.9}, {63, 0.1}};
        p.ttl_b = {{64, 0.9}, {63, 0.1}};
        p.ratio_log_mean = std::log(12.0);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.06;
        p.hostname_pool = {{"updates.firmhub.example", 0.25},
                           {"iot.fridgemaker.example", 0.25},
                           {"media.cloudnine.example", 0.5}};
        p.http_probability = 0.0;
        p.rate_mean = 16.5;
        p.n_devices = 5;
        p.pkts_a_min = 6; p.pkts_a_max = 8;
        p.pkts_b_min = 2; p.pkts_b_max = 3;
        p.bytes_b_min = 2000; p.bytes_b_max = 2690;
        p.pkt_gap_mean = 0.05;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }

    // family 2: ttl 128
    {
        DeviceProfile p;
        p.type_name = "baby_monitor";
        p.ttl_a = {{128, 0.85}, {127, 0.15}};
        p.ttl_b = {{128, 0.85}, {127, 0.15}};
        p.ratio_log_mean = std::log(0.04);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.12;
        p.hostname_pool = {{"vault.streamstore.example", 0.35},
                           {"relay.nannycam.net", 0.65}};
        p.http_probability = 0.0;
        p.rate_mean = 14.0;
        p.n_devices = 5;
        p.pkts_a_min = 12; p.pkts_a_max = 14;
        p.pkts_b_min = 5; p.pkts_b_max = 7;
        p.bytes_b_min = 15200; p.bytes_b_max = 42000;
        p.pkt_gap_mean = 0.04;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "security_camera";
        p.ttl_a = {{128, 0.85}, {127, 0.15}};
        p.ttl_b = {{128, 0.85}, {127, 0.15}};
        p.ratio_log_mean = std::log(5.0);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.12;
        p.hostname_pool = {{"push.alertgrid.example", 0.6},
                           {"ingest.covereye.com", 0.4}};
        p.http_probability = 0.0;
        p.rate_mean = 15.0;
        p.n_devices = 5;
        p.pkts_a_min = 17; p.pkts_a_max = 20;
        p.pkts_b_min = 10; p.pkts_b_max = 14;
        p.bytes_b_min = 450; p.bytes_b_max = 1210;
        p.pkt_gap_mean = 0.04;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "watch";
        p.ttl_a = {{128, 0.85}, {127, 0.15}};
        p.ttl_b = {{128, 0.85}, {127, 0.15}};
        p.ratio_log_mean = std::log(17.0);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.12;
        p.hostname_pool = {{"ingest.covereye.com", 0.25},
                           {"sync.wristhub.io", 0.25},
                           {"vault.streamstore.example", 0.5}};
        p.http_probability = 0.0;
        p.rate_mean = 16.5;
        p.n_devices = 5;
        p.pkts_a_min = 8; p.pkts_a_max = 10;
        p.pkts_b_min = 1; p.pkts_b_max = 2;
        p.bytes_b_min = 1260; p.bytes_b_max = 3000;
        p.pkt_gap_mean = 0.04;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }

    // family 3: ttl 32, plain HTTP
    {
        DeviceProfile p;
        p.type_name = "thermostat";
        p.ttl_a = {{32, 0.9}, {31, 0.1}};
        p.ttl_b = {{32, 0.9}, {31, 0.1}};
        p.ratio_log_mean = std::log(0.05);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.03;
        p.hostname_pool = {{"climate.heatwise.example", 0.35},
                           {"ota.embedfirm.example", 0.65}};
        p.http_probability = 1.0;
        p.server_port = 80;
        p.rate_mean = 15.5;
        p.n_devices = 5;
        p.pkts_a_min = 12; p.pkts_a_max = 14;
        p.pkts_b_min = 5; p.pkts_b_max = 7;
        p.bytes_b_min = 13600; p.bytes_b_max = 38400;
        p.pkt_gap_mean = 0.06;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "smoke_detector";
        p.ttl_a = {{32, 0.9}, {31, 0.1}};
        p.ttl_b = {{32, 0.9}, {31, 0.1}};
        p.ratio_log_mean = std::log(4.5);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.03;
        p.hostname_pool = {{"ping.safealarm.org", 0.6},
                           {"hub.homelink.example", 0.4}};
        p.http_probability = 1.0;
        p.server_port = 80;
        p.rate_mean = 12.5;
        p.n_devices = 5;
        p.pkts_a_min = 17; p.pkts_a_max = 20;
        p.pkts_b_min = 11; p.pkts_b_max = 15;
        p.bytes_b_min = 400; p.bytes_b_max = 1140;
        p.pkt_gap_mean = 0.06;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }
    {
        DeviceProfile p;
        p.type_name = "motion_sensor";
        p.ttl_a = {{32, 0.9}, {31, 0.1}};
        p.ttl_b = {{32, 0.9}, {31, 0.1}};
        p.ratio_log_mean = std::log(15.0);
        p.ratio_log_sigma = 0.15;
        p.rst_probability = 0.03;
        p.hostname_pool = {{"hub.homelink.example", 0.25},
                           {"events.sensenet.example", 0.25},
                           {"climate.heatwise.example", 0.5}};
        p.http_probability = 1.0;
        p.server_port = 80;
        p.rate_mean = 14.5;
        p.n_devices = 5;
        p.pkts_a_min = 7; p.pkts_a_max = 9;
        p.pkts_b_min = 1; p.pkts_b_max = 2;
        p.bytes_b_min = 1050; p.bytes_b_max = 2500;
        p.pkt_gap_mean = 0.06;
        p.pkt_gap_sigma = 0.3;
        add(p);
    }

    validate_spec(spec);
    return spec;
}

CorpusSpec disjoint_corpus_spec(uint64_t seed) {
    CorpusSpec spec;
    spec.rng_seed = seed;
    spec.duration = 6000.0;
    spec.rank_table = {{"alpha.example", 100},
                       {"beta.example", 50000},
                       {"gamma.example", 9000000}};
    {
        DeviceProfile p;
        p.type_name = "alpha_hub";
        p.ttl_a = {{200, 1.0}};
        p.ttl_b = {{60, 1.0}};      // between gamma (20) and beta (190), near gamma
        p.ratio_log_mean = std::log(20.0);
        p.ratio_log_sigma = 0.1;
        p.hostname_pool = {{"alpha.example", 1.0}};
        p.rate_mean = 20.0;
        p.n_devices = 2;
        p.pkts_a_min = 4; p.pkts_a_max = 6;
        p.pkts_b_min = 2; p.pkts_b_max = 3;
        p.bytes_b_min = 200; p.bytes_b_max = 400;
        spec.profiles.push_back(std::move(p));
    }
    {
        DeviceProfile p;
        p.type_name = "beta_cam";
        p.ttl_a = {{100, 1.0}};
        p.ttl_b = {{190, 1.0}};
        p.ratio_log_mean = 0.0;
        p.ratio_log_sigma = 0.1;
        p.hostname_pool = {{"beta.example", 1.0}};
        p.rate_mean = 25.0;
        p.n_devices = 2;
        p.pkts_a_min = 8; p.pkts_a_max = 10;
        p.pkts_b_min = 5; p.pkts_b_max = 7;
        p.bytes_b_min = 500; p.bytes_b_max = 1200;
        spec.profiles.push_back(std::move(p));
    }
    {
        DeviceProfile p;
        p.type_name = "gamma_plug";
        p.ttl_a = {{30, 1.0}};
        p.ttl_b = {{20, 1.0}};
        p.ratio_log_mean = std::log(0.05);
        p.ratio_log_sigma = 0.1;
        p.hostname_pool = {{"gamma.example", 1.0}};
        p.rate_mean = 30.0;
        p.n_devices = 2;
        p.http_probability = 1.0;
        p.pkts_a_min = 13; p.pkts_a_max = 16;
        p.pkts_b_min = 9; p.pkts_b_max = 11;
        p.bytes_b_min = 3000; p.bytes_b_max = 8000;
        spec.profiles.push_back(std::move(p));
    }
    return spec;
}

} // namespace iotwl
