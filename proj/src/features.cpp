#include "iotwl/features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "iotwl/kernels.hpp"

namespace iotwl {

FeatureSchema FeatureSchema::v1() {
    FeatureSchema s;
    s.version = 1;
    s.names = {
        "ttl_min",      "ttl_firstQ",   "ttl_median",   "ttl_avg",
        "ttl_thirdQ",   "ttl_max",      "ttl_var",      "ttl_B_min",
        "ttl_B_firstQ", "ttl_B_median", "ttl_B_thirdQ", "ttl_B_var",
        "bytes_A_B_ratio", "reset",
        "ssl_dom_server_name_alexaRank", "http_dom_host_alexaRank",
        "ext_pkts_A",   "ext_pkts_B",   "ext_duration",
        "ext_payload_mean_A", "ext_payload_mean_B",
    };
    return s;
}

size_t FeatureSchema::index_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw SchemaMismatchError("feature not in schema: " + name);
}

static std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

void RankTable::insert(std::string host, uint32_t rank) {
    ranks[to_lower(std::move(host))] = rank;
}

RankTable RankTable::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rank table: " + path);
    RankTable t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw MalformedFileError(path + ":" + std::to_string(lineno) + ": expected host,rank");
        }
        std::string host = line.substr(0, comma);
        uint32_t rank = 0;
        const char* b = line.data() + comma + 1;
        const char* e = line.data() + line.size();
        auto [p, ec] = std::from_chars(b, e, rank);
        if (ec != std::errc{} || p != e) {
            if (lineno == 1) continue; // header row
            throw MalformedFileError(path + ":" + std::to_string(lineno) + ": bad rank value");
        }
        t.insert(std::move(host), rank);
    }
    return t;
}

void RankTable::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write rank table: " + path);
    std::vector<std::pair<std::string, uint32_t>> rows(ranks.begin(), ranks.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [h, r] : rows) out << h << ',' << r << '\n';
    if (!out) throw IoError("write failed: " + path);
}

uint32_t rank_lookup(const std::optional<std::string>& host, const RankTable& ranks) {
    if (!host) return ranks.default_rank;
    std::string h = to_lower(*host);
    // Exact match first, then progressively drop leading labels so
    // cdn.foo.example.com can fall back to example.com.
    size_t pos = 0;
    while (true) {
        std::string_view tail(h.data() + pos, h.size() - pos);
        auto it = ranks.ranks.find(std::string(tail));
        if (it != ranks.ranks.end()) return it->second;
        size_t dot = h.find('.', pos);
        if (dot == std::string::npos) return ranks.default_rank;
        pos = dot + 1;
        if (pos >= h.size()) return ranks.default_rank;
    }
}

namespace {

struct Cursor {
    std::span<const uint8_t> d;
    size_t i = 0;
    bool need(size_t n) const { return n <= d.size() && i <= d.size() - n; }
    uint8_t u8() { return d[i++]; }
    uint16_t u16() {
        uint16_t v = static_cast<uint16_t>((d[i] << 8) | d[i + 1]);
        i += 2;
        return v;
    }
    uint32_t u24() {
        uint32_t v = (uint32_t(d[i]) << 16) | (uint32_t(d[i + 1]) << 8) | d[i + 2];
        i += 3;
        return v;
    }
};

} // namespace

std::vector<std::string> tls_sni_hostnames(std::span<const uint8_t> payload) {
    std::vector<std::string> out;
    Cursor c{payload};
    if (!c.need(5)) return out;
    if (c.u8() != 0x16) return out; // handshake record
    if (c.u8() != 0x03) return out;
    c.u8();                         // record minor version
    size_t record_len = c.u16();
    size_t record_end = std::min(c.i + record_len, payload.size());
    if (!c.need(4) || c.i + 4 > record_end) return out;
    if (c.u8() != 0x01) return out; // ClientHello
    c.u24();                        // handshake length
    if (!c.need(34)) return out;
    c.u16();       // client version
    c.i += 32;     // random
    if (!c.need(1)) return out;
    size_t sid_len = c.u8();
    if (!c.need(sid_len + 2)) return out;
    c.i += sid_len;
    size_t cipher_len = c.u16();
    if (!c.need(cipher_len + 1)) return out;
    c.i += cipher_len;
    size_t comp_len = c.u8();
    if (!c.need(comp_len + 2)) return out;
    c.i += comp_len;
    size_t ext_total = c.u16();
    size_t ext_end = std::min(c.i + ext_total, record_end);
    while (c.i + 4 <= ext_end) {
        uint16_t ext_type = c.u16();
        size_t ext_len = c.u16();
        if (c.i + ext_len > ext_end) break;
        size_t next = c.i + ext_len;
        if (ext_type == 0x0000 && ext_len >= 2) {
            size_t list_len = c.u16();
            size_t list_end = std::min(c.i + list_len, next);
            while (c.i + 3 <= list_end) {
                uint8_t name_type = c.u8();
                size_t name_len = c.u16();
                if (c.i + name_len > list_end) break;
                if (name_type == 0 && name_len > 0) {
                    std::string name(reinterpret_cast<const char*>(payload.data() + c.i),
                                     name_len);
                    out.push_back(to_lower(std::move(name)));
                }
                c.i += name_len;
            }
        }
        c.i = next;
    }
    return out;
}

static bool iequal_prefix(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

std::vector<std::string> http_host_headers(std::span<const uint8_t> payload) {
    std::vector<std::string> out;
    std::string_view text(reinterpret_cast<const char*>(payload.data()), payload.size());
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) break; // end of header block
        if (iequal_prefix(line, "host:")) {
            std::string_view v = line.substr(5);
            while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
            while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
            // Drop a :port suffix, but leave bare values alone.
            size_t colon = v.rfind(':');
            if (colon != std::string_view::npos && colon + 1 < v.size()) {
                bool digits = true;
                for (size_t i = colon + 1; i < v.size(); ++i)
                    if (!std::isdigit(static_cast<unsigned char>(v[i]))) { digits = false; break; }
                if (digits) v = v.substr(0, colon);
            }
            if (!v.empty()) out.push_back(to_lower(std::string(v)));
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return out;
}

std::optional<std::string> dominant_hostname(const Session& session, HostnameKind kind) {
    std::map<std::string, uint64_t> counts;
    for (const auto& sp : session.packets) {
        if (sp.dir != Direction::A || sp.pkt.payload.empty()) continue;
        std::vector<std::string> names =
            kind == HostnameKind::SNI ? tls_sni_hostnames(sp.pkt.payload)
                                      : http_host_headers(sp.pkt.payload);
        for (auto& n : names) ++counts[n];
    }
    if (counts.empty()) return std::nullopt;
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
        if (it->second > best->second) best = it; // ties keep the smaller key
    return best->first;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InsufficientDataError("quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    double lo = std::floor(h);
    size_t k = static_cast<size_t>(lo);
    if (k + 1 >= sorted.size()) return sorted[sorted.size() - 1];
    double frac = h - lo;
    return sorted[k] + frac * (sorted[k + 1] - sorted[k]);
}

namespace {

uint8_t hist_kth(const std::array<uint32_t, 256>& hist, uint64_t k) {
    uint64_t seen = 0;
    for (int v = 0; v < 256; ++v) {
        seen += hist[v];
        if (k < seen) return static_cast<uint8_t>(v);
    }
    return 255;
}

double hist_quantile(const std::array<uint32_t, 256>& hist, uint64_t n, double p) {
    if (n == 1) return hist_kth(hist, 0);
    double h = (static_cast<double>(n) - 1.0) * p;
    double lo = std::floor(h);
    uint64_t k = static_cast<uint64_t>(lo);
    double vlo = hist_kth(hist, k);
    double frac = h - lo;
    if (frac == 0.0 || k + 1 >= n) return vlo;
    double vhi = hist_kth(hist, k + 1);
    return vlo + frac * (vhi - vlo);
}

struct TtlStats {
    double min, firstQ, median, avg, thirdQ, max, var;
};

TtlStats ttl_stats(const std::vector<uint8_t>& ttls) {
    kernels::U8Summary s = kernels::u8_summary(std::span<const uint8_t>(ttls.data(), ttls.size()));
    std::array<uint32_t, 256> hist{};
    for (uint8_t t : ttls) ++hist[t];
    double n = static_cast<double>(s.count);
    double mean = static_cast<double>(s.sum) / n;
    double var = static_cast<double>(s.sumsq) / n - mean * mean;
    if (var < 0.0) var = 0.0;
    return TtlStats{static_cast<double>(s.min),
                    hist_quantile(hist, s.count, 0.25),
                    hist_quantile(hist, s.count, 0.50),
                    mean,
                    hist_quantile(hist, s.count, 0.75),
                    static_cast<double>(s.max),
                    var};
}

} // namespace

FeatureVector extract_features(const Session& session, const RankTable& ranks,
                               const FeatureSchema& schema) {
    if (session.packets.empty())
        throw InsufficientDataError("session has no packets");

    std::vector<uint8_t> ttl_all, ttl_b;
    std::vector<uint32_t> bytes_a, bytes_b;
    uint64_t pkts_a = 0, pkts_b = 0, resets = 0;
    ttl_all.reserve(session.packets.size());
    for (const auto& sp : session.packets) {
        ttl_all.push_back(sp.pkt.ttl);
        if (sp.pkt.has(tcp_flags::RST)) ++resets;
        if (sp.dir == Direction::A) {
            ++pkts_a;
            bytes_a.push_back(sp.pkt.payload_len());
        } else {
            ++pkts_b;
            ttl_b.push_back(sp.pkt.ttl);
            bytes_b.push_back(sp.pkt.payload_len());
        }
    }

    TtlStats all = ttl_stats(ttl_all);
    TtlStats b = ttl_b.empty() ? all : ttl_stats(ttl_b);

    uint64_t total_a = kernels::u32_sum(std::span<const uint32_t>(bytes_a.data(), bytes_a.size()));
    uint64_t total_b = kernels::u32_sum(std::span<const uint32_t>(bytes_b.data(), bytes_b.size()));
    double ratio;
    if (total_b > 0) {
        ratio = static_cast<double>(total_a) / static_cast<double>(total_b);
    } else if (total_a > 0) {
        ratio = static_cast<double>(total_a) + 1.0;
    } else {
        ratio = 1.0;
    }

    double sni_rank = rank_lookup(dominant_hostname(session, HostnameKind::SNI), ranks);
    double http_rank = rank_lookup(dominant_hostname(session, HostnameKind::HTTP_HOST), ranks);

    double payload_mean_a =
        pkts_a ? static_cast<double>(total_a) / static_cast<double>(pkts_a) : 0.0;
    double payload_mean_b =
        pkts_b ? static_cast<double>(total_b) / static_cast<double>(pkts_b) : 0.0;

    std::map<std::string, double> computed = {
        {"ttl_min", all.min},
        {"ttl_firstQ", all.firstQ},
        {"ttl_median", all.median},
        {"ttl_avg", all.avg},
        {"ttl_thirdQ", all.thirdQ},
        {"ttl_max", all.max},
        {"ttl_var", all.var},
        {"ttl_B_min", b.min},
        {"ttl_B_firstQ", b.firstQ},
        {"ttl_B_median", b.median},
        {"ttl_B_thirdQ", b.thirdQ},
        {"ttl_B_var", b.var},
        {"bytes_A_B_ratio", ratio},
        {"reset", static_cast<double>(resets)},
        {"ssl_dom_server_name_alexaRank", sni_rank},
        {"http_dom_host_alexaRank", http_rank},
        {"ext_pkts_A", static_cast<double>(pkts_a)},
        {"ext_pkts_B", static_cast<double>(pkts_b)},
        {"ext_duration", session.end_time - session.start_time},
        {"ext_payload_mean_A", payload_mean_a},
        {"ext_payload_mean_B", payload_mean_b},
    };

    FeatureVector fv;
    fv.values.reserve(schema.size());
    for (const auto& name : schema.names) {
        auto it = computed.find(name);
        if (it == computed.end())
            throw SchemaMismatchError("extractor cannot produce feature: " + name);
        fv.values.push_back(it->second);
    }
    if (schema.size() != computed.size())
        throw SchemaMismatchError("schema does not cover the extracted feature set");
    fv.label = session.label;
    fv.stream_id = ip_to_string(session.key.client_ip);
    fv.start_time = session.start_time;
    return fv;
}

} // namespace iotwl
