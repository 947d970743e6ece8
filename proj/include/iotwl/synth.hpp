#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iotwl/dataset.hpp"
#include "iotwl/session.hpp"

namespace iotwl {

struct WeightedTtl {
    uint8_t value = 64;
    double weight = 1.0;
};

struct WeightedHost {
    std::string hostname;
    double weight = 1.0;
};

struct DeviceProfile {
    std::string type_name;
    std::vector<WeightedTtl> ttl_a;      // client-side TTLs
    std::vector<WeightedTtl> ttl_b;      // server-side TTLs
    double ratio_log_mean = 0.0;         // ln of bytes_A/bytes_B
    double ratio_log_sigma = 0.25;
    double rst_probability = 0.0;
    std::vector<WeightedHost> hostname_pool;
    double rate_mean = 30.0;             // session inter-arrival seconds
    double rate_jitter = 0.3;            // uniform +-fraction around the mean
    int n_devices = 1;

    // session shape
    int pkts_a_min = 3, pkts_a_max = 6;  // client data packets
    int pkts_b_min = 2, pkts_b_max = 5;
    int bytes_b_min = 400, bytes_b_max = 4000; // total server payload
    double pkt_gap_mean = 0.05;          // seconds between packets
    double pkt_gap_sigma = 0.0;          // lognormal per-session spread of the gap
    double http_probability = 0.0;       // else TLS ClientHello carries the host
    double fin_probability = 1.0;        // sessions left open time out / truncate
    bool reuse_client_port = false;
    uint16_t server_port = 443;
};

struct CorpusSpec {
    std::vector<DeviceProfile> profiles;
    double duration = 0.0;  // simulated seconds
    uint64_t rng_seed = 0;
    double idle_timeout = 300.0;
    std::map<std::string, uint32_t> rank_table;
};

void validate_spec(const CorpusSpec& spec); // throws InvalidSpecError

RankTable rank_table_from_spec(const CorpusSpec& spec);

// Sessions sorted by (start_time, client_ip), matching the reconstructor's
// output order, so pcap round trips compare row-for-row.
std::vector<Session> generate_sessions(const CorpusSpec& spec);

LabeledDataset generate_corpus(const CorpusSpec& spec);

void generate_pcap_fixture(const CorpusSpec& spec, const std::string& path);

nlohmann::json spec_to_json(const CorpusSpec& spec);
CorpusSpec spec_from_json(const nlohmann::json& j);
void save_spec(const CorpusSpec& spec, const std::string& path);
CorpusSpec load_spec(const std::string& path);

// Nine device types in three TTL families; family members differ only on
// soft axes (byte ratio, packet counts, payload size, hostname rank).
CorpusSpec default_corpus_spec(uint64_t seed);

// Three types with disjoint TTL supports; trivially separable.
CorpusSpec disjoint_corpus_spec(uint64_t seed);

} // namespace iotwl
