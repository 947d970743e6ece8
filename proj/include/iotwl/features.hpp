#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "iotwl/errors.hpp"
#include "iotwl/session.hpp"

namespace iotwl {

// Fixed feature order; serialized with every dataset and model.
struct FeatureSchema {
    std::vector<std::string> names;
    int version = 1;

    static FeatureSchema v1();
    size_t size() const { return names.size(); }
    size_t index_of(const std::string& name) const; // throws SchemaMismatchError
    bool operator==(const FeatureSchema&) const = default;
};

struct FeatureVector {
    std::vector<double> values;
    std::string label; // empty = unlabeled
    std::string stream_id;
    double start_time = 0.0;
};

// Hostname popularity snapshot (hostname,rank CSV). Unknown hosts get
// default_rank, which sorts after every real entry.
struct RankTable {
    std::unordered_map<std::string, uint32_t> ranks;
    uint32_t default_rank = 10'000'001;

    static RankTable load_csv(const std::string& path);
    void save_csv(const std::string& path) const;
    void insert(std::string host, uint32_t rank);
};

uint32_t rank_lookup(const std::optional<std::string>& host, const RankTable& ranks);

enum class HostnameKind { SNI, HTTP_HOST };

// Most frequent hostname in the session's client-side payloads; ties go to
// the lexicographically smallest. Unparseable payloads are skipped.
std::optional<std::string> dominant_hostname(const Session& session, HostnameKind kind);

// Payload scanners, exposed for tests.
std::vector<std::string> tls_sni_hostnames(std::span<const uint8_t> payload);
std::vector<std::string> http_host_headers(std::span<const uint8_t> payload);

// Linear interpolation between closest ranks on the sorted sample.
double quantile_sorted(std::span<const double> sorted, double p);

FeatureVector extract_features(const Session& session, const RankTable& ranks,
                               const FeatureSchema& schema);

} // namespace iotwl
