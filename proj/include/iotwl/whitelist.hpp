#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iotwl/forest.hpp"

namespace iotwl {

inline const std::string kUnknownLabel = "UNKNOWN";

struct WhiteListModel {
    Forest forest;
    std::vector<std::string> white_list; // mirrors forest.class_names
    double tr = 0.5;
    double beta = 1.0;
    int version = 1;
};

struct SessionVerdict {
    std::string decision; // white-listed type or UNKNOWN
    std::vector<double> posterior;
    std::string stream_id;
    double start_time = 0.0;
};

struct StreamVerdict {
    std::string stream_id;
    std::vector<std::string> window; // oldest -> newest decisions
    std::string decision;
    std::map<std::string, uint64_t> tally;
    double decided_at = 0.0;
    bool provisional = true;
};

struct TuningPoint {
    double tr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_beta = 0.0;
};

struct TuningReport {
    double tr_star = 0.0;
    std::vector<TuningPoint> curve;
    double beta = 1.0;
};

// (1+b^2)PR / (b^2 P + R); 0 when the denominator is 0.
double f_beta(double precision, double recall, double beta);

// Strict rule: decision != UNKNOWN only when max posterior > tr.
SessionVerdict classify_session(const WhiteListModel& model, const FeatureVector& x);

TuningReport tune_threshold(const Forest& forest, const LabeledDataset& validation,
                            double beta, double grid_step);

// Majority label of the window; ties prefer UNKNOWN, then white_list order.
std::pair<std::string, std::map<std::string, uint64_t>>
majority_decide(const std::vector<std::string>& window,
                const std::vector<std::string>& white_list);

class StreamClassifier {
public:
    StreamClassifier(const WhiteListModel& model, std::string stream_id,
                     size_t window_size);
    StreamVerdict push(const FeatureVector& x);
    const std::string& stream_id() const { return stream_id_; }

private:
    const WhiteListModel* model_;
    std::string stream_id_;
    size_t w_;
    std::deque<std::string> window_;
};

std::vector<StreamVerdict> classify_stream(const WhiteListModel& model,
                                           const std::vector<FeatureVector>& sessions,
                                           size_t window_size);

struct Alert {
    std::string stream_id;
    double decided_at = 0.0;
    std::string decision;
    std::map<std::string, uint64_t> tally;
    int model_version = 1;
};

// Edge-triggered: one alert per known->UNKNOWN transition per stream.
// Provisional verdicts neither alert nor move the stream's state.
class AlertEmitter {
public:
    explicit AlertEmitter(int model_version = 1) : model_version_(model_version) {}
    std::optional<Alert> push(const StreamVerdict& v);

private:
    int model_version_;
    std::map<std::string, bool> stream_unknown_;
};

nlohmann::json alert_to_json(const Alert& a);
nlohmann::json model_to_json(const WhiteListModel& m);
WhiteListModel model_from_json(const nlohmann::json& j);
void save_model(const WhiteListModel& m, const std::string& path);
WhiteListModel load_model(const std::string& path);

} // namespace iotwl
