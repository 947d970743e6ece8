#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iotwl/dataset.hpp"
#include "iotwl/forest.hpp"
#include "iotwl/whitelist.hpp"

namespace iotwl {

struct SplitSpec {
    double train_fraction = 1.0 / 3.0;
    double validation_fraction = 1.0 / 3.0;
    double test_fraction = 1.0 / 3.0;
};

struct SplitResult {
    LabeledDataset train;
    LabeledDataset validation;
    LabeledDataset test;
};

// Per stream: sort by start_time, earliest floor(n*f1) rows to train, next
// floor(n*f2) to validation, remainder to test.
SplitResult temporal_split(const LabeledDataset& data, const SplitSpec& spec = {});

struct ConfusionMatrix {
    std::vector<std::string> labels; // white-listed types, then UNKNOWN
    std::vector<std::vector<uint64_t>> counts; // actual x predicted

    uint64_t row_sum(size_t i) const;
    double row_accuracy(size_t i) const; // diagonal / row sum, 0 when empty
    uint64_t total() const;
    size_t index_of(const std::string& label) const; // npos when absent
};

struct ExperimentResult {
    std::string left_out_type;
    double tr_star = 0.0;
    uint64_t n_test_sessions = 0; // evaluated full windows
    double detected_unknown_rate = 0.0;
    double weighted_whitelisted_accuracy = 0.0;
    ConfusionMatrix confusion;
};

struct EvalSettings {
    ForestHyperparams hyperparams;
    double beta = 1.0;
    size_t window = 20;
    double grid_step = 0.01;
    size_t cap_per_class = 2000;
    SplitSpec split;
};

// One device's time-ordered (actual label, session decision) sequence.
struct StreamTrace {
    std::string stream_id;
    std::vector<std::pair<std::string, std::string>> seq;
};

struct WindowedMetrics {
    ConfusionMatrix confusion;
    double unknown_rate = 1.0;          // vacuously 1 with no unknown windows
    double whitelisted_accuracy = 1.0;  // vacuously 1 with no white-listed windows
    uint64_t n_windows = 0;
    uint64_t n_unknown_windows = 0;
    uint64_t n_whitelisted_windows = 0;
};

std::vector<StreamTrace> make_traces(const WhiteListModel& model,
                                     const LabeledDataset& data);

WindowedMetrics windowed_metrics(const std::vector<StreamTrace>& traces,
                                 const std::vector<std::string>& white_list, size_t w);

struct LooModel {
    WhiteListModel model;
    TuningReport tuning;
    LabeledDataset test; // full test split, left-out type included
};

LooModel train_loo_model(const LabeledDataset& data, const std::string& left_out_type,
                         const EvalSettings& s);

ExperimentResult leave_one_out_experiment(const LabeledDataset& data,
                                          const std::string& left_out_type,
                                          const EvalSettings& s);

struct ExperimentSummary {
    double mean_unknown = 0.0;
    double std_unknown = 0.0; // sample standard deviation (n-1)
    double mean_whitelisted = 0.0;
    double std_whitelisted = 0.0;
};

struct AllExperiments {
    std::vector<ExperimentResult> results;
    ExperimentSummary summary;
};

// One experiment per class; experiment i reseeded with derive_seed(seed, i).
AllExperiments run_all_experiments(const LabeledDataset& data, const EvalSettings& s);

struct WindowPoint {
    size_t w = 0;
    double unknown_rate = 0.0;
    double whitelisted_accuracy = 0.0;
    uint64_t n_windows = 0;
};

std::vector<WindowPoint> accuracy_vs_window(const LabeledDataset& data,
                                            const std::string& left_out_type,
                                            const std::vector<size_t>& windows,
                                            const EvalSettings& s);

std::optional<size_t> minimal_perfect_window(const LabeledDataset& data,
                                             const std::string& left_out_type,
                                             size_t w_max, const EvalSettings& s);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double tr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points; // ordered by tr
    double auc = 0.0;
};

// Positive class = unknown; rows whose label is outside the forest's classes
// are the positives.
RocCurve compute_roc(const Forest& forest, const LabeledDataset& eval_set,
                     double grid_step);

struct InterArrival {
    double mean = 0.0;
    double sigma = 0.0; // population
    uint64_t n_deltas = 0;
};

// Types with fewer than 2 sessions are omitted.
std::map<std::string, InterArrival> inter_arrival_stats(const LabeledDataset& data);

enum class TransportMode { left_out, white_listed };

ExperimentResult transportability_experiment(const LabeledDataset& train_corpus,
                                             const LabeledDataset& test_corpus,
                                             const std::string& device_type,
                                             TransportMode mode, const EvalSettings& s);

nlohmann::json experiment_to_json(const ExperimentResult& r);
nlohmann::json roc_to_json(const RocCurve& roc);

} // namespace iotwl
