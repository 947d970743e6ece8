#include "iotwl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"
#include "iotwl/rng.hpp"

namespace iotwl {

namespace {

constexpr uint64_t kUndersampleTag = 1'000'000'007ULL;

// stream_id -> row indices sorted by start_time
std::map<std::string, std::vector<size_t>> group_streams(const LabeledDataset& data) {
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < data.rows.size(); ++i)
        groups[data.rows[i].stream_id].push_back(i);
    for (auto& [id, idx] : groups) {
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            return data.rows[a].start_time < data.rows[b].start_time;
        });
    }
    return groups;
}

LabeledDataset filter_label(const LabeledDataset& data, const std::string& excluded) {
    LabeledDataset out;
    out.schema = data.schema;
    for (const auto& r : data.rows)
        if (r.label != excluded) out.rows.push_back(r);
    return out;
}

} // namespace

SplitResult temporal_split(const LabeledDataset& data, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.validation_fraction > 0.0 &&
          spec.test_fraction > 0.0))
        throw InvalidSpecError("split fractions must be positive");
    double sum = spec.train_fraction + spec.validation_fraction + spec.test_fraction;
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidSpecError("split fractions must sum to 1");

    SplitResult out;
    out.train.schema = out.validation.schema = out.test.schema = data.schema;
    for (const auto& [id, idx] : group_streams(data)) {
        size_t n = idx.size();
        size_t n_train = static_cast<size_t>(
            std::floor(static_cast<double>(n) * spec.train_fraction));
        size_t n_val = static_cast<size_t>(
            std::floor(static_cast<double>(n) * spec.validation_fraction));
        for (size_t k = 0; k < n; ++k) {
            const FeatureVector& row = data.rows[idx[k]];
            if (k < n_train)
                out.train.rows.push_back(row);
            else if (k < n_train + n_val)
                out.validation.rows.push_back(row);
            else
                out.test.rows.push_back(row);
        }
    }
    return out;
}

uint64_t ConfusionMatrix::row_sum(size_t i) const {
    uint64_t s = 0;
    for (uint64_t c : counts[i]) s += c;
    return s;
}

double ConfusionMatrix::row_accuracy(size_t i) const {
    uint64_t s = row_sum(i);
    return s ? static_cast<double>(counts[i][i]) / static_cast<double>(s) : 0.0;
}

uint64_t ConfusionMatrix::total() const {
    uint64_t s = 0;
    for (size_t i = 0; i < counts.size(); ++i) s += row_sum(i);
    return s;
}

size_t ConfusionMatrix::index_of(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    return static_cast<size_t>(-1);
}

std::vector<StreamTrace> make_traces(const WhiteListModel& model,
                                     const LabeledDataset& data) {
    if (!(data.schema == model.forest.schema))
        throw SchemaMismatchError("dataset schema differs from model schema");
    std::vector<StreamTrace> traces;
    for (const auto& [id, idx] : group_streams(data)) {
        StreamTrace t;
        t.stream_id = id;
        t.seq.reserve(idx.size());
        for (size_t i : idx) {
            SessionVerdict v = classify_session(model, data.rows[i]);
            t.seq.emplace_back(data.rows[i].label, v.decision);
        }
        traces.push_back(std::move(t));
    }
    return traces;
}

WindowedMetrics windowed_metrics(const std::vector<StreamTrace>& traces,
                                 const std::vector<std::string>& white_list, size_t w) {
    if (w < 1) throw InvalidSpecError("window must be >= 1");
    WindowedMetrics m;
    m.confusion.labels = white_list;
    m.confusion.labels.push_back(kUnknownLabel);
    size_t n = m.confusion.labels.size();
    m.confusion.counts.assign(n, std::vector<uint64_t>(n, 0));
    size_t unknown_row = n - 1;

    for (const StreamTrace& t : traces) {
        std::deque<std::string> window;
        for (const auto& [actual, decision] : t.seq) {
            window.push_back(decision);
            if (window.size() > w) window.pop_front();
            if (window.size() < w) continue; // provisional
            auto [verdict, tally] = majority_decide({window.begin(), window.end()},
                                                    white_list);
            size_t row = m.confusion.index_of(actual);
            if (row == static_cast<size_t>(-1)) row = unknown_row;
            size_t col = m.confusion.index_of(verdict);
            ++m.confusion.counts[row][col];
        }
    }

    m.n_windows = m.confusion.total();
    m.n_unknown_windows = m.confusion.row_sum(unknown_row);
    if (m.n_unknown_windows)
        m.unknown_rate = m.confusion.row_accuracy(unknown_row);
    uint64_t white_total = 0, white_hits = 0;
    for (size_t i = 0; i < unknown_row; ++i) {
        white_total += m.confusion.row_sum(i);
        white_hits += m.confusion.counts[i][i];
    }
    m.n_whitelisted_windows = white_total;
    if (white_total)
        m.whitelisted_accuracy =
            static_cast<double>(white_hits) / static_cast<double>(white_total);
    return m;
}

LooModel train_loo_model(const LabeledDataset& data, const std::string& left_out_type,
                         const EvalSettings& s) {
    if (data.class_names().size() < 2)
        throw InsufficientDataError("corpus needs at least 2 device types");

    SplitResult split = temporal_split(data, s.split);
    LabeledDataset train = filter_label(split.train, left_out_type);
    LabeledDataset validation = filter_label(split.validation, left_out_type);
    for (const auto& r : train.rows)
        if (r.label == left_out_type)
            throw std::logic_error("left-out rows leaked into training");

    LabeledDataset capped = undersample(
        train, s.cap_per_class, derive_seed(s.hyperparams.rng_seed, kUndersampleTag));
    Forest forest = train_forest(capped, s.hyperparams);
    TuningReport tuning = tune_threshold(forest, validation, s.beta, s.grid_step);

    LooModel out;
    out.model.forest = std::move(forest);
    out.model.white_list = out.model.forest.class_names;
    out.model.tr = tuning.tr_star;
    out.model.beta = s.beta;
    out.tuning = std::move(tuning);
    out.test = std::move(split.test);
    return out;
}

namespace {

ExperimentResult result_from_metrics(const std::string& left_out, double tr_star,
                                     WindowedMetrics&& m) {
    ExperimentResult r;
    r.left_out_type = left_out;
    r.tr_star = tr_star;
    r.n_test_sessions = m.n_windows;
    r.detected_unknown_rate = m.unknown_rate;
    r.weighted_whitelisted_accuracy = m.whitelisted_accuracy;
    r.confusion = std::move(m.confusion);
    return r;
}

} // namespace

ExperimentResult leave_one_out_experiment(const LabeledDataset& data,
                                          const std::string& left_out_type,
                                          const EvalSettings& s) {
    LooModel lm = train_loo_model(data, left_out_type, s);
    std::vector<StreamTrace> traces = make_traces(lm.model, lm.test);
    WindowedMetrics m = windowed_metrics(traces, lm.model.white_list, s.window);
    return result_from_metrics(left_out_type, lm.model.tr, std::move(m));
}

AllExperiments run_all_experiments(const LabeledDataset& data, const EvalSettings& s) {
    AllExperiments out;
    std::vector<std::string> types = data.class_names();
    for (size_t i = 0; i < types.size(); ++i) {
        EvalSettings si = s;
        si.hyperparams.rng_seed = derive_seed(s.hyperparams.rng_seed, i);
        out.results.push_back(leave_one_out_experiment(data, types[i], si));
    }

    auto mean_std = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair<double, double>{mean, sd};
    };
    std::vector<double> unk, white;
    for (const auto& r : out.results) {
        unk.push_back(r.detected_unknown_rate);
        white.push_back(r.weighted_whitelisted_accuracy);
    }
    std::tie(out.summary.mean_unknown, out.summary.std_unknown) = mean_std(unk);
    std::tie(out.summary.mean_whitelisted, out.summary.std_whitelisted) = mean_std(white);
    return out;
}

std::vector<WindowPoint> accuracy_vs_window(const LabeledDataset& data,
                                            const std::string& left_out_type,
                                            const std::vector<size_t>& windows,
                                            const EvalSettings& s) {
    if (!std::is_sorted(windows.begin(), windows.end()))
        throw InvalidSpecError("window list must be ascending");
    LooModel lm = train_loo_model(data, left_out_type, s);
    std::vector<StreamTrace> traces = make_traces(lm.model, lm.test);
    std::vector<WindowPoint> out;
    for (size_t w : windows) {
        WindowedMetrics m = windowed_metrics(traces, lm.model.white_list, w);
        out.push_back({w, m.unknown_rate, m.whitelisted_accuracy, m.n_windows});
    }
    return out;
}

std::optional<size_t> minimal_perfect_window(const LabeledDataset& data,
                                             const std::string& left_out_type,
                                             size_t w_max, const EvalSettings& s) {
    if (w_max < 1) throw InvalidSpecError("w_max must be >= 1");
    LooModel lm = train_loo_model(data, left_out_type, s);
    std::vector<StreamTrace> traces = make_traces(lm.model, lm.test);
    for (size_t w = 1; w <= w_max; ++w) {
        WindowedMetrics m = windowed_metrics(traces, lm.model.white_list, w);
        if (m.n_unknown_windows > 0 && m.n_whitelisted_windows > 0 &&
            m.unknown_rate == 1.0 && m.whitelisted_accuracy == 1.0)
            return w;
    }
    return std::nullopt;
}

RocCurve compute_roc(const Forest& forest, const LabeledDataset& eval_set,
                     double grid_step) {
    if (!(grid_step > 0.0 && grid_step < 1.0))
        throw InvalidSpecError("grid_step must be in (0,1)");
    if (!(eval_set.schema == forest.schema))
        throw SchemaMismatchError("evaluation schema differs from forest schema");

    std::vector<double> pos_max, neg_max; // max posterior per row
    for (const auto& row : eval_set.rows) {
        std::vector<double> p = predict_posterior(forest, row.values);
        double mx = 0.0;
        for (double v : p) mx = std::max(mx, v);
        bool positive = forest.class_index(row.label) == static_cast<size_t>(-1);
        (positive ? pos_max : neg_max).push_back(mx);
    }
    if (pos_max.empty() || neg_max.empty())
        throw OneSidedDataError("ROC needs both white-listed and unknown sessions");

    RocCurve roc;
    std::vector<double> grid;
    for (size_t i = 0; i * grid_step < 1.0; ++i)
        grid.push_back(static_cast<double>(i) * grid_step);
    grid.push_back(1.0);
    for (double tr : grid) {
        auto frac_rejected = [tr](const std::vector<double>& v) {
            uint64_t n = 0;
            for (double mx : v)
                if (!(mx > tr)) ++n;
            return static_cast<double>(n) / static_cast<double>(v.size());
        };
        roc.points.push_back({frac_rejected(neg_max), frac_rejected(pos_max), tr});
    }
    double auc = 0.0;
    for (size_t i = 0; i + 1 < roc.points.size(); ++i) {
        double dx = roc.points[i + 1].fpr - roc.points[i].fpr;
        auc += dx * (roc.points[i].tpr + roc.points[i + 1].tpr) / 2.0;
    }
    roc.auc = auc;
    return roc;
}

std::map<std::string, InterArrival> inter_arrival_stats(const LabeledDataset& data) {
    std::map<std::string, std::vector<double>> starts;
    for (const auto& r : data.rows) starts[r.label].push_back(r.start_time);

    std::map<std::string, InterArrival> out;
    for (auto& [label, ts] : starts) {
        if (ts.size() < 2) continue;
        std::sort(ts.begin(), ts.end());
        std::vector<double> deltas;
        deltas.reserve(ts.size() - 1);
        for (size_t i = 1; i < ts.size(); ++i) deltas.push_back(ts[i] - ts[i - 1]);
        double mean = 0.0;
        for (double d : deltas) mean += d;
        mean /= static_cast<double>(deltas.size());
        double ss = 0.0;
        for (double d : deltas) ss += (d - mean) * (d - mean);
        double sigma = std::sqrt(ss / static_cast<double>(deltas.size()));
        out[label] = {mean, sigma, deltas.size()};
    }
    return out;
}

ExperimentResult transportability_experiment(const LabeledDataset& train_corpus,
                                             const LabeledDataset& test_corpus,
                                             const std::string& device_type,
                                             TransportMode mode, const EvalSettings& s) {
    if (!(train_corpus.schema == test_corpus.schema))
        throw SchemaMismatchError("corpora use different feature schemas");
    std::vector<std::string> test_types = test_corpus.class_names();
    if (std::find(test_types.begin(), test_types.end(), device_type) == test_types.end())
        throw InvalidSpecError("device type absent from test corpus: " + device_type);

    LabeledDataset working = mode == TransportMode::left_out
                                 ? filter_label(train_corpus, device_type)
                                 : train_corpus;
    SplitResult split = temporal_split(working, s.split);
    LabeledDataset capped = undersample(
        split.train, s.cap_per_class, derive_seed(s.hyperparams.rng_seed, kUndersampleTag));
    Forest forest = train_forest(capped, s.hyperparams);
    TuningReport tuning = tune_threshold(forest, split.validation, s.beta, s.grid_step);

    WhiteListModel model;
    model.forest = std::move(forest);
    model.white_list = model.forest.class_names;
    model.tr = tuning.tr_star;
    model.beta = s.beta;

    std::vector<StreamTrace> traces = make_traces(model, test_corpus);
    WindowedMetrics m = windowed_metrics(traces, model.white_list, s.window);
    return result_from_metrics(mode == TransportMode::left_out ? device_type : "",
                               model.tr, std::move(m));
}

nlohmann::json experiment_to_json(const ExperimentResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t i = 0; i < r.confusion.labels.size(); ++i) {
        rows.push_back({{"actual", r.confusion.labels[i]},
                        {"counts", r.confusion.counts[i]},
                        {"accuracy", r.confusion.row_accuracy(i)}});
    }
    return nlohmann::json{
        {"left_out_type", r.left_out_type},
        {"tr_star", r.tr_star},
        {"n_test_sessions", r.n_test_sessions},
        {"detected_unknown_rate", r.detected_unknown_rate},
        {"weighted_whitelisted_accuracy", r.weighted_whitelisted_accuracy},
        {"confusion", {{"labels", r.confusion.labels}, {"rows", rows}}},
    };
}

nlohmann::json roc_to_json(const RocCurve& roc) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : roc.points)
        pts.push_back({{"tr", p.tr}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    return nlohmann::json{{"auc", roc.auc}, {"points", std::move(pts)}};
}

} // namespace iotwl
