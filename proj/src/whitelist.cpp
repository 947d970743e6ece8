#include "iotwl/whitelist.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"

namespace iotwl {

double f_beta(double precision, double recall, double beta) {
    if (!(beta > 0.0)) throw InvalidSpecError("beta must be > 0");
    double b2 = beta * beta;
    double denom = b2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + b2) * precision * recall / denom;
}

SessionVerdict classify_session(const WhiteListModel& model, const FeatureVector& x) {
    SessionVerdict v;
    v.posterior = predict_posterior(model.forest, x.values);
    v.stream_id = x.stream_id;
    v.start_time = x.start_time;
    size_t best = 0;
    for (size_t i = 1; i < v.posterior.size(); ++i)
        if (v.posterior[i] > v.posterior[best]) best = i; // ties keep white_list order
    if (!v.posterior.empty() && v.posterior[best] > model.tr)
        v.decision = model.white_list[best];
    else
        v.decision = kUnknownLabel;
    return v;
}

TuningReport tune_threshold(const Forest& forest, const LabeledDataset& validation,
                            double beta, double grid_step) {
    if (validation.rows.empty()) throw EmptyValidationError("empty validation set");
    if (!(grid_step > 0.0 && grid_step < 1.0))
        throw InvalidSpecError("grid_step must be in (0,1)");
    if (!(validation.schema == forest.schema))
        throw SchemaMismatchError("validation schema differs from forest schema");

    size_t n_classes = forest.class_names.size();
    struct Cached {
        double max_prob;
        uint32_t argmax;
        uint32_t truth;
    };
    std::vector<Cached> cache;
    cache.reserve(validation.rows.size());
    for (const auto& row : validation.rows) {
        size_t truth = forest.class_index(row.label);
        if (truth == static_cast<size_t>(-1))
            throw InvalidSpecError("validation label outside white list: " + row.label);
        std::vector<double> p = predict_posterior(forest, row.values);
        size_t best = 0;
        for (size_t i = 1; i < p.size(); ++i)
            if (p[i] > p[best]) best = i;
        cache.push_back({p[best], static_cast<uint32_t>(best), static_cast<uint32_t>(truth)});
    }

    std::vector<double> grid;
    for (size_t i = 0; i * grid_step < 1.0; ++i)
        grid.push_back(static_cast<double>(i) * grid_step);
    grid.push_back(1.0);

    TuningReport report;
    report.beta = beta;
    std::vector<uint64_t> support(n_classes, 0);
    for (const Cached& c : cache) ++support[c.truth];

    for (double tr : grid) {
        std::vector<uint64_t> tp(n_classes, 0), fp(n_classes, 0);
        for (const Cached& c : cache) {
            if (c.max_prob > tr) {
                if (c.argmax == c.truth)
                    ++tp[c.argmax];
                else
                    ++fp[c.argmax];
            }
            // rejected rows count against their true class's recall only
        }
        double wp = 0.0, wr = 0.0;
        uint64_t total = 0;
        for (size_t c = 0; c < n_classes; ++c) {
            if (support[c] == 0) continue;
            double prec = (tp[c] + fp[c]) ? static_cast<double>(tp[c]) /
                                                static_cast<double>(tp[c] + fp[c])
                                          : 0.0;
            double rec = static_cast<double>(tp[c]) / static_cast<double>(support[c]);
            wp += static_cast<double>(support[c]) * prec;
            wr += static_cast<double>(support[c]) * rec;
            total += support[c];
        }
        wp /= static_cast<double>(total);
        wr /= static_cast<double>(total);
        report.curve.push_back({tr, wp, wr, f_beta(wp, wr, beta)});
    }

    size_t best = 0;
    for (size_t i = 0; i < report.curve.size(); ++i)
        if (report.curve[i].f_beta >= report.curve[best].f_beta) best = i; // ties: largest tr
    report.tr_star = report.curve[best].tr;
    return report;
}

std::pair<std::string, std::map<std::string, uint64_t>>
majority_decide(const std::vector<std::string>& window,
                const std::vector<std::string>& white_list) {
    std::map<std::string, uint64_t> tally;
    for (const auto& d : window) ++tally[d];
    uint64_t max_count = 0;
    for (const auto& [label, n] : tally) max_count = std::max(max_count, n);

    auto unknown = tally.find(kUnknownLabel);
    if (unknown != tally.end() && unknown->second == max_count)
        return {kUnknownLabel, tally};
    for (const auto& label : white_list) {
        auto it = tally.find(label);
        if (it != tally.end() && it->second == max_count) return {label, tally};
    }
    // window may predate the current white list; fall back to smallest label
    for (const auto& [label, n] : tally)
        if (n == max_count) return {label, tally};
    return {kUnknownLabel, tally};
}

StreamClassifier::StreamClassifier(const WhiteListModel& model, std::string stream_id,
                                   size_t window_size)
    : model_(&model), stream_id_(std::move(stream_id)), w_(window_size) {
    if (window_size < 1) throw InvalidSpecError("window_size must be >= 1");
}

StreamVerdict StreamClassifier::push(const FeatureVector& x) {
    SessionVerdict sv = classify_session(*model_, x);
    window_.push_back(sv.decision);
    if (window_.size() > w_) window_.pop_front();

    StreamVerdict out;
    out.stream_id = stream_id_;
    out.window.assign(window_.begin(), window_.end());
    out.decided_at = x.start_time;
    out.provisional = window_.size() < w_;
    auto [decision, tally] = majority_decide(out.window, model_->white_list);
    out.decision = std::move(decision);
    out.tally = std::move(tally);
    return out;
}

std::vector<StreamVerdict> classify_stream(const WhiteListModel& model,
                                           const std::vector<FeatureVector>& sessions,
                                           size_t window_size) {
    std::vector<StreamVerdict> out;
    if (sessions.empty()) return out;
    StreamClassifier sc(model, sessions.front().stream_id, window_size);
    out.reserve(sessions.size());
    for (const auto& s : sessions) out.push_back(sc.push(s));
    return out;
}

std::optional<Alert> AlertEmitter::push(const StreamVerdict& v) {
    if (v.provisional) return std::nullopt;
    bool now_unknown = v.decision == kUnknownLabel;
    auto it = stream_unknown_.find(v.stream_id);
    bool was_unknown = it != stream_unknown_.end() && it->second;
    stream_unknown_[v.stream_id] = now_unknown;
    if (now_unknown && !was_unknown)
        return Alert{v.stream_id, v.decided_at, v.decision, v.tally, model_version_};
    return std::nullopt;
}

nlohmann::json alert_to_json(const Alert& a) {
    return nlohmann::json{{"stream_id", a.stream_id},
                          {"decided_at", a.decided_at},
                          {"decision", a.decision},
                          {"tally", a.tally},
                          {"model_version", a.model_version}};
}

nlohmann::json model_to_json(const WhiteListModel& m) {
    return nlohmann::json{{"format", "iotwl-model"},
                          {"version", m.version},
                          {"forest", forest_to_json(m.forest)},
                          {"white_list", m.white_list},
                          {"tr", m.tr},
                          {"beta", m.beta}};
}

WhiteListModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "iotwl-model")
            throw MalformedFileError("not a model document");
        WhiteListModel m;
        m.version = j.at("version").get<int>();
        m.forest = forest_from_json(j.at("forest"));
        m.white_list = j.at("white_list").get<std::vector<std::string>>();
        m.tr = j.at("tr").get<double>();
        m.beta = j.at("beta").get<double>();
        if (m.white_list != m.forest.class_names)
            throw MalformedFileError("white_list does not match forest classes");
        if (!(m.tr >= 0.0 && m.tr <= 1.0))
            throw MalformedFileError("tr outside [0,1]");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError(std::string("bad model document: ") + e.what());
    }
}

void save_model(const WhiteListModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model: " + path);
    out << model_to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

WhiteListModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError(path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace iotwl
