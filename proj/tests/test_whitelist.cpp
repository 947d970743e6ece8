#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"
#include "iotwl/rng.hpp"
#include "iotwl/whitelist.hpp"
#include "test_util.hpp"

using namespace iotwl;

namespace {

TempDir tmp;

FeatureSchema schema1() {
    FeatureSchema s;
    s.version = 1;
    s.names = {"f0"};
    return s;
}

TreeNode leaf(std::vector<uint64_t> counts) {
    TreeNode n;
    n.class_counts = std::move(counts);
    return n;
}

TreeNode inner(int f, double thr, int l, int r) {
    TreeNode n;
    n.feature_index = f;
    n.threshold = thr;
    n.left = l;
    n.right = r;
    return n;
}

// One leaf per forest: posterior is the normalized counts for every input.
WhiteListModel flat_model(std::vector<uint64_t> counts, double tr) {
    WhiteListModel m;
    m.forest.schema = schema1();
    m.forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(leaf(std::move(counts)));
    m.forest.trees.push_back(std::move(t));
    m.white_list = m.forest.class_names;
    m.tr = tr;
    return m;
}

// x=0 -> certain "a", x=1 -> 50/50 (rejected), x=2 -> certain "b".
WhiteListModel step_model(double tr) {
    WhiteListModel m;
    m.forest.schema = schema1();
    m.forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(inner(0, 0.5, 1, 2));
    t.nodes.push_back(leaf({1, 0}));
    t.nodes.push_back(inner(0, 1.5, 3, 4));
    t.nodes.push_back(leaf({1, 1}));
    t.nodes.push_back(leaf({0, 1}));
    m.forest.trees.push_back(std::move(t));
    m.white_list = m.forest.class_names;
    m.tr = tr;
    return m;
}

FeatureVector fx(double v, std::string stream = "10.0.0.1", double at = 0.0) {
    FeatureVector f;
    f.values = {v};
    f.stream_id = std::move(stream);
    f.start_time = at;
    return f;
}

StreamVerdict verdict(std::string stream, std::string decision, bool provisional,
                      double at = 0.0) {
    StreamVerdict v;
    v.stream_id = std::move(stream);
    v.decision = std::move(decision);
    v.provisional = provisional;
    v.decided_at = at;
    return v;
}

} // namespace

TEST_CASE("f_beta closed-form values and edge cases") {
    CHECK(f_beta(1.0, 0.5, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f_beta(0.5, 1.0, 2.0) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(f_beta(0.0, 0.0, 1.0) == 0.0);
    CHECK(f_beta(0.0, 1.0, 1.0) == 0.0);
    CHECK(f_beta(1.0, 1.0, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    // F1 is symmetric in precision and recall
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        double p = rng.uniform01(), r = rng.uniform01();
        double beta = 0.25 + rng.uniform01() * 4.0;
        CHECK(f_beta(p, r, 1.0) == doctest::Approx(f_beta(r, p, 1.0)).epsilon(1e-12));
        long double b2 = static_cast<long double>(beta) * beta;
        long double want = (1.0L + b2) * p * r / (b2 * p + r);
        CHECK(f_beta(p, r, beta) == doctest::Approx(static_cast<double>(want)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(f_beta(0.5, 0.5, 0.0), InvalidSpecError);
    CHECK_THROWS_AS(f_beta(0.5, 0.5, -1.0), InvalidSpecError);
}

TEST_CASE("classify_session acceptance is strictly greater-than") {
    WhiteListModel m = flat_model({3, 1}, 0.75);
    SessionVerdict v = classify_session(m, fx(0.0, "10.9.9.9", 42.5));
    CHECK(v.decision == "UNKNOWN"); // 0.75 > 0.75 fails
    REQUIRE(v.posterior.size() == 2);
    CHECK(v.posterior[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(v.stream_id == "10.9.9.9");
    CHECK(v.start_time == 42.5);

    m.tr = 0.74;
    CHECK(classify_session(m, fx(0.0)).decision == "a");
    m.tr = 0.0;
    CHECK(classify_session(m, fx(0.0)).decision == "a");
    m.tr = 1.0;
    CHECK(classify_session(m, fx(0.0)).decision == "UNKNOWN");
}

TEST_CASE("posterior ties resolve to the first white-list entry") {
    WhiteListModel m = flat_model({2, 2}, 0.4);
    CHECK(classify_session(m, fx(0.0)).decision == "a");
}

TEST_CASE("per-tree normalization, not count pooling") {
    WhiteListModel m = flat_model({3, 1}, 0.0);
    Tree t2;
    t2.nodes.push_back(leaf({1, 1}));
    m.forest.trees.push_back(std::move(t2));
    SessionVerdict v = classify_session(m, fx(0.0));
    // (0.75,0.25) + (0.5,0.5), normalized: 0.625 -- pooling counts would say 4/6
    CHECK(v.posterior[0] == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(v.posterior[1] == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("majority_decide worked example") {
    auto [d, tally] = majority_decide({"watch", "watch", "TV", "watch", "socket"},
                                      {"TV", "socket", "watch"});
    CHECK(d == "watch");
    CHECK(tally.at("watch") == 3);
    CHECK(tally.at("TV") == 1);
    CHECK(tally.at("socket") == 1);
}

TEST_CASE("majority_decide tie rules") {
    // UNKNOWN wins any tie at the max
    auto [d1, t1] = majority_decide({"UNKNOWN", "UNKNOWN", "watch", "watch", "TV"},
                                    {"TV", "watch"});
    CHECK(d1 == "UNKNOWN");

    // known-known ties follow white_list order, not lexicographic
    auto [d2, t2] = majority_decide({"TV", "socket", "TV", "socket"}, {"socket", "TV"});
    CHECK(d2 == "socket");
    auto [d3, t3] = majority_decide({"TV", "socket", "TV", "socket"}, {"TV", "socket"});
    CHECK(d3 == "TV");

    // labels absent from the current white list fall back to smallest label
    auto [d4, t4] = majority_decide({"zed", "alpha"}, {"TV"});
    CHECK(d4 == "alpha");
    auto [d5, t5] = majority_decide({"old_x", "old_x"}, {"TV"});
    CHECK(d5 == "old_x");

    auto [d6, t6] = majority_decide({"UNKNOWN"}, {"TV"});
    CHECK(d6 == "UNKNOWN");
}

TEST_CASE("majority_decide agrees with a recount oracle") {
    const std::vector<std::string> pool = {"UNKNOWN", "tv", "plug", "cam", "zz_stale"};
    const std::vector<std::string> wl = {"tv", "plug", "cam"};
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t w = 1 + rng.uniform_u64(9);
        std::vector<std::string> window;
        for (size_t i = 0; i < w; ++i) window.push_back(pool[rng.uniform_u64(pool.size())]);

        std::map<std::string, uint64_t> counts;
        for (const auto& s : window) ++counts[s];
        uint64_t mx = 0;
        for (const auto& [k, v] : counts) mx = std::max(mx, v);
        std::string want;
        if (counts.count("UNKNOWN") && counts["UNKNOWN"] == mx) {
            want = "UNKNOWN";
        } else {
            for (const auto& label : wl)
                if (counts.count(label) && counts[label] == mx) { want = label; break; }
            if (want.empty())
                for (const auto& [k, v] : counts)
                    if (v == mx) { want = k; break; } // std::map iterates smallest-first
        }

        auto [got, tally] = majority_decide(window, wl);
        CHECK(got == want);
        CHECK(tally == counts);
    }
}

TEST_CASE("stream classifier: provisional fill, then a sliding window") {
    WhiteListModel m = step_model(0.6);
    StreamClassifier sc(m, "10.1.1.1", 3);

    StreamVerdict v = sc.push(fx(0.0, "10.1.1.1", 1.0));
    CHECK(v.provisional);
    CHECK(v.window == std::vector<std::string>{"a"});
    CHECK(v.decision == "a");
    CHECK(v.decided_at == 1.0);

    v = sc.push(fx(1.0, "10.1.1.1", 2.0)); // rejected session
    CHECK(v.provisional);
    CHECK(v.window == std::vector<std::string>{"a", "UNKNOWN"});
    CHECK(v.decision == "UNKNOWN"); // tie at 1 prefers UNKNOWN

    v = sc.push(fx(0.0, "10.1.1.1", 3.0));
    CHECK_FALSE(v.provisional);
    CHECK(v.window == std::vector<std::string>{"a", "UNKNOWN", "a"});
    CHECK(v.decision == "a");

    v = sc.push(fx(2.0, "10.1.1.1", 4.0)); // oldest "a" slides out
    CHECK_FALSE(v.provisional);
    CHECK(v.window == std::vector<std::string>{"UNKNOWN", "a", "b"});
    CHECK(v.decision == "UNKNOWN");
    CHECK(v.tally.at("UNKNOWN") == 1);
    CHECK(sc.stream_id() == "10.1.1.1");

    CHECK_THROWS_AS(StreamClassifier(m, "x", 0), InvalidSpecError);
}

TEST_CASE("classify_stream matches manual pushes") {
    WhiteListModel m = step_model(0.6);
    std::vector<FeatureVector> xs = {fx(0.0, "10.2.2.2", 1.0), fx(2.0, "10.2.2.2", 2.0),
                                     fx(2.0, "10.2.2.2", 3.0), fx(1.0, "10.2.2.2", 4.0)};
    std::vector<StreamVerdict> got = classify_stream(m, xs, 2);
    REQUIRE(got.size() == 4);
    StreamClassifier sc(m, "10.2.2.2", 2);
    for (size_t i = 0; i < xs.size(); ++i) {
        StreamVerdict want = sc.push(xs[i]);
        CHECK(got[i].decision == want.decision);
        CHECK(got[i].window == want.window);
        CHECK(got[i].provisional == want.provisional);
    }
    CHECK(classify_stream(m, {}, 2).empty());
}

TEST_CASE("alert emitter is edge-triggered per stream") {
    AlertEmitter em(7);

    CHECK(!em.push(verdict("s1", "UNKNOWN", true)).has_value()); // provisional: ignored
    auto a = em.push(verdict("s1", "UNKNOWN", false, 10.0));
    REQUIRE(a.has_value());
    CHECK(a->stream_id == "s1");
    CHECK(a->decided_at == 10.0);
    CHECK(a->decision == "UNKNOWN");
    CHECK(a->model_version == 7);

    CHECK(!em.push(verdict("s1", "UNKNOWN", false)).has_value()); // still unknown
    CHECK(!em.push(verdict("s1", "tv", false)).has_value());      // re-arms
    CHECK(em.push(verdict("s1", "UNKNOWN", false)).has_value());  // fires again

    // a provisional verdict must not re-arm the stream
    CHECK(!em.push(verdict("s1", "tv", true)).has_value());
    CHECK(!em.push(verdict("s1", "UNKNOWN", false)).has_value());

    // streams are independent
    CHECK(em.push(verdict("s2", "UNKNOWN", false)).has_value());
    CHECK(!em.push(verdict("s2", "UNKNOWN", false)).has_value());

    Alert alert{"s9", 3.5, "UNKNOWN", {{"UNKNOWN", 2ull}, {"tv", 1ull}}, 7};
    nlohmann::json j = alert_to_json(alert);
    CHECK(j.at("stream_id") == "s9");
    CHECK(j.at("decided_at") == 3.5);
    CHECK(j.at("tally").at("UNKNOWN") == 2);
    CHECK(j.at("model_version") == 7);
}

TEST_CASE("tune_threshold sweeps the grid and picks the largest tied tr") {
    Forest forest;
    forest.schema = schema1();
    forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(inner(0, 0.5, 1, 2));
    t.nodes.push_back(leaf({3, 1})); // p = (0.75, 0.25)
    t.nodes.push_back(leaf({1, 4})); // p = (0.2, 0.8)
    forest.trees.push_back(std::move(t));

    LabeledDataset val;
    val.schema = schema1();
    auto add = [&](double x, const std::string& label) {
        FeatureVector fv;
        fv.values = {x};
        fv.label = label;
        val.rows.push_back(fv);
    };
    add(0.0, "a"); // accepted as a (correct), max_prob 0.75
    add(0.0, "b"); // accepted as a (wrong),   max_prob 0.75
    add(1.0, "b"); // accepted as b (correct), max_prob 0.8

    TuningReport rep = tune_threshold(forest, val, 1.0, 0.25);
    REQUIRE(rep.curve.size() == 5);
    CHECK(rep.beta == 1.0);
    const double wp_low = (1.0 * 0.5 + 2.0 * 1.0) / 3.0; // support-weighted precision
    const double wr_low = (1.0 * 1.0 + 2.0 * 0.5) / 3.0;
    for (size_t i = 0; i < 3; ++i) { // tr = 0, 0.25, 0.5 accept all rows
        CHECK(rep.curve[i].tr == doctest::Approx(0.25 * static_cast<double>(i)));
        CHECK(rep.curve[i].precision == doctest::Approx(wp_low).epsilon(1e-12));
        CHECK(rep.curve[i].recall == doctest::Approx(wr_low).epsilon(1e-12));
        CHECK(rep.curve[i].f_beta ==
              doctest::Approx(f_beta(wp_low, wr_low, 1.0)).epsilon(1e-12));
    }
    // tr = 0.75 rejects the 0.75-confidence rows
    CHECK(rep.curve[3].tr == 0.75);
    CHECK(rep.curve[3].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.curve[3].recall == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // tr = 1.0 rejects everything
    CHECK(rep.curve[4].tr == 1.0);
    CHECK(rep.curve[4].precision == 0.0);
    CHECK(rep.curve[4].recall == 0.0);
    CHECK(rep.curve[4].f_beta == 0.0);

    // best F ties across {0, 0.25, 0.5}; the scan keeps the largest
    CHECK(rep.tr_star == 0.5);
}

TEST_CASE("tune_threshold input validation") {
    Forest forest;
    forest.schema = schema1();
    forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(leaf({1, 1}));
    forest.trees.push_back(std::move(t));

    LabeledDataset val;
    val.schema = schema1();
    CHECK_THROWS_AS(tune_threshold(forest, val, 1.0, 0.1), EmptyValidationError);

    FeatureVector fv;
    fv.values = {0.0};
    fv.label = "a";
    val.rows.push_back(fv);
    CHECK_THROWS_AS(tune_threshold(forest, val, 1.0, 0.0), InvalidSpecError);
    CHECK_THROWS_AS(tune_threshold(forest, val, 1.0, 1.0), InvalidSpecError);

    LabeledDataset stranger = val;
    stranger.rows[0].label = "who";
    CHECK_THROWS_AS(tune_threshold(forest, stranger, 1.0, 0.1), InvalidSpecError);

    LabeledDataset wrong = val;
    wrong.schema.names = {"other"};
    CHECK_THROWS_AS(tune_threshold(forest, wrong, 1.0, 0.1), SchemaMismatchError);
}

TEST_CASE("model json round trip, file io, and tamper detection") {
    WhiteListModel m = step_model(0.62);
    m.beta = 0.5;
    m.version = 3;

    const std::string path = tmp.path("model.json");
    save_model(m, path);
    WhiteListModel back = load_model(path);
    CHECK(back.tr == 0.62);
    CHECK(back.beta == 0.5);
    CHECK(back.version == 3);
    CHECK(back.white_list == m.white_list);
    CHECK(forest_to_json(back.forest).dump() == forest_to_json(m.forest).dump());
    for (double x : {0.0, 1.0, 2.0}) {
        CHECK(classify_session(back, fx(x)).decision == classify_session(m, fx(x)).decision);
    }

    nlohmann::json j = model_to_json(m);
    nlohmann::json bad = j;
    bad["white_list"] = {"a"};
    CHECK_THROWS_AS(model_from_json(bad), MalformedFileError);
    bad = j;
    bad["tr"] = 1.5;
    CHECK_THROWS_AS(model_from_json(bad), MalformedFileError);
    bad = j;
    bad["tr"] = -0.1;
    CHECK_THROWS_AS(model_from_json(bad), MalformedFileError);
    bad = j;
    bad["format"] = "iotwl-forest";
    CHECK_THROWS_AS(model_from_json(bad), MalformedFileError);
    bad = j;
    bad.erase("beta");
    CHECK_THROWS_AS(model_from_json(bad), MalformedFileError);

    CHECK_THROWS_AS(load_model(tmp.path("no_model.json")), IoError);
    const std::string garbled = tmp.path("garbled.json");
    write_file_text(garbled, "{not json");
    CHECK_THROWS_AS(load_model(garbled), MalformedFileError);
}

TEST_CASE("UNKNOWN label constant") {
    CHECK(kUnknownLabel == "UNKNOWN");
}
