#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"
#include "iotwl/evaluation.hpp"
#include "iotwl/rng.hpp"

using namespace iotwl;

namespace {

FeatureSchema schema_d(size_t d) {
    FeatureSchema s;
    s.version = 1;
    for (size_t i = 0; i < d; ++i) s.names.push_back("f" + std::to_string(i));
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

FeatureVector row1(double v, std::string label, std::string stream, double at) {
    FeatureVector f;
    f.values = {v};
    f.label = std::move(label);
    f.stream_id = std::move(stream);
    f.start_time = at;
    return f;
}

// x=0 -> a with 0.9, x=1 -> 0.55 toss-up, x=2 -> b with 0.9
WhiteListModel wide_step_model(double tr) {
    WhiteListModel m;
    m.forest.schema = schema_d(1);
    m.forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(inner(0, 0.5, 1, 2));
    t.nodes.push_back(leaf({9, 1}));
    t.nodes.push_back(inner(0, 1.5, 3, 4));
    t.nodes.push_back(leaf({11, 9}));
    t.nodes.push_back(leaf({1, 9}));
    m.forest.trees.push_back(std::move(t));
    m.white_list = m.forest.class_names;
    m.tr = tr;
    return m;
}

// Three well-separated types, two streams each. Rates are not asserted here;
// the geometry just has to keep training and tuning happy.
LabeledDataset mini_corpus(uint64_t seed) {
    Rng rng(seed);
    LabeledDataset ds;
    ds.schema = schema_d(2);
    const char* types[3] = {"alpha", "beta", "gamma"};
    for (int t = 0; t < 3; ++t) {
        for (int dev = 0; dev < 2; ++dev) {
            std::string stream = "10." + std::to_string(t) + "." + std::to_string(dev) + ".1";
            for (int k = 0; k < 30; ++k) {
                FeatureVector fv;
                fv.values = {t * 2.0 + rng.uniform01() * 0.6 - 0.3,
                             rng.uniform01() * 4.0};
                fv.label = types[t];
                fv.stream_id = stream;
                fv.start_time = k * 1.0;
                ds.rows.push_back(std::move(fv));
            }
        }
    }
    return ds;
}

EvalSettings mini_settings(uint64_t seed) {
    EvalSettings s;
    s.hyperparams.n_trees = 15;
    s.hyperparams.rng_seed = seed;
    s.window = 3;
    s.grid_step = 0.1;
    return s;
}

std::string oracle_majority(const std::vector<std::string>& win,
                            const std::vector<std::string>& wl) {
    std::map<std::string, uint64_t> c;
    for (const auto& s : win) ++c[s];
    uint64_t mx = 0;
    for (const auto& [k, v] : c) mx = std::max(mx, v);
    if (c.count("UNKNOWN") && c["UNKNOWN"] == mx) return "UNKNOWN";
    for (const auto& l : wl)
        if (c.count(l) && c[l] == mx) return l;
    for (const auto& [k, v] : c)
        if (v == mx) return k;
    return "UNKNOWN";
}

} // namespace

TEST_CASE("temporal_split floors per stream and orders by time") {
    LabeledDataset ds;
    ds.schema = schema_d(1);
    // stream A: 10 rows in reverse time order; stream B: 7 rows
    for (int k = 9; k >= 0; --k) ds.rows.push_back(row1(k, "x", "streamA", k * 10.0));
    for (int k = 0; k < 7; ++k) ds.rows.push_back(row1(k, "y", "streamB", k * 10.0));

    SplitResult sr = temporal_split(ds);
    auto count_stream = [](const LabeledDataset& part, const std::string& id) {
        size_t n = 0;
        for (const auto& r : part.rows) n += r.stream_id == id;
        return n;
    };
    CHECK(count_stream(sr.train, "streamA") == 3);      // floor(10/3)
    CHECK(count_stream(sr.validation, "streamA") == 3);
    CHECK(count_stream(sr.test, "streamA") == 4);
    CHECK(count_stream(sr.train, "streamB") == 2);      // floor(7/3)
    CHECK(count_stream(sr.validation, "streamB") == 2);
    CHECK(count_stream(sr.test, "streamB") == 3);
    CHECK(sr.train.rows.size() + sr.validation.rows.size() + sr.test.rows.size() ==
          ds.rows.size());

    // every train row precedes every validation row of its stream, and so on
    auto max_time = [](const LabeledDataset& part, const std::string& id) {
        double mx = -1e300;
        for (const auto& r : part.rows)
            if (r.stream_id == id) mx = std::max(mx, r.start_time);
        return mx;
    };
    auto min_time = [](const LabeledDataset& part, const std::string& id) {
        double mn = 1e300;
        for (const auto& r : part.rows)
            if (r.stream_id == id) mn = std::min(mn, r.start_time);
        return mn;
    };
    for (const std::string id : {"streamA", "streamB"}) {
        CHECK(max_time(sr.train, id) < min_time(sr.validation, id));
        CHECK(max_time(sr.validation, id) < min_time(sr.test, id));
    }

    SplitSpec custom{0.5, 0.25, 0.25};
    LabeledDataset eight;
    eight.schema = schema_d(1);
    for (int k = 0; k < 8; ++k) eight.rows.push_back(row1(k, "x", "s", k * 1.0));
    SplitResult sr2 = temporal_split(eight, custom);
    CHECK(sr2.train.rows.size() == 4);
    CHECK(sr2.validation.rows.size() == 2);
    CHECK(sr2.test.rows.size() == 2);

    CHECK_THROWS_AS(temporal_split(ds, SplitSpec{0.5, 0.3, 0.1}), InvalidSpecError);
    CHECK_THROWS_AS(temporal_split(ds, SplitSpec{0.0, 0.5, 0.5}), InvalidSpecError);
    CHECK_THROWS_AS(temporal_split(ds, SplitSpec{-0.2, 0.6, 0.6}), InvalidSpecError);
}

TEST_CASE("temporal_split keeps input order for tied timestamps") {
    LabeledDataset ds;
    ds.schema = schema_d(1);
    ds.rows.push_back(row1(0.0, "r0", "s", 5.0));
    ds.rows.push_back(row1(1.0, "r1", "s", 5.0));
    ds.rows.push_back(row1(2.0, "r2", "s", 5.0));
    SplitResult sr = temporal_split(ds);
    REQUIRE(sr.train.rows.size() == 1);
    CHECK(sr.train.rows[0].label == "r0");
    CHECK(sr.validation.rows[0].label == "r1");
    CHECK(sr.test.rows[0].label == "r2");
}

TEST_CASE("confusion matrix bookkeeping") {
    ConfusionMatrix cm;
    cm.labels = {"a", "b", "UNKNOWN"};
    cm.counts = {{8, 1, 1}, {0, 5, 0}, {2, 0, 6}};
    CHECK(cm.row_sum(0) == 10);
    CHECK(cm.row_sum(1) == 5);
    CHECK(cm.row_accuracy(0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(cm.row_accuracy(1) == 1.0);
    CHECK(cm.row_accuracy(2) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(cm.total() == 23);
    CHECK(cm.index_of("b") == 1);
    CHECK(cm.index_of("UNKNOWN") == 2);
    CHECK(cm.index_of("zz") == static_cast<size_t>(-1));

    ConfusionMatrix empty_row;
    empty_row.labels = {"a"};
    empty_row.counts = {{0}};
    CHECK(empty_row.row_accuracy(0) == 0.0);
}

TEST_CASE("windowed_metrics agrees with an independent recount") {
    const std::vector<std::string> wl = {"tv", "plug"};
    const std::vector<std::string> actual_pool = {"tv", "plug", "ghost", ""};
    const std::vector<std::string> decision_pool = {"tv", "plug", "UNKNOWN"};
    Rng rng(88);

    std::vector<StreamTrace> traces;
    for (size_t lens : {60u, 9u, 2u}) {
        StreamTrace t;
        t.stream_id = "s" + std::to_string(lens);
        for (size_t i = 0; i < lens; ++i) {
            t.seq.emplace_back(actual_pool[rng.uniform_u64(actual_pool.size())],
                               decision_pool[rng.uniform_u64(decision_pool.size())]);
        }
        traces.push_back(std::move(t));
    }

    for (size_t w : {1u, 3u, 5u, 7u}) {
        WindowedMetrics m = windowed_metrics(traces, wl, w);

        std::map<std::string, std::map<std::string, uint64_t>> want; // actual -> verdict
        uint64_t n_windows = 0;
        for (const auto& t : traces) {
            std::deque<std::string> win;
            for (const auto& [actual, decision] : t.seq) {
                win.push_back(decision);
                if (win.size() > w) win.pop_front();
                if (win.size() < w) continue;
                ++n_windows;
                std::string verdict = oracle_majority({win.begin(), win.end()}, wl);
                std::string row = (actual == "tv" || actual == "plug") ? actual : "UNKNOWN";
                ++want[row][verdict];
            }
        }

        REQUIRE(m.confusion.labels == std::vector<std::string>{"tv", "plug", "UNKNOWN"});
        CHECK(m.n_windows == n_windows);
        for (size_t i = 0; i < 3; ++i) {
            for (size_t j = 0; j < 3; ++j) {
                uint64_t expect = 0;
                auto it = want.find(m.confusion.labels[i]);
                if (it != want.end()) {
                    auto jt = it->second.find(m.confusion.labels[j]);
                    if (jt != it->second.end()) expect = jt->second;
                }
                CHECK(m.confusion.counts[i][j] == expect);
            }
        }
        uint64_t unk_total = m.confusion.row_sum(2);
        CHECK(m.n_unknown_windows == unk_total);
        if (unk_total)
            CHECK(m.unknown_rate ==
                  doctest::Approx(static_cast<double>(m.confusion.counts[2][2]) /
                                  static_cast<double>(unk_total))
                      .epsilon(1e-12));
        else
            CHECK(m.unknown_rate == 1.0);
        uint64_t wh_total = m.confusion.row_sum(0) + m.confusion.row_sum(1);
        CHECK(m.n_whitelisted_windows == wh_total);
        if (wh_total)
            CHECK(m.whitelisted_accuracy ==
                  doctest::Approx(static_cast<double>(m.confusion.counts[0][0] +
                                                      m.confusion.counts[1][1]) /
                                  static_cast<double>(wh_total))
                      .epsilon(1e-12));
        else
            CHECK(m.whitelisted_accuracy == 1.0);
    }

    // a window longer than every trace leaves both rates vacuous
    WindowedMetrics vac = windowed_metrics(traces, wl, 100);
    CHECK(vac.n_windows == 0);
    CHECK(vac.unknown_rate == 1.0);
    CHECK(vac.whitelisted_accuracy == 1.0);

    CHECK_THROWS_AS(windowed_metrics(traces, wl, 0), InvalidSpecError);
}

TEST_CASE("make_traces groups streams and sorts by time") {
    WhiteListModel m;
    m.forest.schema = schema_d(1);
    m.forest.class_names = {"a", "b"};
    Tree t;
    t.nodes.push_back(inner(0, 0.5, 1, 2));
    t.nodes.push_back(leaf({1, 0}));
    t.nodes.push_back(inner(0, 1.5, 3, 4));
    t.nodes.push_back(leaf({1, 1}));
    t.nodes.push_back(leaf({0, 1}));
    m.forest.trees.push_back(std::move(t));
    m.white_list = m.forest.class_names;
    m.tr = 0.6;

    LabeledDataset ds;
    ds.schema = schema_d(1);
    ds.rows.push_back(row1(0.0, "la", "10.0.0.2", 3.0));
    ds.rows.push_back(row1(2.0, "lb", "10.0.0.2", 1.0));
    ds.rows.push_back(row1(1.0, "lc", "10.0.0.2", 2.0));
    ds.rows.push_back(row1(2.0, "lb", "10.0.0.1", 9.0));

    std::vector<StreamTrace> traces = make_traces(m, ds);
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].stream_id == "10.0.0.1");
    REQUIRE(traces[0].seq.size() == 1);
    CHECK(traces[0].seq[0] == std::pair<std::string, std::string>{"lb", "b"});
    CHECK(traces[1].stream_id == "10.0.0.2");
    REQUIRE(traces[1].seq.size() == 3);
    CHECK(traces[1].seq[0] == std::pair<std::string, std::string>{"lb", "b"});
    CHECK(traces[1].seq[1] == std::pair<std::string, std::string>{"lc", "UNKNOWN"});
    CHECK(traces[1].seq[2] == std::pair<std::string, std::string>{"la", "a"});

    LabeledDataset wrong = ds;
    wrong.schema.names = {"zz"};
    CHECK_THROWS_AS(make_traces(m, wrong), SchemaMismatchError);
}

TEST_CASE("roc on a separable model has unit area") {
    WhiteListModel m = wide_step_model(0.5);

    LabeledDataset eval;
    eval.schema = schema_d(1);
    for (int i = 0; i < 10; ++i) {
        eval.rows.push_back(row1(0.0, "a", "s1", i));      // negative, max 0.9
        eval.rows.push_back(row1(2.0, "b", "s2", i));      // negative, max 0.9
        eval.rows.push_back(row1(1.0, "ghost", "s3", i));  // positive, max 0.55
    }
    RocCurve roc = compute_roc(m.forest, eval, 0.05);
    CHECK(roc.auc == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(roc.points.size() == 21);
    CHECK(roc.points.front().tr == 0.0);
    CHECK(roc.points.front().fpr == 0.0);
    CHECK(roc.points.front().tpr == 0.0);
    CHECK(roc.points.back().tr == 1.0);
    CHECK(roc.points.back().fpr == 1.0);
    CHECK(roc.points.back().tpr == 1.0);
    for (size_t i = 0; i + 1 < roc.points.size(); ++i) {
        CHECK(roc.points[i + 1].tr > roc.points[i].tr);
        CHECK(roc.points[i + 1].fpr >= roc.points[i].fpr);
        CHECK(roc.points[i + 1].tpr >= roc.points[i].tpr);
    }
    // the rejection rule is strict >, so tr = 0.55 already rejects the positives
    size_t at55 = 11;
    CHECK(roc.points[at55].tr == doctest::Approx(0.55));
    CHECK(roc.points[at55].tpr == 1.0);
    CHECK(roc.points[at55].fpr == 0.0);
    CHECK(roc.points[10].tpr == 0.0); // tr = 0.50 still accepts them

    // AUC always equals the trapezoid recount of the returned points
    double auc = 0.0;
    for (size_t i = 0; i + 1 < roc.points.size(); ++i) {
        auc += (roc.points[i + 1].fpr - roc.points[i].fpr) *
               (roc.points[i].tpr + roc.points[i + 1].tpr) / 2.0;
    }
    CHECK(roc.auc == doctest::Approx(auc).epsilon(1e-12));
}

TEST_CASE("roc input validation") {
    WhiteListModel m = wide_step_model(0.5);
    LabeledDataset eval;
    eval.schema = schema_d(1);
    eval.rows.push_back(row1(0.0, "a", "s", 0.0));
    CHECK_THROWS_AS(compute_roc(m.forest, eval, 0.1), OneSidedDataError); // no positives

    LabeledDataset only_pos;
    only_pos.schema = schema_d(1);
    only_pos.rows.push_back(row1(1.0, "ghost", "s", 0.0));
    CHECK_THROWS_AS(compute_roc(m.forest, only_pos, 0.1), OneSidedDataError);

    eval.rows.push_back(row1(1.0, "ghost", "s", 1.0));
    CHECK_THROWS_AS(compute_roc(m.forest, eval, 0.0), InvalidSpecError);
    CHECK_THROWS_AS(compute_roc(m.forest, eval, 1.0), InvalidSpecError);

    LabeledDataset wrong = eval;
    wrong.schema.names = {"zz"};
    CHECK_THROWS_AS(compute_roc(m.forest, wrong, 0.1), SchemaMismatchError);
}

TEST_CASE("inter-arrival statistics") {
    LabeledDataset ds;
    ds.schema = schema_d(1);
    // x: unsorted on purpose; starts {0,1,3,6} -> deltas {1,2,3}
    ds.rows.push_back(row1(0.0, "x", "s", 3.0));
    ds.rows.push_back(row1(0.0, "x", "s", 0.0));
    ds.rows.push_back(row1(0.0, "x", "s", 6.0));
    ds.rows.push_back(row1(0.0, "x", "s", 1.0));
    // grid: exact 0.25 spacing
    for (int i = 0; i < 12; ++i) ds.rows.push_back(row1(0.0, "grid", "g", i * 0.25));
    // single session: omitted
    ds.rows.push_back(row1(0.0, "lonely", "l", 5.0));

    std::map<std::string, InterArrival> stats = inter_arrival_stats(ds);
    CHECK(stats.size() == 2);
    CHECK(stats.count("lonely") == 0);
    REQUIRE(stats.count("x") == 1);
    CHECK(stats["x"].n_deltas == 3);
    CHECK(stats["x"].mean == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(stats["x"].sigma == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    REQUIRE(stats.count("grid") == 1);
    CHECK(stats["grid"].n_deltas == 11);
    CHECK(stats["grid"].mean == 0.25);
    CHECK(stats["grid"].sigma == 0.0); // exact: every delta is the same double
}

TEST_CASE("derive_seed is deterministic and collision-free over streams") {
    CHECK(derive_seed(42, 7) == derive_seed(42, 7));
    std::set<uint64_t> seen;
    for (uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));
    CHECK(derive_seed(0, 0) != 0);
}

TEST_CASE("train_loo_model excludes the left-out type from the white list") {
    LabeledDataset ds = mini_corpus(1);
    EvalSettings s = mini_settings(10);
    LooModel lm = train_loo_model(ds, "beta", s);
    CHECK(lm.model.white_list == std::vector<std::string>{"alpha", "gamma"});
    CHECK(lm.model.forest.class_names == lm.model.white_list);
    CHECK(lm.model.tr == lm.tuning.tr_star);
    CHECK(lm.model.tr >= 0.0);
    CHECK(lm.model.tr <= 1.0);
    CHECK(lm.tuning.curve.size() == 11); // grid_step 0.1
    // the test split keeps all three types
    std::set<std::string> test_labels;
    for (const auto& r : lm.test.rows) test_labels.insert(r.label);
    CHECK(test_labels == std::set<std::string>{"alpha", "beta", "gamma"});
    // 6 streams x 30 rows -> 10 test rows each
    CHECK(lm.test.rows.size() == 60);

    LabeledDataset one_type;
    one_type.schema = ds.schema;
    for (const auto& r : ds.rows)
        if (r.label == "alpha") one_type.rows.push_back(r);
    CHECK_THROWS_AS(train_loo_model(one_type, "alpha", s), InsufficientDataError);
}

TEST_CASE("run_all_experiments: one per type, reseeded, summarized") {
    LabeledDataset ds = mini_corpus(2);
    EvalSettings s = mini_settings(42);
    AllExperiments all = run_all_experiments(ds, s);
    REQUIRE(all.results.size() == 3);
    CHECK(all.results[0].left_out_type == "alpha");
    CHECK(all.results[1].left_out_type == "beta");
    CHECK(all.results[2].left_out_type == "gamma");

    for (const auto& r : all.results) {
        // full windows: 6 streams x (10 - 3 + 1)
        CHECK(r.n_test_sessions == 48);
        CHECK(r.confusion.labels.size() == 3); // two survivors + UNKNOWN
        CHECK(r.confusion.labels.back() == "UNKNOWN");
        CHECK(r.tr_star >= 0.0);
        CHECK(r.tr_star <= 1.0);
        CHECK(r.confusion.total() == r.n_test_sessions);
    }

    // the i-th experiment is the standalone experiment under derive_seed(seed, i)
    for (size_t i = 0; i < 3; ++i) {
        EvalSettings si = s;
        si.hyperparams.rng_seed = derive_seed(s.hyperparams.rng_seed, i);
        ExperimentResult solo =
            leave_one_out_experiment(ds, all.results[i].left_out_type, si);
        CHECK(solo.tr_star == all.results[i].tr_star);
        CHECK(solo.detected_unknown_rate == all.results[i].detected_unknown_rate);
        CHECK(solo.weighted_whitelisted_accuracy ==
              all.results[i].weighted_whitelisted_accuracy);
        CHECK(solo.confusion.counts == all.results[i].confusion.counts);
    }

    // summary = mean / sample std of the per-type rates
    auto mean_std = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::pair<double, double>{mean,
                                         std::sqrt(ss / static_cast<double>(v.size() - 1))};
    };
    std::vector<double> unk, wh;
    for (const auto& r : all.results) {
        unk.push_back(r.detected_unknown_rate);
        wh.push_back(r.weighted_whitelisted_accuracy);
    }
    auto [mu, su] = mean_std(unk);
    auto [mw, sw] = mean_std(wh);
    CHECK(all.summary.mean_unknown == doctest::Approx(mu).epsilon(1e-12));
    CHECK(all.summary.std_unknown == doctest::Approx(su).epsilon(1e-12));
    CHECK(all.summary.mean_whitelisted == doctest::Approx(mw).epsilon(1e-12));
    CHECK(all.summary.std_whitelisted == doctest::Approx(sw).epsilon(1e-12));

    AllExperiments again = run_all_experiments(ds, s);
    CHECK(again.summary.mean_unknown == all.summary.mean_unknown);
    CHECK(again.summary.mean_whitelisted == all.summary.mean_whitelisted);
    for (size_t i = 0; i < 3; ++i)
        CHECK(again.results[i].confusion.counts == all.results[i].confusion.counts);
}

TEST_CASE("accuracy_vs_window sweeps a shared model") {
    LabeledDataset ds = mini_corpus(3);
    EvalSettings s = mini_settings(17);
    CHECK_THROWS_AS(accuracy_vs_window(ds, "beta", {5, 3, 1}, s), InvalidSpecError);

    std::vector<WindowPoint> pts = accuracy_vs_window(ds, "beta", {1, 3, 5}, s);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].w == 1);
    CHECK(pts[1].w == 3);
    CHECK(pts[2].w == 5);
    CHECK(pts[0].n_windows >= pts[1].n_windows);
    CHECK(pts[1].n_windows >= pts[2].n_windows);

    // each point equals a direct evaluation with that window
    LooModel lm = train_loo_model(ds, "beta", s);
    std::vector<StreamTrace> traces = make_traces(lm.model, lm.test);
    for (const auto& p : pts) {
        WindowedMetrics m = windowed_metrics(traces, lm.model.white_list, p.w);
        CHECK(p.unknown_rate == m.unknown_rate);
        CHECK(p.whitelisted_accuracy == m.whitelisted_accuracy);
        CHECK(p.n_windows == m.n_windows);
    }
}

TEST_CASE("minimal_perfect_window returns the smallest qualifying width") {
    LabeledDataset ds = mini_corpus(4);
    EvalSettings s = mini_settings(23);
    CHECK_THROWS_AS(minimal_perfect_window(ds, "beta", 0, s), InvalidSpecError);

    const size_t w_max = 6;
    std::optional<size_t> got = minimal_perfect_window(ds, "beta", w_max, s);

    LooModel lm = train_loo_model(ds, "beta", s);
    std::vector<StreamTrace> traces = make_traces(lm.model, lm.test);
    auto perfect = [&](size_t w) {
        WindowedMetrics m = windowed_metrics(traces, lm.model.white_list, w);
        return m.n_unknown_windows > 0 && m.n_whitelisted_windows > 0 &&
               m.unknown_rate == 1.0 && m.whitelisted_accuracy == 1.0;
    };
    if (got) {
        CHECK(*got >= 1);
        CHECK(*got <= w_max);
        CHECK(perfect(*got));
        for (size_t w = 1; w < *got; ++w) CHECK_FALSE(perfect(w));
    } else {
        for (size_t w = 1; w <= w_max; ++w) CHECK_FALSE(perfect(w));
    }
}

TEST_CASE("transportability: modes, labels, validation") {
    LabeledDataset train = mini_corpus(5);
    LabeledDataset test = mini_corpus(6); // same families, fresh devices
    EvalSettings s = mini_settings(31);

    ExperimentResult left_out =
        transportability_experiment(train, test, "beta", TransportMode::left_out, s);
    CHECK(left_out.left_out_type == "beta");
    CHECK(left_out.confusion.labels ==
          std::vector<std::string>{"alpha", "gamma", "UNKNOWN"});
    CHECK(left_out.n_test_sessions == 6 * 28); // full corpus, windows of 3 over 30 rows

    ExperimentResult listed =
        transportability_experiment(train, test, "beta", TransportMode::white_listed, s);
    CHECK(listed.left_out_type.empty());
    CHECK(listed.confusion.labels ==
          std::vector<std::string>{"alpha", "beta", "gamma", "UNKNOWN"});

    LabeledDataset wrong = test;
    wrong.schema.names[0] = "zz";
    CHECK_THROWS_AS(
        transportability_experiment(train, wrong, "beta", TransportMode::left_out, s),
        SchemaMismatchError);
    CHECK_THROWS_AS(
        transportability_experiment(train, test, "nope", TransportMode::left_out, s),
        InvalidSpecError);
}

TEST_CASE("experiment and roc json shapes") {
    ExperimentResult r;
    r.left_out_type = "beta";
    r.tr_star = 0.87;
    r.n_test_sessions = 48;
    r.detected_unknown_rate = 1.0;
    r.weighted_whitelisted_accuracy = 0.975;
    r.confusion.labels = {"alpha", "UNKNOWN"};
    r.confusion.counts = {{39, 1}, {0, 8}};
    nlohmann::json j = experiment_to_json(r);
    CHECK(j.at("left_out_type") == "beta");
    CHECK(j.at("tr_star") == 0.87);
    CHECK(j.at("n_test_sessions") == 48);
    CHECK(j.at("detected_unknown_rate") == 1.0);
    CHECK(j.at("confusion").at("labels").size() == 2);
    CHECK(j.at("confusion").at("rows")[0].at("actual") == "alpha");
    CHECK(j.at("confusion").at("rows")[0].at("counts")[0] == 39);
    CHECK(j.at("confusion").at("rows")[0].at("accuracy").get<double>() ==
          doctest::Approx(39.0 / 40.0).epsilon(1e-12));

    RocCurve roc;
    roc.points = {{0.0, 0.0, 0.0}, {0.25, 1.0, 0.5}, {1.0, 1.0, 1.0}};
    roc.auc = 0.9;
    nlohmann::json rj = roc_to_json(roc);
    CHECK(rj.at("auc") == 0.9);
    REQUIRE(rj.at("points").size() == 3);
    CHECK(rj.at("points")[1].at("fpr") == 0.25);
    CHECK(rj.at("points")[1].at("tpr") == 1.0);
    CHECK(rj.at("points")[1].at("tr") == 0.5);
}
