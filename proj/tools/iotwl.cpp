#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iotwl/dataset.hpp"
#include "iotwl/errors.hpp"
#include "iotwl/evaluation.hpp"
#include "iotwl/features.hpp"
#include "iotwl/forest.hpp"
#include "iotwl/pcap.hpp"
#include "iotwl/rng.hpp"
#include "iotwl/session.hpp"
#include "iotwl/synth.hpp"
#include "iotwl/whitelist.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr uint64_t kUndersampleTag = 1'000'000'007ULL;

template <typename T>
void apply_cfg(const json& cfg, const CLI::Option* opt, const char* key, T& out) {
    if (opt != nullptr && opt->count() > 0) return; // flag wins over config
    if (!cfg.is_object() || !cfg.contains(key)) return;
    try {
        out = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw iotwl::InvalidSpecError(std::string("config key '") + key + "': " + e.what());
    }
}

struct HpOpts {
    int n_trees = 500;
    int max_depth = 0;
    int min_leaf_size = 1;
    int features_per_split = 0;
    double beta = 1.0;
    double grid_step = 0.01;
    size_t cap_per_class = 2000;
    CLI::Option *o_nt = nullptr, *o_md = nullptr, *o_ml = nullptr, *o_fps = nullptr,
                *o_beta = nullptr, *o_gs = nullptr, *o_cap = nullptr;

    void add(CLI::App* sub) {
        o_nt = sub->add_option("--n-trees", n_trees, "forest size");
        o_md = sub->add_option("--max-depth", max_depth, "0 = unlimited");
        o_ml = sub->add_option("--min-leaf", min_leaf_size, "min rows per leaf");
        o_fps = sub->add_option("--features-per-split", features_per_split,
                                "0 = ceil(sqrt(d))");
        o_beta = sub->add_option("--beta", beta, "F-beta weight");
        o_gs = sub->add_option("--grid-step", grid_step, "threshold grid step");
        o_cap = sub->add_option("--cap", cap_per_class, "undersampling cap per class");
    }
    void from_cfg(const json& cfg) {
        apply_cfg(cfg, o_nt, "n_trees", n_trees);
        apply_cfg(cfg, o_md, "max_depth", max_depth);
        apply_cfg(cfg, o_ml, "min_leaf_size", min_leaf_size);
        apply_cfg(cfg, o_fps, "features_per_split", features_per_split);
        apply_cfg(cfg, o_beta, "beta", beta);
        apply_cfg(cfg, o_gs, "grid_step", grid_step);
        apply_cfg(cfg, o_cap, "cap_per_class", cap_per_class);
    }
    iotwl::ForestHyperparams hyperparams(uint64_t seed) const {
        return {n_trees, max_depth, min_leaf_size, features_per_split, seed};
    }
};

// "-" means stdout
struct Sink {
    explicit Sink(const std::string& target) {
        if (target != "-") {
            file = std::make_unique<std::ofstream>(target);
            if (!*file) throw iotwl::IoError("cannot write: " + target);
        }
    }
    std::ostream& out() { return file ? *file : std::cout; }
    std::unique_ptr<std::ofstream> file;
};

iotwl::LabeledDataset extract_pcap(const std::string& pcap_path,
                                   const std::string& ranks_path, double idle_timeout,
                                   bool quiet) {
    iotwl::ParseCounters pc;
    std::vector<iotwl::PacketRecord> packets = iotwl::parse_capture(pcap_path, nullptr, &pc);
    iotwl::ReconstructCounters rc;
    std::vector<iotwl::Session> sessions =
        iotwl::reconstruct_sessions(packets, idle_timeout, &rc);
    iotwl::RankTable ranks =
        ranks_path.empty() ? iotwl::RankTable{} : iotwl::RankTable::load_csv(ranks_path);
    iotwl::LabeledDataset ds;
    ds.schema = iotwl::FeatureSchema::v1();
    ds.rows.reserve(sessions.size());
    for (const iotwl::Session& s : sessions)
        ds.rows.push_back(iotwl::extract_features(s, ranks, ds.schema));
    if (!quiet)
        std::cerr << "records=" << pc.records << " accepted=" << pc.accepted
                  << " skipped=" << pc.skipped << " truncated=" << pc.truncated
                  << " sessions=" << sessions.size() << " dropped=" << rc.dropped << '\n';
    return ds;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw iotwl::IoError("cannot write: " + path);
    out << text;
    if (!out) throw iotwl::IoError("write failed: " + path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"White-list based detection of unauthorized IoT device types"};
    app.require_subcommand(1);
    app.fallthrough(); // --seed etc. may follow the subcommand

    std::string config_path;
    uint64_t seed = 0;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON config with flat keys");
    CLI::Option* o_seed = app.add_option("--seed", seed, "master RNG seed");
    app.add_flag("--quiet", quiet, "suppress progress output");

    // extract
    auto* c_extract = app.add_subcommand("extract", "pcap -> per-session feature CSV");
    std::string ex_pcap, ex_ranks, ex_out;
    double ex_idle = 300.0;
    c_extract->add_option("--pcap", ex_pcap, "classic pcap input")->required();
    CLI::Option* ex_o_ranks = c_extract->add_option("--ranks", ex_ranks, "hostname rank CSV");
    c_extract->add_option("--out", ex_out, "output dataset CSV")->required();
    CLI::Option* ex_o_idle = c_extract->add_option("--idle-timeout", ex_idle, "seconds");

    // train
    auto* c_train = app.add_subcommand("train", "dataset CSV -> white-list model JSON");
    std::string tr_data, tr_val, tr_out;
    HpOpts tr_hp;
    c_train->add_option("--data", tr_data, "labeled dataset CSV")->required();
    c_train->add_option("--validation", tr_val,
                        "pre-split validation CSV (default: temporal split of --data)");
    c_train->add_option("--out", tr_out, "output model JSON")->required();
    tr_hp.add(c_train);

    // classify
    auto* c_classify = app.add_subcommand("classify", "stream verdicts + alerts (JSON lines)");
    std::string cl_model, cl_data, cl_pcap, cl_ranks, cl_verdicts = "-", cl_alerts = "-";
    size_t cl_window = 20;
    double cl_idle = 300.0;
    c_classify->add_option("--model", cl_model, "model JSON")->required();
    c_classify->add_option("--data", cl_data, "dataset CSV to classify");
    c_classify->add_option("--pcap", cl_pcap, "classify a capture instead of a CSV");
    CLI::Option* cl_o_ranks = c_classify->add_option("--ranks", cl_ranks, "hostname rank CSV");
    CLI::Option* cl_o_window = c_classify->add_option("--window", cl_window, "voting window");
    CLI::Option* cl_o_idle = c_classify->add_option("--idle-timeout", cl_idle, "seconds");
    c_classify->add_option("--verdicts", cl_verdicts, "verdict sink, '-' = stdout");
    CLI::Option* cl_o_alerts = c_classify->add_option("--alerts", cl_alerts,
                                                      "alert sink, '-' = stdout");

    // evaluate
    auto* c_eval = app.add_subcommand("evaluate", "experiment harness, writes report files");
    std::string ev_data, ev_mode, ev_out_dir = ".", ev_left_out, ev_test_data;
    std::string ev_transport_mode = "left_out";
    std::vector<size_t> ev_windows = {1, 2, 3, 5, 10, 20, 35, 55, 80, 110};
    size_t ev_w_max = 110, ev_window = 20;
    HpOpts ev_hp;
    c_eval->add_option("--data", ev_data, "labeled corpus CSV")->required();
    c_eval->add_option("--mode", ev_mode, "loo_all|window_curve|roc|transport|sstar")
        ->required()
        ->check(CLI::IsMember({"loo_all", "window_curve", "roc", "transport", "sstar"}));
    c_eval->add_option("--out-dir", ev_out_dir, "report directory");
    c_eval->add_option("--left-out", ev_left_out, "device type excluded from the white list");
    c_eval->add_option("--test-data", ev_test_data, "transport mode: evaluation corpus CSV");
    c_eval->add_option("--transport-mode", ev_transport_mode, "left_out|white_listed")
        ->check(CLI::IsMember({"left_out", "white_listed"}));
    c_eval->add_option("--windows", ev_windows, "window sizes for window_curve")
        ->delimiter(',');
    c_eval->add_option("--w-max", ev_w_max, "sstar scan limit");
    CLI::Option* ev_o_window = c_eval->add_option("--window", ev_window, "voting window");
    ev_hp.add(c_eval);

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "generate a synthetic corpus");
    std::string sm_spec, sm_preset = "default", sm_out, sm_pcap, sm_write_spec, sm_ranks_out;
    double sm_duration = -1.0;
    c_sim->add_option("--spec", sm_spec, "corpus spec JSON");
    c_sim->add_option("--preset", sm_preset, "default|disjoint (when no --spec)")
        ->check(CLI::IsMember({"default", "disjoint"}));
    c_sim->add_option("--out", sm_out, "output dataset CSV")->required();
    c_sim->add_option("--pcap", sm_pcap, "also write a pcap fixture");
    c_sim->add_option("--write-spec", sm_write_spec, "save the effective spec JSON");
    c_sim->add_option("--ranks-out", sm_ranks_out, "save the spec's rank table CSV");
    CLI::Option* sm_o_duration = c_sim->add_option("--duration", sm_duration,
                                                   "override simulated seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        json cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw iotwl::IoError("cannot open config: " + config_path);
            try {
                in >> cfg;
            } catch (const json::exception& e) {
                throw iotwl::MalformedFileError(config_path + ": " + e.what());
            }
        }
        apply_cfg(cfg, o_seed, "seed", seed);

        if (c_extract->parsed()) {
            apply_cfg(cfg, ex_o_ranks, "rank_table", ex_ranks);
            apply_cfg(cfg, ex_o_idle, "idle_timeout", ex_idle);
            iotwl::LabeledDataset ds = extract_pcap(ex_pcap, ex_ranks, ex_idle, quiet);
            iotwl::save_dataset_csv(ds, ex_out);
            if (!quiet) std::cerr << "rows=" << ds.rows.size() << " -> " << ex_out << '\n';
        } else if (c_train->parsed()) {
            tr_hp.from_cfg(cfg);
            iotwl::LabeledDataset data = iotwl::load_dataset_csv(tr_data);
            iotwl::LabeledDataset train_set, val_set;
            if (tr_val.empty()) {
                iotwl::SplitResult split = iotwl::temporal_split(data);
                train_set = std::move(split.train);
                val_set = std::move(split.validation);
            } else {
                train_set = std::move(data);
                val_set = iotwl::load_dataset_csv(tr_val);
            }
            iotwl::LabeledDataset capped = iotwl::undersample(
                train_set, tr_hp.cap_per_class, iotwl::derive_seed(seed, kUndersampleTag));
            std::vector<std::string> warnings;
            iotwl::Forest forest =
                iotwl::train_forest(capped, tr_hp.hyperparams(seed), &warnings);
            for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
            iotwl::TuningReport tuning =
                iotwl::tune_threshold(forest, val_set, tr_hp.beta, tr_hp.grid_step);

            iotwl::WhiteListModel model;
            model.forest = std::move(forest);
            model.white_list = model.forest.class_names;
            model.tr = tuning.tr_star;
            model.beta = tr_hp.beta;
            iotwl::save_model(model, tr_out);
            if (!quiet) {
                double best_f = 0.0;
                for (const auto& p : tuning.curve)
                    if (p.tr == tuning.tr_star) best_f = p.f_beta;
                std::cerr << "classes=" << model.white_list.size()
                          << " train_rows=" << capped.rows.size()
                          << " tr_star=" << tuning.tr_star << " f_beta=" << best_f
                          << " -> " << tr_out << '\n';
            }
        } else if (c_classify->parsed()) {
            apply_cfg(cfg, cl_o_ranks, "rank_table", cl_ranks);
            apply_cfg(cfg, cl_o_window, "window", cl_window);
            apply_cfg(cfg, cl_o_idle, "idle_timeout", cl_idle);
            apply_cfg(cfg, cl_o_alerts, "alert_sink", cl_alerts);
            if (cl_data.empty() == cl_pcap.empty())
                throw iotwl::InvalidSpecError("classify needs exactly one of --data / --pcap");
            iotwl::WhiteListModel model = iotwl::load_model(cl_model);
            iotwl::LabeledDataset ds = cl_data.empty()
                                           ? extract_pcap(cl_pcap, cl_ranks, cl_idle, quiet)
                                           : iotwl::load_dataset_csv(cl_data);
            if (!(ds.schema == model.forest.schema))
                throw iotwl::SchemaMismatchError("input schema differs from model schema");

            std::map<std::string, std::vector<size_t>> streams;
            for (size_t i = 0; i < ds.rows.size(); ++i)
                streams[ds.rows[i].stream_id].push_back(i);

            Sink verdict_sink(cl_verdicts), alert_sink(cl_alerts);
            iotwl::AlertEmitter emitter(model.version);
            bool both_stdout = cl_verdicts == "-" && cl_alerts == "-";
            uint64_t n_verdicts = 0, n_alerts = 0;
            for (auto& [id, idx] : streams) {
                std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
                    return ds.rows[a].start_time < ds.rows[b].start_time;
                });
                iotwl::StreamClassifier sc(model, id, cl_window);
                for (size_t i : idx) {
                    iotwl::StreamVerdict v = sc.push(ds.rows[i]);
                    json jv{{"stream_id", v.stream_id},
                            {"decided_at", v.decided_at},
                            {"decision", v.decision},
                            {"provisional", v.provisional},
                            {"tally", v.tally}};
                    if (both_stdout) jv["record"] = "verdict";
                    verdict_sink.out() << jv.dump() << '\n';
                    ++n_verdicts;
                    if (auto alert = emitter.push(v)) {
                        json ja = iotwl::alert_to_json(*alert);
                        if (both_stdout) ja["record"] = "alert";
                        alert_sink.out() << ja.dump() << '\n';
                        ++n_alerts;
                    }
                }
            }
            if (!quiet)
                std::cerr << "streams=" << streams.size() << " verdicts=" << n_verdicts
                          << " alerts=" << n_alerts << '\n';
        } else if (c_eval->parsed()) {
            ev_hp.from_cfg(cfg);
            apply_cfg(cfg, ev_o_window, "window", ev_window);
            iotwl::LabeledDataset data = iotwl::load_dataset_csv(ev_data);
            iotwl::EvalSettings s;
            s.hyperparams = ev_hp.hyperparams(seed);
            s.beta = ev_hp.beta;
            s.window = ev_window;
            s.grid_step = ev_hp.grid_step;
            s.cap_per_class = ev_hp.cap_per_class;
            fs::create_directories(ev_out_dir);
            auto out_path = [&](const std::string& name) {
                return (fs::path(ev_out_dir) / name).string();
            };

            if (ev_mode == "loo_all") {
                iotwl::AllExperiments all = iotwl::run_all_experiments(data, s);
                std::string csv =
                    "left_out_type,tr_star,n_windows,detected_unknown_rate,"
                    "weighted_whitelisted_accuracy\n";
                for (const auto& r : all.results) {
                    write_text(out_path("experiment_" + r.left_out_type + ".json"),
                               iotwl::experiment_to_json(r).dump(2) + "\n");
                    csv += r.left_out_type + ',' + iotwl::format_double(r.tr_star) + ',' +
                           std::to_string(r.n_test_sessions) + ',' +
                           iotwl::format_double(r.detected_unknown_rate) + ',' +
                           iotwl::format_double(r.weighted_whitelisted_accuracy) + '\n';
                }
                csv += "mean,,," + iotwl::format_double(all.summary.mean_unknown) + ',' +
                       iotwl::format_double(all.summary.mean_whitelisted) + '\n';
                csv += "stddev,,," + iotwl::format_double(all.summary.std_unknown) + ',' +
                       iotwl::format_double(all.summary.std_whitelisted) + '\n';
                write_text(out_path("summary.csv"), csv);

                std::string ia = "type,mean_seconds,sigma_seconds,n_deltas\n";
                for (const auto& [type, st] : iotwl::inter_arrival_stats(data))
                    ia += type + ',' + iotwl::format_double(st.mean) + ',' +
                          iotwl::format_double(st.sigma) + ',' +
                          std::to_string(st.n_deltas) + '\n';
                write_text(out_path("inter_arrival.csv"), ia);
                if (!quiet)
                    std::cerr << "experiments=" << all.results.size()
                              << " mean_unknown=" << all.summary.mean_unknown
                              << " mean_whitelisted=" << all.summary.mean_whitelisted
                              << '\n';
            } else if (ev_mode == "window_curve") {
                if (!ev_left_out.empty()) {
                    std::vector<iotwl::WindowPoint> pts =
                        iotwl::accuracy_vs_window(data, ev_left_out, ev_windows, s);
                    std::string csv = "w,unknown_rate,whitelisted_accuracy,n_windows\n";
                    for (const auto& p : pts)
                        csv += std::to_string(p.w) + ',' +
                               iotwl::format_double(p.unknown_rate) + ',' +
                               iotwl::format_double(p.whitelisted_accuracy) + ',' +
                               std::to_string(p.n_windows) + '\n';
                    write_text(out_path("window_curve_" + ev_left_out + ".csv"), csv);
                } else {
                    std::vector<std::string> types = data.class_names();
                    std::vector<std::vector<iotwl::WindowPoint>> cols;
                    for (size_t i = 0; i < types.size(); ++i) {
                        iotwl::EvalSettings si = s;
                        si.hyperparams.rng_seed = iotwl::derive_seed(seed, i);
                        cols.push_back(
                            iotwl::accuracy_vs_window(data, types[i], ev_windows, si));
                    }
                    std::string csv = "w";
                    for (const auto& t : types) csv += ',' + t;
                    csv += '\n';
                    for (size_t r = 0; r < ev_windows.size(); ++r) {
                        csv += std::to_string(ev_windows[r]);
                        for (const auto& col : cols)
                            csv += ',' + iotwl::format_double(col[r].unknown_rate);
                        csv += '\n';
                    }
                    write_text(out_path("window_curve.csv"), csv);
                }
            } else if (ev_mode == "roc") {
                if (ev_left_out.empty())
                    throw iotwl::InvalidSpecError("roc mode needs --left-out");
                iotwl::SplitResult split = iotwl::temporal_split(data, s.split);
                iotwl::LabeledDataset train;
                train.schema = split.train.schema;
                for (const auto& r : split.train.rows)
                    if (r.label != ev_left_out) train.rows.push_back(r);
                iotwl::LabeledDataset capped = iotwl::undersample(
                    train, s.cap_per_class, iotwl::derive_seed(seed, kUndersampleTag));
                iotwl::Forest forest = iotwl::train_forest(capped, s.hyperparams);
                iotwl::RocCurve roc =
                    iotwl::compute_roc(forest, split.validation, s.grid_step);
                write_text(out_path("roc_" + ev_left_out + ".json"),
                           iotwl::roc_to_json(roc).dump(2) + "\n");
                if (!quiet) std::cerr << "auc=" << roc.auc << '\n';
            } else if (ev_mode == "sstar") {
                if (ev_left_out.empty())
                    throw iotwl::InvalidSpecError("sstar mode needs --left-out");
                std::optional<size_t> sstar =
                    iotwl::minimal_perfect_window(data, ev_left_out, ev_w_max, s);
                json j{{"left_out_type", ev_left_out}, {"w_max", ev_w_max}};
                j["s_star"] = sstar ? json(*sstar) : json(nullptr);
                write_text(out_path("sstar_" + ev_left_out + ".json"), j.dump(2) + "\n");
                if (!quiet) {
                    if (sstar)
                        std::cerr << "s_star=" << *sstar << '\n';
                    else
                        std::cerr << "s_star not found up to w_max=" << ev_w_max << '\n';
                }
            } else if (ev_mode == "transport") {
                if (ev_left_out.empty() || ev_test_data.empty())
                    throw iotwl::InvalidSpecError(
                        "transport mode needs --left-out and --test-data");
                iotwl::LabeledDataset test_corpus = iotwl::load_dataset_csv(ev_test_data);
                iotwl::TransportMode mode = ev_transport_mode == "left_out"
                                                ? iotwl::TransportMode::left_out
                                                : iotwl::TransportMode::white_listed;
                iotwl::ExperimentResult r = iotwl::transportability_experiment(
                    data, test_corpus, ev_left_out, mode, s);
                write_text(out_path("transport_" + ev_left_out + ".json"),
                           iotwl::experiment_to_json(r).dump(2) + "\n");
                if (!quiet)
                    std::cerr << "unknown_rate=" << r.detected_unknown_rate
                              << " whitelisted_accuracy="
                              << r.weighted_whitelisted_accuracy << '\n';
            }
        } else if (c_sim->parsed()) {
            iotwl::CorpusSpec spec;
            if (!sm_spec.empty()) {
                spec = iotwl::load_spec(sm_spec);
                if (o_seed->count() > 0 || cfg.contains("seed")) spec.rng_seed = seed;
            } else {
                spec = sm_preset == "disjoint" ? iotwl::disjoint_corpus_spec(seed)
                                               : iotwl::default_corpus_spec(seed);
            }
            if (sm_o_duration->count() > 0) spec.duration = sm_duration;

            iotwl::LabeledDataset corpus = iotwl::generate_corpus(spec);
            iotwl::save_dataset_csv(corpus, sm_out);
            if (!sm_pcap.empty()) iotwl::generate_pcap_fixture(spec, sm_pcap);
            if (!sm_write_spec.empty()) iotwl::save_spec(spec, sm_write_spec);
            if (!sm_ranks_out.empty())
                iotwl::rank_table_from_spec(spec).save_csv(sm_ranks_out);
            if (!quiet)
                std::cerr << "profiles=" << spec.profiles.size()
                          << " sessions=" << corpus.rows.size() << " -> " << sm_out << '\n';
        }
        return 0;
    } catch (const iotwl::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
