#include "iotwl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "iotwl/errors.hpp"
#include "iotwl/rng.hpp"

namespace iotwl {

size_t Forest::class_index(const std::string& name) const {
    for (size_t i = 0; i < class_names.size(); ++i)
        if (class_names[i] == name) return i;
    return static_cast<size_t>(-1);
}

namespace {

struct TrainView {
    const std::vector<FeatureVector>* rows;
    std::vector<uint32_t> labels; // class ids aligned with rows
    size_t n_classes;
    size_t d;
    double at(size_t row, size_t f) const { return (*rows)[row].values[f]; }
};

struct BestSplit {
    double score = -1.0; // ssqL/nL + ssqR/nR, larger = lower weighted Gini
    int feature = -1;
    double threshold = 0.0;
};

// Scans boundaries between consecutive distinct values of one feature,
// maintaining sums of squared class counts incrementally (exact in u64).
void scan_feature(const TrainView& tv, std::vector<uint32_t>& idx, size_t f,
                  const std::vector<uint64_t>& node_counts, uint64_t node_ssq,
                  size_t min_leaf, BestSplit& best) {
    size_t n = idx.size();
    std::stable_sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
        return tv.at(a, f) < tv.at(b, f);
    });
    if (tv.at(idx.front(), f) == tv.at(idx.back(), f)) return;

    std::vector<uint64_t> left(tv.n_classes, 0);
    std::vector<uint64_t> right = node_counts;
    uint64_t ssq_l = 0, ssq_r = node_ssq;
    for (size_t i = 0; i + 1 < n; ++i) {
        uint32_t c = tv.labels[idx[i]];
        ssq_l += 2 * left[c] + 1;
        ++left[c];
        ssq_r -= 2 * right[c] - 1;
        --right[c];
        size_t n_l = i + 1, n_r = n - n_l;
        if (n_l < min_leaf || n_r < min_leaf) continue;
        double lo = tv.at(idx[i], f), hi = tv.at(idx[i + 1], f);
        if (lo == hi) continue;
        double score = static_cast<double>(ssq_l) / static_cast<double>(n_l) +
                       static_cast<double>(ssq_r) / static_cast<double>(n_r);
        if (score > best.score) {
            double mid = lo + (hi - lo) / 2.0;
            if (!(mid < hi)) mid = lo; // keep hi strictly on the right
            best = BestSplit{score, static_cast<int>(f), mid};
        }
    }
}

struct TreeBuilder {
    const TrainView& tv;
    Rng& rng;
    size_t k; // features sampled per node
    size_t min_leaf;
    int max_depth;
    Tree tree;

    int build(std::vector<uint32_t>& idx, int depth) {
        std::vector<uint64_t> counts(tv.n_classes, 0);
        for (uint32_t i : idx) ++counts[tv.labels[i]];
        uint64_t ssq = 0;
        size_t live = 0;
        for (uint64_t c : counts) {
            ssq += c * c;
            if (c) ++live;
        }

        bool stop = live <= 1 || idx.size() < 2 * min_leaf ||
                    (max_depth > 0 && depth >= max_depth);
        BestSplit best;
        if (!stop) {
            std::vector<size_t> feats = rng.sample_without_replacement(tv.d, k);
            for (size_t f : feats)
                scan_feature(tv, idx, static_cast<size_t>(f), counts, ssq, min_leaf, best);
            if (best.feature < 0 && feats.size() < tv.d) {
                for (size_t f = 0; f < tv.d; ++f)
                    scan_feature(tv, idx, f, counts, ssq, min_leaf, best);
            }
        }
        if (stop || best.feature < 0) {
            int id = static_cast<int>(tree.nodes.size());
            TreeNode leaf;
            leaf.class_counts = std::move(counts);
            tree.nodes.push_back(std::move(leaf));
            return id;
        }

        std::vector<uint32_t> left_idx, right_idx;
        left_idx.reserve(idx.size());
        for (uint32_t i : idx) {
            if (tv.at(i, static_cast<size_t>(best.feature)) <= best.threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[id].feature_index = best.feature;
        tree.nodes[id].threshold = best.threshold;
        int l = build(left_idx, depth + 1);
        int r = build(right_idx, depth + 1);
        tree.nodes[id].left = l;
        tree.nodes[id].right = r;
        return id;
    }
};

Tree build_tree(const TrainView& tv, uint64_t seed, size_t k, size_t min_leaf,
                int max_depth) {
    Rng rng(seed);
    size_t n = tv.rows->size();
    std::vector<uint32_t> bootstrap(n);
    for (size_t i = 0; i < n; ++i)
        bootstrap[i] = static_cast<uint32_t>(rng.uniform_u64(n));
    TreeBuilder b{tv, rng, k, min_leaf, max_depth, {}};
    b.build(bootstrap, 0);
    return std::move(b.tree);
}

double gini_from_counts(const std::vector<uint64_t>& counts, uint64_t n) {
    if (n == 0) return 0.0;
    uint64_t ssq = 0;
    for (uint64_t c : counts) ssq += c * c;
    return 1.0 - static_cast<double>(ssq) / (static_cast<double>(n) * static_cast<double>(n));
}

// Returns the node's class counts; adds its impurity-decrease contribution.
std::vector<uint64_t> node_importance(const Tree& t, int id, uint64_t n_root,
                                      std::vector<double>& acc) {
    const TreeNode& node = t.nodes[static_cast<size_t>(id)];
    if (node.is_leaf()) return node.class_counts;
    std::vector<uint64_t> lc = node_importance(t, node.left, n_root, acc);
    std::vector<uint64_t> rc = node_importance(t, node.right, n_root, acc);
    std::vector<uint64_t> counts(lc.size());
    uint64_t n_l = 0, n_r = 0;
    for (size_t i = 0; i < lc.size(); ++i) {
        counts[i] = lc[i] + rc[i];
        n_l += lc[i];
        n_r += rc[i];
    }
    uint64_t n = n_l + n_r;
    double decrease = gini_from_counts(counts, n) -
                      (static_cast<double>(n_l) / static_cast<double>(n)) * gini_from_counts(lc, n_l) -
                      (static_cast<double>(n_r) / static_cast<double>(n)) * gini_from_counts(rc, n_r);
    acc[static_cast<size_t>(node.feature_index)] +=
        (static_cast<double>(n) / static_cast<double>(n_root)) * decrease;
    return counts;
}

uint64_t tree_root_count(const Tree& t) {
    uint64_t n = 0;
    for (const TreeNode& node : t.nodes)
        if (node.is_leaf())
            n += std::accumulate(node.class_counts.begin(), node.class_counts.end(),
                                 uint64_t{0});
    return n;
}

} // namespace

std::vector<double> compute_importances(const Forest& forest) {
    size_t d = forest.schema.size();
    std::vector<double> total(d, 0.0);
    for (const Tree& t : forest.trees) {
        if (t.nodes.empty()) continue;
        uint64_t n_root = tree_root_count(t);
        if (n_root == 0) continue;
        std::vector<double> acc(d, 0.0);
        node_importance(t, 0, n_root, acc);
        for (size_t f = 0; f < d; ++f) total[f] += acc[f];
    }
    for (double& v : total) v /= static_cast<double>(forest.trees.size());
    double sum = std::accumulate(total.begin(), total.end(), 0.0);
    if (sum > 0.0)
        for (double& v : total) v /= sum;
    return total;
}

Forest train_forest(const LabeledDataset& data, ForestHyperparams hp,
                    std::vector<std::string>* warnings) {
    if (hp.n_trees < 1) throw InvalidSpecError("n_trees must be >= 1");
    if (hp.min_leaf_size < 1) throw InvalidSpecError("min_leaf_size must be >= 1");
    if (data.rows.empty()) throw InsufficientDataError("empty training dataset");

    Forest forest;
    forest.schema = data.schema;
    forest.class_names = data.class_names();
    if (forest.class_names.size() < 2)
        throw InsufficientDataError("training requires at least 2 classes, got " +
                                    std::to_string(forest.class_names.size()));

    TrainView tv;
    tv.rows = &data.rows;
    tv.n_classes = forest.class_names.size();
    tv.d = data.schema.size();
    tv.labels.resize(data.rows.size());
    std::vector<uint64_t> class_rows(tv.n_classes, 0);
    for (size_t i = 0; i < data.rows.size(); ++i) {
        const std::string& lab = data.rows[i].label;
        if (lab.empty()) throw InsufficientDataError("unlabeled row in training data");
        if (data.rows[i].values.size() != tv.d)
            throw SchemaMismatchError("row width does not match schema");
        size_t c = static_cast<size_t>(
            std::lower_bound(forest.class_names.begin(), forest.class_names.end(), lab) -
            forest.class_names.begin());
        tv.labels[i] = static_cast<uint32_t>(c);
        ++class_rows[c];
    }
    for (size_t c = 0; c < tv.n_classes; ++c) {
        if (class_rows[c] < static_cast<uint64_t>(hp.min_leaf_size))
            throw InsufficientDataError("class '" + forest.class_names[c] +
                                        "' has fewer rows than min_leaf_size");
    }

    bool all_identical = true;
    for (size_t i = 1; i < data.rows.size() && all_identical; ++i)
        all_identical = data.rows[i].values == data.rows[0].values;
    if (all_identical && warnings)
        warnings->push_back("degenerate features: all rows identical, trees are single leaves");

    size_t k = hp.features_per_split > 0
                   ? static_cast<size_t>(hp.features_per_split)
                   : static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(tv.d))));
    k = std::min(k, tv.d);

    forest.hyperparams = hp;
    forest.trees.resize(static_cast<size_t>(hp.n_trees));
    size_t n_threads = std::min<size_t>(std::thread::hardware_concurrency(),
                                        forest.trees.size());
    if (n_threads <= 1) {
        for (size_t t = 0; t < forest.trees.size(); ++t)
            forest.trees[t] = build_tree(tv, derive_seed(hp.rng_seed, t), k,
                                         static_cast<size_t>(hp.min_leaf_size), hp.max_depth);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t w = 0; w < n_threads; ++w) {
            pool.emplace_back([&, w] {
                for (size_t t = w; t < forest.trees.size(); t += n_threads)
                    forest.trees[t] =
                        build_tree(tv, derive_seed(hp.rng_seed, t), k,
                                   static_cast<size_t>(hp.min_leaf_size), hp.max_depth);
            });
        }
        for (auto& th : pool) th.join();
    }

    forest.importances = compute_importances(forest);
    return forest;
}

std::vector<double> predict_posterior(const Forest& forest, const std::vector<double>& x) {
    if (x.size() != forest.schema.size())
        throw SchemaMismatchError("feature vector width " + std::to_string(x.size()) +
                                  " != schema width " + std::to_string(forest.schema.size()));
    size_t n_classes = forest.class_names.size();
    std::vector<double> probs(n_classes, 0.0);
    for (const Tree& t : forest.trees) {
        int id = 0;
        while (!t.nodes[static_cast<size_t>(id)].is_leaf()) {
            const TreeNode& node = t.nodes[static_cast<size_t>(id)];
            id = x[static_cast<size_t>(node.feature_index)] <= node.threshold ? node.left
                                                                              : node.right;
        }
        const auto& counts = t.nodes[static_cast<size_t>(id)].class_counts;
        uint64_t total = std::accumulate(counts.begin(), counts.end(), uint64_t{0});
        if (total == 0) continue;
        for (size_t c = 0; c < n_classes; ++c)
            probs[c] += static_cast<double>(counts[c]) / static_cast<double>(total);
    }
    double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (sum > 0.0)
        for (double& p : probs) p /= sum;
    return probs;
}

LabeledDataset undersample(const LabeledDataset& data, size_t cap_per_class,
                           uint64_t rng_seed) {
    if (cap_per_class < 1) throw InvalidSpecError("cap_per_class must be >= 1");
    std::map<std::string, std::vector<size_t>> by_label;
    for (size_t i = 0; i < data.rows.size(); ++i)
        by_label[data.rows[i].label].push_back(i);

    std::vector<bool> keep(data.rows.size(), true);
    size_t class_id = 0;
    for (const auto& [label, rows] : by_label) {
        if (rows.size() > cap_per_class) {
            Rng rng(derive_seed(rng_seed, class_id));
            std::vector<size_t> chosen =
                rng.sample_without_replacement(rows.size(), cap_per_class);
            std::vector<bool> sel(rows.size(), false);
            for (size_t j : chosen) sel[j] = true;
            for (size_t j = 0; j < rows.size(); ++j)
                if (!sel[j]) keep[rows[j]] = false;
        }
        ++class_id;
    }

    LabeledDataset out;
    out.schema = data.schema;
    for (size_t i = 0; i < data.rows.size(); ++i)
        if (keep[i]) out.rows.push_back(data.rows[i]);
    return out;
}

namespace {

nlohmann::json node_to_json(const Tree& t, int id) {
    const TreeNode& node = t.nodes[static_cast<size_t>(id)];
    if (node.is_leaf()) return nlohmann::json{{"counts", node.class_counts}};
    return nlohmann::json{{"f", node.feature_index},
                          {"t", node.threshold},
                          {"l", node_to_json(t, node.left)},
                          {"r", node_to_json(t, node.right)}};
}

int node_from_json(const nlohmann::json& j, Tree& t) {
    int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("counts")) {
        t.nodes[static_cast<size_t>(id)].class_counts =
            j.at("counts").get<std::vector<uint64_t>>();
        return id;
    }
    t.nodes[static_cast<size_t>(id)].feature_index = j.at("f").get<int>();
    t.nodes[static_cast<size_t>(id)].threshold = j.at("t").get<double>();
    int l = node_from_json(j.at("l"), t);
    int r = node_from_json(j.at("r"), t);
    t.nodes[static_cast<size_t>(id)].left = l;
    t.nodes[static_cast<size_t>(id)].right = r;
    return id;
}

} // namespace

nlohmann::json forest_to_json(const Forest& forest) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : forest.trees) trees.push_back(node_to_json(t, 0));
    return nlohmann::json{
        {"format", "iotwl-forest"},
        {"version", 1},
        {"schema", {{"version", forest.schema.version}, {"names", forest.schema.names}}},
        {"class_names", forest.class_names},
        {"hyperparams",
         {{"n_trees", forest.hyperparams.n_trees},
          {"max_depth", forest.hyperparams.max_depth},
          {"min_leaf_size", forest.hyperparams.min_leaf_size},
          {"features_per_split", forest.hyperparams.features_per_split},
          {"rng_seed", forest.hyperparams.rng_seed}}},
        {"trees", std::move(trees)},
        {"importances", forest.importances},
    };
}

Forest forest_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "iotwl-forest")
            throw MalformedFileError("not a forest document");
        if (j.at("version").get<int>() != 1)
            throw MalformedFileError("unsupported forest version");
        Forest f;
        f.schema.version = j.at("schema").at("version").get<int>();
        f.schema.names = j.at("schema").at("names").get<std::vector<std::string>>();
        f.class_names = j.at("class_names").get<std::vector<std::string>>();
        const auto& hp = j.at("hyperparams");
        f.hyperparams.n_trees = hp.at("n_trees").get<int>();
        f.hyperparams.max_depth = hp.at("max_depth").get<int>();
        f.hyperparams.min_leaf_size = hp.at("min_leaf_size").get<int>();
        f.hyperparams.features_per_split = hp.at("features_per_split").get<int>();
        f.hyperparams.rng_seed = hp.at("rng_seed").get<uint64_t>();
        for (const auto& tj : j.at("trees")) {
            Tree t;
            node_from_json(tj, t);
            f.trees.push_back(std::move(t));
        }
        f.importances = j.at("importances").get<std::vector<double>>();
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedFileError(std::string("bad forest document: ") + e.what());
    }
}

} // namespace iotwl
