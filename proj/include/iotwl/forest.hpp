#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iotwl/dataset.hpp"

namespace iotwl {

// Flat node array per tree; nodes[0] is the root. feature_index < 0 marks a
// leaf, which keeps its bootstrap per-class counts (internal-node counts are
// recoverable bottom-up, so only leaves store them).
struct TreeNode {
    int feature_index = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<uint64_t> class_counts;
    bool is_leaf() const { return feature_index < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct ForestHyperparams {
    int n_trees = 500;
    int max_depth = 0;          // 0 = unlimited
    int min_leaf_size = 1;
    int features_per_split = 0; // 0 = ceil(sqrt(d))
    uint64_t rng_seed = 0;

    bool operator==(const ForestHyperparams&) const = default;
};

struct Forest {
    FeatureSchema schema;
    std::vector<std::string> class_names;
    ForestHyperparams hyperparams;
    std::vector<Tree> trees;
    std::vector<double> importances;

    size_t class_index(const std::string& name) const; // npos if absent
};

Forest train_forest(const LabeledDataset& data, ForestHyperparams hp,
                    std::vector<std::string>* warnings = nullptr);

std::vector<double> predict_posterior(const Forest& forest, const std::vector<double>& x);

// Mean impurity decrease, weighted by node sample fraction, normalized to
// sum 1 (all zeros when no tree ever split).
std::vector<double> compute_importances(const Forest& forest);

LabeledDataset undersample(const LabeledDataset& data, size_t cap_per_class,
                           uint64_t rng_seed);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);

} // namespace iotwl
