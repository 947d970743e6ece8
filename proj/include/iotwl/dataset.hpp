#pragma once

#include <string>
#include <vector>

#include "iotwl/features.hpp"

namespace iotwl {

struct LabeledDataset {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;

    // Sorted unique labels across all rows (empty labels excluded).
    std::vector<std::string> class_names() const;
    size_t size() const { return rows.size(); }
};

// Doubles are written with the shortest representation that round-trips, so
// save followed by load is bit-exact.
void save_dataset_csv(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);

std::string format_double(double v);
double parse_double(const std::string& s); // throws MalformedFileError

} // namespace iotwl
