#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "relabel/core.hpp"

namespace relabel {

// Bad user input: unusable config values, missing or malformed input files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shortest decimal string that parses back to exactly the same double, so
// dataset files round-trip bit-exactly.
std::string format_exact(double value);

// JSON-lines dataset file: one header line with {num_classes, embedding_dim,
// num_samples}, then one record per sample with id, embedding, true_dist and
// counts.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);

void write_confusion_csv(const std::string& path,
                         const std::vector<std::vector<long>>& confusion);

}  // namespace relabel
