#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relabel/core.hpp"
#include "relabel/engine.hpp"

namespace relabel {

// Correct-label fraction as a function of annotations spent; the first point
// is the initial fraction at zero annotations.
struct CleaningCurve {
    std::vector<std::pair<std::size_t, double>> points;
};

// Fraction of samples whose majority label equals their true class.
double correctness_fraction(const DatasetState& state);

CleaningCurve cleaning_curve(const SimulationTrace& trace);

// Trapezoidal area of the curve over [0, budget], divided by budget. Curves
// ending early are right-extended flat; points past the budget are cut off.
double curve_auc(const CleaningCurve& curve, std::size_t budget);

// Curve value at an annotation count (step-continued between points).
double curve_value_at(const CleaningCurve& curve, std::size_t annotations);

struct NoisyBreakdown {
    std::size_t clear_noisy = 0;
    std::size_t difficult_noisy = 0;
};

// Partition of the currently mislabelled samples by true-distribution
// difficulty.
NoisyBreakdown noisy_breakdown(const DatasetState& state, const DifficultyConfig& cfg);

// Mean of [predictions == reference].
double accuracy_on_labels(const std::vector<std::size_t>& predictions,
                          const std::vector<std::size_t>& reference);

void write_curve_csv(const std::string& path, const CleaningCurve& curve);

}  // namespace relabel
