#include <fstream>
#include <stdexcept>
#include <string>

#include "relabel/metrics.hpp"

namespace relabel {

double correctness_fraction(const DatasetState& state) {
    if (state.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (const Sample& s : state.data.samples) correct += is_mislabelled(s) ? 0 : 1;
    return static_cast<double>(correct) / static_cast<double>(state.size());
}

CleaningCurve cleaning_curve(const SimulationTrace& trace) {
    if (trace.num_samples == 0) throw std::invalid_argument("cleaning_curve: empty trace");
    const double n = static_cast<double>(trace.num_samples);
    CleaningCurve curve;
    curve.points.reserve(trace.events.size() + 1);
    curve.points.emplace_back(0, static_cast<double>(trace.initial_correct) / n);
    for (const auto& e : trace.events) {
        curve.points.emplace_back(e.annotation_index,
                                  static_cast<double>(e.num_correct_after) / n);
    }
    return curve;
}

double curve_auc(const CleaningCurve& curve, std::size_t budget) {
    if (curve.points.empty()) throw std::invalid_argument("curve_auc: empty curve");
    if (budget == 0) throw std::invalid_argument("curve_auc: budget must be >= 1");
    const double b = static_cast<double>(budget);
    double area = 0.0;
    auto prev = curve.points.front();
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& p = curve.points[k];
        if (p.first <= prev.first) throw std::invalid_argument("curve_auc: non-increasing x");
        if (static_cast<double>(p.first) >= b) {
            const double span = static_cast<double>(p.first - prev.first);
            const double y_at_b =
                prev.second +
                (p.second - prev.second) * (b - static_cast<double>(prev.first)) / span;
            area += 0.5 * (prev.second + y_at_b) * (b - static_cast<double>(prev.first));
            return area / b;
        }
        area += 0.5 * (prev.second + p.second) * static_cast<double>(p.first - prev.first);
        prev = p;
    }
    area += prev.second * (b - static_cast<double>(prev.first));
    return area / b;
}

double curve_value_at(const CleaningCurve& curve, std::size_t annotations) {
    if (curve.points.empty()) throw std::invalid_argument("curve_value_at: empty curve");
    double value = curve.points.front().second;
    for (const auto& [x, y] : curve.points) {
        if (x > annotations) break;
        value = y;
    }
    return value;
}

NoisyBreakdown noisy_breakdown(const DatasetState& state, const DifficultyConfig& cfg) {
    NoisyBreakdown out;
    for (const Sample& s : state.data.samples) {
        if (!is_mislabelled(s)) continue;
        if (is_difficult(s.true_dist, cfg)) {
            ++out.difficult_noisy;
        } else {
            ++out.clear_noisy;
        }
    }
    return out;
}

double accuracy_on_labels(const std::vector<std::size_t>& predictions,
                          const std::vector<std::size_t>& reference) {
    if (predictions.size() != reference.size()) {
        throw std::invalid_argument("accuracy_on_labels: length mismatch");
    }
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        hits += predictions[i] == reference[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

void write_curve_csv(const std::string& path, const CleaningCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "annotations,correct_fraction\n";
    for (const auto& [x, y] : curve.points) {
        out << x << ',' << format_g9(y) << '\n';
    }
}

}  // namespace relabel
