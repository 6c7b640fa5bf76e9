#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "relabel/dataset_io.hpp"

namespace relabel {

namespace {
using nlohmann::json;
}

std::string format_exact(double value) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

void write_dataset(const std::string& path, const Dataset& dataset) {
    dataset.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "{\"num_classes\":" << dataset.num_classes
        << ",\"embedding_dim\":" << dataset.embedding_dim
        << ",\"num_samples\":" << dataset.samples.size() << "}\n";
    for (const Sample& s : dataset.samples) {
        out << "{\"id\":" << s.id << ",\"embedding\":[";
        for (std::size_t l = 0; l < s.embedding.size(); ++l) {
            if (l) out << ',';
            out << format_exact(s.embedding[l]);
        }
        out << "],\"true_dist\":[";
        for (std::size_t c = 0; c < s.true_dist.num_classes(); ++c) {
            if (c) out << ',';
            out << format_exact(s.true_dist.probs[c]);
        }
        out << "],\"counts\":[";
        // Unlabelled samples serialize as all-zero count rows.
        const std::size_t count_len =
            s.counts.counts.empty() ? dataset.num_classes : s.counts.num_classes();
        for (std::size_t c = 0; c < count_len; ++c) {
            if (c) out << ',';
            out << (c < s.counts.num_classes() ? s.counts.counts[c] : 0);
        }
        out << "]}\n";
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

[[noreturn]] void bad_line(const std::string& path, std::size_t line, const std::string& why) {
    throw ConfigError(path + ":" + std::to_string(line) + ": " + why);
}

std::vector<double> double_array(const json& node, std::size_t expected, const std::string& path,
                                 std::size_t line, const char* field) {
    if (!node.is_array() || node.size() != expected) {
        bad_line(path, line, std::string(field) + " must be an array of " +
                                 std::to_string(expected) + " numbers");
    }
    std::vector<double> out;
    out.reserve(expected);
    for (const auto& v : node) {
        if (!v.is_number()) bad_line(path, line, std::string(field) + " has a non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read dataset file " + path);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty dataset file");
    ++line_no;
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        bad_line(path, line_no, std::string("invalid JSON header: ") + e.what());
    }
    for (const char* key : {"num_classes", "embedding_dim", "num_samples"}) {
        if (!header.contains(key) || !header[key].is_number_unsigned()) {
            bad_line(path, line_no, std::string("header missing unsigned field ") + key);
        }
    }
    Dataset dataset;
    dataset.num_classes = header["num_classes"].get<std::size_t>();
    dataset.embedding_dim = header["embedding_dim"].get<std::size_t>();
    const std::size_t num_samples = header["num_samples"].get<std::size_t>();
    dataset.samples.reserve(num_samples);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            bad_line(path, line_no, std::string("invalid JSON record: ") + e.what());
        }
        for (const char* key : {"id", "embedding", "true_dist", "counts"}) {
            if (!record.contains(key)) {
                bad_line(path, line_no, std::string("record missing field ") + key);
            }
        }
        if (!record["id"].is_number_unsigned()) bad_line(path, line_no, "id must be unsigned");
        Sample s;
        s.id = record["id"].get<SampleId>();
        s.embedding = double_array(record["embedding"], dataset.embedding_dim, path, line_no,
                                   "embedding");
        try {
            s.true_dist = LabelDistribution(double_array(record["true_dist"], dataset.num_classes,
                                                         path, line_no, "true_dist"));
        } catch (const std::invalid_argument& e) {
            bad_line(path, line_no, e.what());
        }
        const auto& counts_node = record["counts"];
        if (!counts_node.is_array() || counts_node.size() != dataset.num_classes) {
            bad_line(path, line_no, "counts must be an array of num_classes integers");
        }
        std::vector<int> counts;
        counts.reserve(dataset.num_classes);
        for (const auto& v : counts_node) {
            if (!v.is_number_integer()) bad_line(path, line_no, "counts has a non-integer entry");
            counts.push_back(v.get<int>());
        }
        try {
            s.counts = LabelCounts(std::move(counts));
        } catch (const std::invalid_argument& e) {
            bad_line(path, line_no, e.what());
        }
        dataset.samples.push_back(std::move(s));
    }
    if (dataset.samples.size() != num_samples) {
        throw ConfigError(path + ": header declares " + std::to_string(num_samples) +
                          " samples but file has " + std::to_string(dataset.samples.size()));
    }
    try {
        dataset.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return dataset;
}

void write_confusion_csv(const std::string& path,
                         const std::vector<std::vector<long>>& confusion) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "true_class";
    for (std::size_t c = 0; c < confusion.size(); ++c) out << ",drawn_" << c;
    out << '\n';
    for (std::size_t y = 0; y < confusion.size(); ++y) {
        out << y;
        for (long v : confusion[y]) out << ',' << v;
        out << '\n';
    }
}

}  // namespace relabel
