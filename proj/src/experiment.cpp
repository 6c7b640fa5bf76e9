#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "relabel/experiment.hpp"

namespace relabel {

namespace {

using nlohmann::json;

constexpr std::uint64_t kBudgetSeedStream = 0x42534544;  // "BSED"

void check_keys(const json& node, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

const json& require(const json& node, const char* key, const std::string& where) {
    if (!node.contains(key)) throw ConfigError(where + " requires key '" + key + "'");
    return node[key];
}

double as_double(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    return v.get<double>();
}

std::size_t as_size(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(where + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + " must be a string");
    return v.get<std::string>();
}

NoiseSpec noise_from_json(const json& node) {
    check_keys(node, {"kind", "tau", "rate", "confusion_bias", "idn_mask_true_class", "seed"},
               "noise");
    NoiseSpec spec;
    try {
        spec.kind = noise_kind_from_string(as_string(require(node, "kind", "noise"), "noise.kind"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (node.contains("tau")) spec.tau = as_double(node["tau"], "noise.tau");
    if (node.contains("rate")) spec.rate = as_double(node["rate"], "noise.rate");
    if (node.contains("seed")) spec.seed = as_u64(node["seed"], "noise.seed");
    if (node.contains("idn_mask_true_class")) {
        spec.idn_mask_true_class = as_bool(node["idn_mask_true_class"], "noise.idn_mask_true_class");
    }
    if (node.contains("confusion_bias")) {
        const auto& rows = node["confusion_bias"];
        if (!rows.is_array()) throw ConfigError("noise.confusion_bias must be an array of rows");
        for (const auto& row : rows) {
            if (!row.is_array()) throw ConfigError("noise.confusion_bias rows must be arrays");
            std::vector<double> r;
            for (const auto& v : row) r.push_back(as_double(v, "noise.confusion_bias entry"));
            spec.confusion_bias.push_back(std::move(r));
        }
    }
    return spec;
}

SoftmaxHeadConfig head_from_json(const json& node, SoftmaxHeadConfig base) {
    check_keys(node,
               {"learning_rate", "epochs", "weight_decay", "label_smoothing", "logit_clamp_alpha",
                "batch_size", "refresh_epochs"},
               "posterior.head");
    if (node.contains("learning_rate")) {
        base.learning_rate = as_double(node["learning_rate"], "head.learning_rate");
    }
    if (node.contains("epochs")) base.epochs = as_size(node["epochs"], "head.epochs");
    if (node.contains("weight_decay")) {
        base.weight_decay = as_double(node["weight_decay"], "head.weight_decay");
    }
    if (node.contains("label_smoothing")) {
        base.label_smoothing = as_double(node["label_smoothing"], "head.label_smoothing");
    }
    if (node.contains("logit_clamp_alpha")) {
        base.logit_clamp_alpha = as_double(node["logit_clamp_alpha"], "head.logit_clamp_alpha");
    }
    if (node.contains("batch_size")) base.batch_size = as_size(node["batch_size"], "head.batch_size");
    if (node.contains("refresh_epochs")) {
        base.refresh_epochs = as_size(node["refresh_epochs"], "head.refresh_epochs");
    }
    return base;
}

GraphConfig graph_from_json(const json& node, GraphConfig base) {
    check_keys(node, {"k_neighbors", "mu", "solver", "iterative_tol", "max_iters"},
               "posterior.graph");
    if (node.contains("k_neighbors")) {
        base.k_neighbors = as_size(node["k_neighbors"], "graph.k_neighbors");
    }
    if (node.contains("mu")) base.mu = as_double(node["mu"], "graph.mu");
    if (node.contains("solver")) {
        try {
            base.solver = solver_from_string(as_string(node["solver"], "graph.solver"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (node.contains("iterative_tol")) {
        base.iterative_tol = as_double(node["iterative_tol"], "graph.iterative_tol");
    }
    if (node.contains("max_iters")) base.max_iters = as_size(node["max_iters"], "graph.max_iters");
    return base;
}

PosteriorSpec posterior_from_json(const json& node, PosteriorSpec base) {
    check_keys(node,
               {"kind", "seed", "head", "co_teach_drop_rate", "co_teach_warmup",
                "ensemble_members", "ensemble_bootstrap", "graph"},
               "posterior");
    if (node.contains("kind")) {
        try {
            base.kind = posterior_kind_from_string(as_string(node["kind"], "posterior.kind"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (node.contains("seed")) base.seed = as_u64(node["seed"], "posterior.seed");
    if (node.contains("head")) base.head = head_from_json(node["head"], base.head);
    if (node.contains("co_teach_drop_rate")) {
        base.co_teach_drop_rate = as_double(node["co_teach_drop_rate"], "co_teach_drop_rate");
    }
    if (node.contains("co_teach_warmup")) {
        base.co_teach_warmup = as_size(node["co_teach_warmup"], "co_teach_warmup");
    }
    if (node.contains("ensemble_members")) {
        base.ensemble_members = as_size(node["ensemble_members"], "ensemble_members");
    }
    if (node.contains("ensemble_bootstrap")) {
        base.ensemble_bootstrap = as_bool(node["ensemble_bootstrap"], "ensemble_bootstrap");
    }
    if (node.contains("graph")) base.graph = graph_from_json(node["graph"], base.graph);
    return base;
}

ArmSpec arm_from_json(const json& node, const PosteriorSpec& default_posterior) {
    check_keys(node, {"name", "kind", "no_ambiguity_term", "oracle_difficulty", "posterior"},
               "selector");
    ArmSpec arm;
    try {
        arm.selector.kind =
            selector_kind_from_string(as_string(require(node, "kind", "selector"), "selector.kind"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (node.contains("no_ambiguity_term")) {
        arm.selector.no_ambiguity_term = as_bool(node["no_ambiguity_term"], "no_ambiguity_term");
    }
    if (node.contains("oracle_difficulty")) {
        const std::string mode = as_string(node["oracle_difficulty"], "oracle_difficulty");
        if (mode == "entropy") {
            arm.selector.oracle_difficulty = OracleDifficulty::Entropy;
        } else if (mode == "expected_draws") {
            arm.selector.oracle_difficulty = OracleDifficulty::ExpectedDraws;
        } else {
            throw ConfigError("oracle_difficulty must be 'entropy' or 'expected_draws'");
        }
    }
    arm.posterior = node.contains("posterior")
                        ? posterior_from_json(node["posterior"], default_posterior)
                        : default_posterior;
    if (node.contains("name")) arm.name = as_string(node["name"], "selector.name");
    if (arm.name.empty()) {
        arm.name = to_string(arm.selector.kind);
        if (arm.selector.no_ambiguity_term) arm.name += "_ce_only";
        if (arm.selector.kind == SelectorKind::Phi || arm.selector.kind == SelectorKind::Bald) {
            arm.name += "-" + to_string(arm.posterior.kind);
        }
        if (arm.selector.kind == SelectorKind::Oracle &&
            arm.selector.oracle_difficulty == OracleDifficulty::ExpectedDraws) {
            arm.name += "_draws";
        }
    }
    return arm;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset_path.empty()) throw ConfigError("experiment config: dataset path is required");
    if (output_dir.empty()) throw ConfigError("experiment config: output_dir is required");
    if (arms.empty()) throw ConfigError("experiment config: need at least one selector");
    if (seeds.empty()) throw ConfigError("experiment config: need at least one seed");
    if (draw_cap == 0) throw ConfigError("experiment config: draw_cap must be >= 1");
    if (budget_runs == 0) throw ConfigError("experiment config: budget_runs must be >= 1");
    std::vector<std::string> names;
    for (const auto& arm : arms) {
        if (std::find(names.begin(), names.end(), arm.name) != names.end()) {
            throw ConfigError("experiment config: duplicate arm name '" + arm.name + "'");
        }
        names.push_back(arm.name);
        try {
            arm.posterior.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("arm '") + arm.name + "': " + e.what());
        }
    }
}

ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    check_keys(doc,
               {"dataset", "noise", "posterior", "selectors", "seeds", "budget", "update_every",
                "draw_cap", "budget_runs", "output_dir"},
               "config");
    ExperimentConfig cfg;
    cfg.dataset_path = as_string(require(doc, "dataset", "config"), "dataset");
    cfg.noise = noise_from_json(require(doc, "noise", "config"));
    if (doc.contains("posterior")) cfg.posterior = posterior_from_json(doc["posterior"], cfg.posterior);
    const json& selectors = require(doc, "selectors", "config");
    if (!selectors.is_array()) throw ConfigError("config.selectors must be an array");
    for (const auto& node : selectors) cfg.arms.push_back(arm_from_json(node, cfg.posterior));
    const json& seeds = require(doc, "seeds", "config");
    if (!seeds.is_array()) throw ConfigError("config.seeds must be an array");
    for (const auto& v : seeds) cfg.seeds.push_back(as_u64(v, "config.seeds entry"));
    if (doc.contains("budget")) cfg.budget = as_size(doc["budget"], "config.budget");
    if (doc.contains("update_every")) {
        cfg.update_every = as_size(doc["update_every"], "config.update_every");
    }
    if (doc.contains("draw_cap")) cfg.draw_cap = as_size(doc["draw_cap"], "config.draw_cap");
    if (doc.contains("budget_runs")) cfg.budget_runs = as_size(doc["budget_runs"], "config.budget_runs");
    cfg.output_dir = as_string(require(doc, "output_dir", "config"), "output_dir");
    cfg.validate();
    return cfg;
}

namespace {

std::string run_summary_json(const RunResult& r) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"arm\": \"" << r.arm << "\",\n";
    out << "  \"selector\": \"" << r.selector << "\",\n";
    out << "  \"posterior\": \"" << r.posterior << "\",\n";
    out << "  \"seed\": " << r.seed << ",\n";
    out << "  \"budget\": " << r.budget << ",\n";
    out << "  \"total_annotations\": " << r.total_annotations << ",\n";
    out << "  \"overshoot\": " << r.overshoot << ",\n";
    out << "  \"rounds\": " << r.rounds << ",\n";
    out << "  \"tie_capped_rounds\": " << r.tie_capped_rounds << ",\n";
    out << "  \"initial_fraction\": " << format_g9(r.initial_fraction) << ",\n";
    out << "  \"final_fraction\": " << format_g9(r.final_fraction) << ",\n";
    out << "  \"auc\": " << format_g9(r.auc) << ",\n";
    out << "  \"clear_noisy\": " << r.clear_noisy << ",\n";
    out << "  \"difficult_noisy\": " << r.difficult_noisy << "\n";
    out << "}\n";
    return out.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t max_threads) {
    cfg.validate();
    const Dataset base = read_dataset(cfg.dataset_path);
    std::filesystem::create_directories(cfg.output_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(cfg.output_dir) / name).string();
    };

    // Seed prepass: the noisy start and the budget are shared by every arm.
    struct SeedSetup {
        Dataset noisy;
        double realized_rate = 0.0;
        std::size_t budget = 0;
    };
    std::vector<SeedSetup> setups;
    setups.reserve(cfg.seeds.size());
    for (std::uint64_t seed : cfg.seeds) {
        SeedSetup setup;
        setup.noisy = base;
        NoiseSpec noise = cfg.noise;
        noise.seed = mix_seed(cfg.noise.seed, seed);
        const NoiseReport report = apply_noise(setup.noisy, noise);
        setup.realized_rate = report.realized_rate;
        if (cfg.budget > 0) {
            setup.budget = cfg.budget;
        } else {
            DatasetState state(setup.noisy);
            const double expected = oracle_expected_budget(
                state, cfg.budget_runs, mix_seed(seed, kBudgetSeedStream));
            setup.budget = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(std::ceil(expected))));
        }
        const std::string stem = "noise_seed" + std::to_string(seed);
        write_confusion_csv(out_path(stem + "_confusion.csv"), report.confusion);
        std::ostringstream info;
        info << "{\n  \"seed\": " << seed << ",\n  \"realized_rate\": "
             << format_g9(setup.realized_rate) << ",\n  \"budget\": " << setup.budget << "\n}\n";
        write_text(out_path(stem + ".json"), info.str());
        setups.push_back(std::move(setup));
    }

    struct Job {
        std::size_t arm_index;
        std::size_t seed_index;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({a, s});
    }
    std::vector<RunResult> results(jobs.size());
    std::vector<std::string> errors(jobs.size());

    const auto run_job = [&](std::size_t j) {
        const ArmSpec& arm = cfg.arms[jobs[j].arm_index];
        const std::uint64_t seed = cfg.seeds[jobs[j].seed_index];
        const SeedSetup& setup = setups[jobs[j].seed_index];

        SimulationConfig sim;
        sim.budget = setup.budget;
        sim.update_every = cfg.update_every;
        sim.selector = arm.selector;
        sim.posterior = arm.posterior;
        sim.posterior.seed = mix_seed(arm.posterior.seed, seed);
        sim.draw_cap = cfg.draw_cap;
        sim.seed = seed;

        DatasetState state(setup.noisy);
        const SimulationTrace trace = run_simulation(state, sim);
        const CleaningCurve curve = cleaning_curve(trace);
        const NoisyBreakdown breakdown = noisy_breakdown(state, DifficultyConfig{});

        RunResult r;
        r.arm = arm.name;
        r.selector = to_string(arm.selector.kind);
        r.posterior = to_string(arm.posterior.kind);
        r.seed = seed;
        r.budget = setup.budget;
        r.total_annotations = trace.total_annotations;
        r.overshoot = trace.overshoot;
        r.rounds = trace.rounds;
        r.tie_capped_rounds = trace.tie_capped_rounds;
        r.initial_fraction = static_cast<double>(trace.initial_correct) / trace.num_samples;
        r.final_fraction = static_cast<double>(trace.final_correct) / trace.num_samples;
        r.auc = curve_auc(curve, setup.budget);
        r.clear_noisy = breakdown.clear_noisy;
        r.difficult_noisy = breakdown.difficult_noisy;
        const std::string stem = arm.name + "_seed" + std::to_string(seed);
        r.trace_path = out_path(stem + "_trace.csv");
        r.curve_path = out_path(stem + "_curve.csv");
        r.summary_path = out_path(stem + "_summary.json");
        write_trace_csv(r.trace_path, trace);
        write_curve_csv(r.curve_path, curve);
        write_text(r.summary_path, run_summary_json(r));
        results[j] = std::move(r);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(max_threads, jobs.size()));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            try {
                run_job(j);
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
                    try {
                        run_job(j);
                    } catch (const std::exception& e) {
                        errors[j] = e.what();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    ExperimentResult out;
    out.comparison_path = out_path("comparison.csv");
    out.manifest_path = out_path("manifest.json");

    std::ostringstream comparison;
    comparison << "arm,selector,posterior,seed,budget,total_annotations,overshoot,"
                  "initial_fraction,final_fraction,auc\n";
    for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
        double mean_budget = 0.0, mean_total = 0.0, mean_overshoot = 0.0;
        double mean_initial = 0.0, mean_final = 0.0, mean_auc = 0.0;
        std::size_t completed = 0;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            const std::size_t j = a * cfg.seeds.size() + s;
            if (!errors[j].empty()) continue;
            const RunResult& r = results[j];
            comparison << r.arm << ',' << r.selector << ',' << r.posterior << ',' << r.seed << ','
                       << r.budget << ',' << r.total_annotations << ',' << r.overshoot << ','
                       << format_g9(r.initial_fraction) << ',' << format_g9(r.final_fraction)
                       << ',' << format_g9(r.auc) << '\n';
            mean_budget += r.budget;
            mean_total += r.total_annotations;
            mean_overshoot += r.overshoot;
            mean_initial += r.initial_fraction;
            mean_final += r.final_fraction;
            mean_auc += r.auc;
            ++completed;
            out.runs.push_back(r);
        }
        if (completed > 0) {
            const double n = static_cast<double>(completed);
            comparison << cfg.arms[a].name << ',' << to_string(cfg.arms[a].selector.kind) << ','
                       << to_string(cfg.arms[a].posterior.kind) << ",mean,"
                       << format_g9(mean_budget / n) << ',' << format_g9(mean_total / n) << ','
                       << format_g9(mean_overshoot / n) << ',' << format_g9(mean_initial / n)
                       << ',' << format_g9(mean_final / n) << ',' << format_g9(mean_auc / n)
                       << '\n';
        }
    }
    write_text(out.comparison_path, comparison.str());

    std::ostringstream manifest;
    manifest << "{\n  \"runs\": [\n";
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const ArmSpec& arm = cfg.arms[jobs[j].arm_index];
        const std::uint64_t seed = cfg.seeds[jobs[j].seed_index];
        manifest << "    {\"arm\": \"" << arm.name << "\", \"seed\": " << seed << ", \"status\": ";
        if (errors[j].empty()) {
            manifest << "\"ok\"}";
        } else {
            std::string msg = errors[j];
            std::replace(msg.begin(), msg.end(), '"', '\'');
            manifest << "\"failed\", \"error\": \"" << msg << "\"}";
        }
        manifest << (j + 1 < jobs.size() ? ",\n" : "\n");
    }
    manifest << "  ],\n  \"comparison\": \"" << out.comparison_path << "\"\n}\n";
    write_text(out.manifest_path, manifest.str());

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!errors[j].empty()) {
            throw std::runtime_error("run " + cfg.arms[jobs[j].arm_index].name + " seed " +
                                     std::to_string(cfg.seeds[jobs[j].seed_index]) +
                                     " failed: " + errors[j] + " (see " + out.manifest_path + ")");
        }
    }
    return out;
}

}  // namespace relabel
