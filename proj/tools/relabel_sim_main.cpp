#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "relabel/dataset_io.hpp"
#include "relabel/engine.hpp"
#include "relabel/experiment.hpp"
#include "relabel/metrics.hpp"
#include "relabel/noise.hpp"
#include "relabel/selector.hpp"
#include "relabel/synth.hpp"

namespace {

using nlohmann::json;
using namespace relabel;

json load_config_json(const std::string& path, std::initializer_list<const char*> allowed) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(path + ": config must be a JSON object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known) throw ConfigError(path + ": unknown config key '" + it.key() + "'");
    }
    return doc;
}

std::size_t worker_threads() {
    std::size_t threads = std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
    if (const char* env = std::getenv("RELABEL_SIM_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0' || parsed == 0) {
            throw ConfigError("RELABEL_SIM_THREADS must be a positive integer (got '" +
                              std::string(env) + "')");
        }
        threads = std::min<std::size_t>(threads, parsed);
    }
    return threads;
}

void add_synth(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    auto config_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto spec = std::make_shared<SynthSpec>();
    cmd->add_option("--config", *config_path, "JSON config mirroring the flags");
    auto* o_out = cmd->add_option("--out", *out, "Output dataset file");
    auto* o_classes = cmd->add_option("--classes", spec->num_classes, "Number of classes");
    auto* o_per = cmd->add_option("--per-class", spec->samples_per_class, "Samples per class");
    auto* o_dim = cmd->add_option("--dim", spec->embedding_dim, "Embedding dimension");
    auto* o_spread = cmd->add_option("--spread", spec->cluster_spread, "Cluster spread (sigma)");
    auto* o_sep = cmd->add_option("--separation", spec->class_center_separation,
                                  "Pairwise distance between class centers");
    auto* o_seed = cmd->add_option("--seed", spec->seed, "Generator seed");
    cmd->callback([=]() {
        SynthSpec merged;
        std::string out_path;
        if (!config_path->empty()) {
            const json doc = load_config_json(
                *config_path, {"num_classes", "samples_per_class", "embedding_dim",
                               "cluster_spread", "class_center_separation", "seed", "out"});
            if (doc.contains("num_classes")) merged.num_classes = doc["num_classes"].get<std::size_t>();
            if (doc.contains("samples_per_class")) {
                merged.samples_per_class = doc["samples_per_class"].get<std::size_t>();
            }
            if (doc.contains("embedding_dim")) {
                merged.embedding_dim = doc["embedding_dim"].get<std::size_t>();
            }
            if (doc.contains("cluster_spread")) {
                merged.cluster_spread = doc["cluster_spread"].get<double>();
            }
            if (doc.contains("class_center_separation")) {
                merged.class_center_separation = doc["class_center_separation"].get<double>();
            }
            if (doc.contains("seed")) merged.seed = doc["seed"].get<std::uint64_t>();
            if (doc.contains("out")) out_path = doc["out"].get<std::string>();
        }
        if (o_classes->count()) merged.num_classes = spec->num_classes;
        if (o_per->count()) merged.samples_per_class = spec->samples_per_class;
        if (o_dim->count()) merged.embedding_dim = spec->embedding_dim;
        if (o_spread->count()) merged.cluster_spread = spec->cluster_spread;
        if (o_sep->count()) merged.class_center_separation = spec->class_center_separation;
        if (o_seed->count()) merged.seed = spec->seed;
        if (o_out->count()) out_path = *out;
        if (out_path.empty()) throw ConfigError("synth: --out is required");
        try {
            merged.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        const Dataset ds = generate(merged);
        write_dataset(out_path, ds);
        std::cout << "wrote " << out_path << " (" << ds.size() << " samples)\n";
    });
}

void add_noise(CLI::App& app) {
    auto* cmd = app.add_subcommand("noise", "Inject initial-label noise into a dataset");
    auto config_path = std::make_shared<std::string>();
    auto dataset = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto confusion_out = std::make_shared<std::string>();
    auto audit_out = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>();
    auto spec = std::make_shared<NoiseSpec>();
    auto mask = std::make_shared<bool>(true);
    cmd->add_option("--config", *config_path, "JSON config mirroring the flags");
    auto* o_dataset = cmd->add_option("--dataset", *dataset, "Input dataset file");
    auto* o_out = cmd->add_option("--out", *out, "Output noisy dataset file");
    auto* o_confusion = cmd->add_option("--confusion-out", *confusion_out,
                                        "Confusion-matrix CSV (default: <out>.confusion.csv)");
    auto* o_audit = cmd->add_option("--audit-out", *audit_out,
                                    "Per-sample transition-row CSV audit (idn only)");
    auto* o_model = cmd->add_option("--model", *model,
                                    "temperature | symmetric | class_dependent | idn");
    auto* o_tau = cmd->add_option("--tau", spec->tau, "Temperature (>= 1)");
    auto* o_rate = cmd->add_option("--rate", spec->rate, "Flip rate eta");
    auto* o_mask = cmd->add_flag("--mask-true-class,!--no-mask-true-class", *mask,
                                 "Mask the true class in the idn softmax (default on)");
    auto* o_seed = cmd->add_option("--seed", spec->seed, "Noise seed");
    cmd->callback([=]() {
        NoiseSpec merged;
        std::string dataset_path, out_path, confusion_path, audit_path;
        if (!config_path->empty()) {
            const json doc = load_config_json(
                *config_path, {"dataset", "out", "confusion_out", "audit_out", "model", "tau",
                               "rate", "idn_mask_true_class", "seed"});
            if (doc.contains("dataset")) dataset_path = doc["dataset"].get<std::string>();
            if (doc.contains("out")) out_path = doc["out"].get<std::string>();
            if (doc.contains("confusion_out")) confusion_path = doc["confusion_out"].get<std::string>();
            if (doc.contains("audit_out")) audit_path = doc["audit_out"].get<std::string>();
            if (doc.contains("model")) {
                merged.kind = noise_kind_from_string(doc["model"].get<std::string>());
            }
            if (doc.contains("tau")) merged.tau = doc["tau"].get<double>();
            if (doc.contains("rate")) merged.rate = doc["rate"].get<double>();
            if (doc.contains("idn_mask_true_class")) {
                merged.idn_mask_true_class = doc["idn_mask_true_class"].get<bool>();
            }
            if (doc.contains("seed")) merged.seed = doc["seed"].get<std::uint64_t>();
        }
        if (o_dataset->count()) dataset_path = *dataset;
        if (o_out->count()) out_path = *out;
        if (o_confusion->count()) confusion_path = *confusion_out;
        if (o_audit->count()) audit_path = *audit_out;
        if (o_model->count()) merged.kind = noise_kind_from_string(*model);
        if (o_tau->count()) merged.tau = spec->tau;
        if (o_rate->count()) merged.rate = spec->rate;
        if (o_mask->count()) merged.idn_mask_true_class = *mask;
        if (o_seed->count()) merged.seed = spec->seed;
        if (dataset_path.empty()) throw ConfigError("noise: --dataset is required");
        if (out_path.empty()) throw ConfigError("noise: --out is required");
        if (confusion_path.empty()) confusion_path = out_path + ".confusion.csv";
        Dataset ds = read_dataset(dataset_path);
        NoiseReport report;
        try {
            report = apply_noise(ds, merged);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        write_dataset(out_path, ds);
        write_confusion_csv(confusion_path, report.confusion);
        if (!audit_path.empty()) {
            if (merged.kind != NoiseKind::InstanceDependent) {
                throw ConfigError("noise: --audit-out is only available for the idn model");
            }
            const auto rows = idn_transitions(ds.samples, merged.rate, merged.seed,
                                              merged.idn_mask_true_class);
            std::ofstream audit(audit_path);
            if (!audit) throw std::runtime_error("cannot write " + audit_path);
            audit << "sample_id";
            for (std::size_t c = 0; c < ds.num_classes; ++c) audit << ",p" << c;
            audit << '\n';
            for (std::size_t i = 0; i < ds.samples.size(); ++i) {
                audit << ds.samples[i].id;
                for (double v : rows[i]) audit << ',' << format_g9(v);
                audit << '\n';
            }
        }
        std::cout << "{\"realized_rate\": " << format_g9(report.realized_rate) << "}\n";
    });
}

void add_simulate(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "Run the relabelling simulation sweep");
    auto config_path = std::make_shared<std::string>();
    auto dataset = std::make_shared<std::string>();
    auto output_dir = std::make_shared<std::string>();
    auto budget = std::make_shared<std::size_t>(0);
    auto update_every = std::make_shared<std::size_t>(0);
    cmd->add_option("--config", *config_path, "Experiment config JSON")->required();
    auto* o_dataset = cmd->add_option("--dataset", *dataset, "Override the config dataset path");
    auto* o_outdir = cmd->add_option("--output-dir", *output_dir, "Override the output directory");
    auto* o_budget = cmd->add_option("--budget", *budget,
                                     "Override the budget (0 = expected oracle budget)");
    auto* o_update = cmd->add_option("--update-every", *update_every,
                                     "Override the model update period (0 = never)");
    cmd->callback([=]() {
        ExperimentConfig cfg = parse_experiment_config(*config_path);
        if (o_dataset->count()) cfg.dataset_path = *dataset;
        if (o_outdir->count()) cfg.output_dir = *output_dir;
        if (o_budget->count()) cfg.budget = *budget;
        if (o_update->count()) cfg.update_every = *update_every;
        const ExperimentResult result = run_experiment(cfg, worker_threads());
        std::cout << "wrote " << result.comparison_path << " (" << result.runs.size()
                  << " runs)\n";
    });
}

void add_rank(CLI::App& app) {
    auto* cmd = app.add_subcommand("rank", "One-shot sample ranking without simulation");
    auto config_path = std::make_shared<std::string>();
    auto dataset = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto selector = std::make_shared<std::string>("phi");
    auto posterior = std::make_shared<std::string>("graph");
    auto no_ambiguity = std::make_shared<bool>(false);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto graph_k = std::make_shared<std::size_t>(10);
    auto graph_mu = std::make_shared<double>(0.0101);
    auto head_epochs = std::make_shared<std::size_t>(120);
    auto members = std::make_shared<std::size_t>(5);
    cmd->add_option("--config", *config_path, "JSON config mirroring the flags");
    auto* o_dataset = cmd->add_option("--dataset", *dataset, "Input dataset file");
    auto* o_out = cmd->add_option("--out", *out, "Output ranking CSV");
    auto* o_selector = cmd->add_option("--selector", *selector, "phi | bald");
    auto* o_posterior = cmd->add_option("--posterior", *posterior,
                                        "empirical | softmax_head | co_teaching | ensemble | graph");
    auto* o_noamb = cmd->add_flag("--no-ambiguity", *no_ambiguity,
                                  "Drop the posterior entropy term (CE-only scores)");
    auto* o_seed = cmd->add_option("--seed", *seed, "Model seed");
    auto* o_graph_k = cmd->add_option("--graph-k", *graph_k, "kNN neighbours");
    auto* o_graph_mu = cmd->add_option("--graph-mu", *graph_mu, "Spreading fidelity mu");
    auto* o_epochs = cmd->add_option("--head-epochs", *head_epochs, "Softmax head epochs");
    auto* o_members = cmd->add_option("--members", *members, "Ensemble members");
    cmd->callback([=]() {
        std::string dataset_path, out_path, selector_name = "phi", posterior_name = "graph";
        PosteriorSpec spec;
        bool drop_entropy = false;
        if (!config_path->empty()) {
            const json doc = load_config_json(
                *config_path, {"dataset", "out", "selector", "posterior", "no_ambiguity_term",
                               "seed", "graph_k", "graph_mu", "head_epochs", "members"});
            if (doc.contains("dataset")) dataset_path = doc["dataset"].get<std::string>();
            if (doc.contains("out")) out_path = doc["out"].get<std::string>();
            if (doc.contains("selector")) selector_name = doc["selector"].get<std::string>();
            if (doc.contains("posterior")) posterior_name = doc["posterior"].get<std::string>();
            if (doc.contains("no_ambiguity_term")) drop_entropy = doc["no_ambiguity_term"].get<bool>();
            if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
            if (doc.contains("graph_k")) spec.graph.k_neighbors = doc["graph_k"].get<std::size_t>();
            if (doc.contains("graph_mu")) spec.graph.mu = doc["graph_mu"].get<double>();
            if (doc.contains("head_epochs")) spec.head.epochs = doc["head_epochs"].get<std::size_t>();
            if (doc.contains("members")) spec.ensemble_members = doc["members"].get<std::size_t>();
        }
        if (o_dataset->count()) dataset_path = *dataset;
        if (o_out->count()) out_path = *out;
        if (o_selector->count()) selector_name = *selector;
        if (o_posterior->count()) posterior_name = *posterior;
        if (o_noamb->count()) drop_entropy = *no_ambiguity;
        if (o_seed->count()) spec.seed = *seed;
        if (o_graph_k->count()) spec.graph.k_neighbors = *graph_k;
        if (o_graph_mu->count()) spec.graph.mu = *graph_mu;
        if (o_epochs->count()) spec.head.epochs = *head_epochs;
        if (o_members->count()) spec.ensemble_members = *members;
        if (dataset_path.empty()) throw ConfigError("rank: --dataset is required");
        if (out_path.empty()) throw ConfigError("rank: --out is required");
        try {
            spec.kind = posterior_kind_from_string(posterior_name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        Dataset ds = read_dataset(dataset_path);
        DatasetState state(std::move(ds));
        const auto model = make_posterior_model(spec);
        model->fit(state);
        Ranking ranking;
        if (selector_name == "phi") {
            ranking = phi_ranking(state, model->posteriors(state), drop_entropy);
        } else if (selector_name == "bald") {
            const auto member_rows = model->member_posteriors(state);
            if (member_rows.empty()) {
                throw ConfigError("rank: bald needs the ensemble posterior");
            }
            ranking = bald_ranking(state, member_rows);
        } else {
            throw ConfigError("rank: selector must be 'phi' or 'bald'");
        }
        write_ranking_csv(out_path, ranking);
        std::cout << "wrote " << out_path << " (" << ranking.size() << " rows)\n";
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active label-cleaning simulation engine"};
    app.require_subcommand(1);
    add_synth(app);
    add_noise(app);
    add_simulate(app);
    add_rank(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
