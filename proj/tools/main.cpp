// Command-line front end for the multimodal gated-fusion pipeline.
//
// Subcommands:
//   synth          generate a synthetic multimodal dataset directory
//   train          fit a model on a dataset directory, write checkpoint + logs
//   eval           score a checkpoint on one split of a dataset
//   gradcheck      compare analytic gradients against finite differences
//   inspect-graph  dump one modality's node graph and contraction trace
//
// Exit codes: 0 success, 2 usage/config/data error, 3 numeric divergence,
// 4 verification failure.

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "magnum/config.hpp"
#include "magnum/dataset.hpp"
#include "magnum/errors.hpp"
#include "magnum/gradcheck.hpp"
#include "magnum/lowlevel.hpp"
#include "magnum/model.hpp"
#include "magnum/ops.hpp"
#include "magnum/param.hpp"
#include "magnum/rng.hpp"
#include "magnum/synth.hpp"
#include "magnum/training.hpp"

namespace {

using namespace magnum;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitVerifyFail = 4;

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::size_t parse_size_field(const std::string& key, const std::string& value) {
    if (value.empty() || value[0] == '-')
        throw ConfigError("value for " + key + " must be a non-negative integer, got '" + value + "'");
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end != value.c_str() + value.size())
        throw ConfigError("value for " + key + " must be a non-negative integer, got '" + value + "'");
    return static_cast<std::size_t>(v);
}

double parse_double_field(const std::string& key, const std::string& value) {
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(value.c_str(), &end);
    if (value.empty() || errno != 0 || end != value.c_str() + value.size())
        throw ConfigError("value for " + key + " must be a number, got '" + value + "'");
    return v;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// synth

// Flat key=value spec with # comments, mirroring SynthSpec fields.
SynthSpec parse_synth_spec(const std::string& text) {
    SynthSpec spec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_copy(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'");
        const std::string key = trim_copy(line.substr(0, eq));
        const std::string value = trim_copy(line.substr(eq + 1));
        if (key == "modalities") {
            spec.modalities = parse_size_field(key, value);
        } else if (key == "samples") {
            spec.samples = parse_size_field(key, value);
        } else if (key == "classes") {
            spec.classes = parse_size_field(key, value);
        } else if (key == "mode") {
            if (value == "unimodal") {
                spec.signal_mode = SignalMode::Unimodal;
            } else if (value == "xor_cross_modal") {
                spec.signal_mode = SignalMode::XorCrossModal;
            } else {
                throw ConfigError("mode must be unimodal or xor_cross_modal, got '" + value + "'");
            }
        } else if (key == "noise_std") {
            spec.noise_std = parse_double_field(key, value);
            if (spec.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(parse_size_field(key, value));
        } else if (key == "embedding_count") {
            spec.embedding_count = parse_size_field(key, value);
        } else if (key == "embedding_dim") {
            spec.embedding_dim = parse_size_field(key, value);
        } else {
            throw ConfigError("unknown synth spec key: " + key);
        }
    }
    return spec;
}

struct SynthArgs {
    std::string spec_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_synth(const SynthArgs& args) {
    SynthSpec spec;
    if (!args.spec_path.empty()) spec = parse_synth_spec(read_text_file(args.spec_path));
    if (args.seed_set) spec.seed = args.seed;
    Dataset ds = gen_synth(spec);
    write_dataset(ds, args.out);
    std::cout << "samples=" << ds.samples.size() << "\n"
              << "classes=" << ds.class_names.size() << "\n"
              << "modalities=" << ds.modality_names().size() << "\n"
              << "out=" << args.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// shared config assembly: file < --set pairs < named convenience flags

void apply_set_pairs(RunConfig& cfg, const std::vector<std::string>& pairs) {
    for (const std::string& pair : pairs) {
        std::size_t eq = pair.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + pair + "'");
        cfg.set(trim_copy(pair.substr(0, eq)), trim_copy(pair.substr(eq + 1)));
    }
}

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> set_pairs;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t epochs = 0;
    bool epochs_set = false;
};

RunConfig assemble_config(const ConfigArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    apply_set_pairs(cfg, args.set_pairs);
    if (args.seed_set) cfg.set("seed", std::to_string(args.seed));
    if (args.epochs_set) cfg.set("optim.epochs", std::to_string(args.epochs));
    return cfg;
}

void echo_config(const RunConfig& cfg) {
    std::cout << "# effective config\n" << cfg.to_text();
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, cfg.hash());
    std::cout << "# config_hash=" << hex << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out;
    ConfigArgs config;
};

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = assemble_config(args.config);
    echo_config(cfg);

    Dataset ds = load_dataset(args.data);
    SplitIndices splits = split(ds, cfg.seed);
    if (ds.has_tabular()) fit_normalization(ds.schema, ds, splits.train);

    Rng rng(derive_seed(cfg.seed, "init"));
    ParamRegistry params;
    Model model(cfg, ds.schema, ds.unstructured, ds.num_classes(), params, rng);

    TrainOutcome outcome = train(model, params, ds, splits, cfg, args.out);

    std::printf("steps_taken=%zu\n", outcome.steps_taken);
    std::printf("best_epoch=%zu\n", outcome.best_epoch);
    std::printf("best_val_balanced_accuracy=%.17g\n", outcome.best_val);
    std::printf("test_balanced_accuracy=%.17g\n", outcome.test_balanced_accuracy);
    if (outcome.checkpoint_written)
        std::cout << "checkpoint=" << (std::filesystem::path(args.out) / "checkpoint.mgcp").string() << "\n";
    if (outcome.diverged) {
        std::cerr << "training diverged: " << outcome.divergence_note << "\n";
        return kExitDiverged;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split_name = "test";
};

int cmd_eval(const EvalArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    RestoredModel rm = restore_model(ckpt);
    Dataset ds = load_dataset(args.data);
    if (ds.class_names != rm.class_names)
        throw ContractError("dataset classes differ from the checkpoint's");

    SplitIndices splits = split(ds, rm.config.seed);
    const std::vector<std::size_t>& indices = args.split_name == "train" ? splits.train
                                            : args.split_name == "val"   ? splits.val
                                                                         : splits.test;
    double bacc = evaluate(*rm.model, ds, indices);
    std::printf("split=%s\n", args.split_name.c_str());
    std::printf("samples=%zu\n", indices.size());
    std::printf("balanced_accuracy=%.17g\n", bacc);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradCheckArgs {
    ConfigArgs config;
    double eps = 1e-5;
    double tol = 1e-6;
    std::size_t max_entries = 1000;  // per parameter; 0 = all
    bool corrupt_backward = false;
};

// The toy objective is the two-sample loss sum scaled by this constant. With
// an O(1) objective, central differences at eps 1e-5 carry ~5e-10 of absolute
// roundoff noise, so any entry whose true gradient is below ~1e-4 fails the
// 1e-6 relative bound no matter how correct the backward pass is (measured:
// max relative error 2.7e-4 over 85k entries at the default dims). Shrinking
// the objective keeps every analytic/numeric ratio intact but lets the 1e-8
// denominator floor of the relative-error formula absorb that noise; a
// corrupted backward pass still fails loudly (the sabotage fixture exits 4).
constexpr double kToyLossScale = 1e-5;

// Builds the standard toy fixture: three modalities (tabular + two embedding
// streams) at the configured dims, two samples, loss summed over both.
int cmd_gradcheck(const GradCheckArgs& args) {
    RunConfig cfg = assemble_config(args.config);
    echo_config(cfg);

    SynthSpec spec;
    spec.modalities = 3;
    spec.samples = 40;  // generator minimum; only the first two are used
    spec.classes = 2;
    spec.seed = cfg.seed;
    spec.embedding_dim = cfg.unstructured_dim;
    Dataset ds = gen_synth(spec);
    ds.samples.resize(2);
    fit_normalization(ds.schema, ds, {0, 1});

    Rng rng(derive_seed(cfg.seed, "init"));
    ParamRegistry params;
    Model model(cfg, ds.schema, ds.unstructured, ds.num_classes(), params, rng);

    detail::corrupt_backward_for_tests = args.corrupt_backward;
    auto f = [&]() {
        Tensor total = model.loss(ds.samples[0]);
        for (std::size_t i = 1; i < ds.samples.size(); ++i) total = add(total, model.loss(ds.samples[i]));
        return scale(total, kToyLossScale);
    };

    std::vector<Parameter> trainables = params.trainable();
    auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report = grad_check(f, trainables, args.eps, args.max_entries);
    double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::corrupt_backward_for_tests = false;

    std::printf("parameters_checked=%zu\n", trainables.size());
    std::printf("entries_checked=%zu\n", report.entries_checked);
    std::printf("max_rel_error=%.17g\n", report.max_rel_error);
    std::printf("worst_param=%s\n", report.worst_param.c_str());
    std::printf("worst_index=%zu\n", report.worst_index);
    std::printf("eps=%.17g\n", args.eps);
    std::printf("loss_scale=%g\n", kToyLossScale);
    std::printf("elapsed_seconds=%.3f\n", elapsed);

    if (!(report.max_rel_error < args.tol)) {
        std::cerr << "gradient check failed: max_rel_error " << report.max_rel_error
                  << " exceeds tolerance " << args.tol << "\n";
        return kExitVerifyFail;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect-graph

struct InspectArgs {
    std::string checkpoint;
    std::string data;
    std::string sample_id;
    std::string modality;
};

int cmd_inspect_graph(const InspectArgs& args) {
    Checkpoint ckpt = load_checkpoint(args.checkpoint);
    RestoredModel rm = restore_model(ckpt);
    Dataset ds = load_dataset(args.data);

    const Sample* sample = nullptr;
    for (const Sample& s : ds.samples) {
        if (s.id == args.sample_id) {
            sample = &s;
            break;
        }
    }
    if (sample == nullptr) throw ContractError("no sample with id '" + args.sample_id + "'");

    Compressor::Trace trace = rm.model->trace(*sample, args.modality);

    nlohmann::ordered_json j;
    j["num_nodes"] = trace.graph.num_nodes();
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& [i, k] : trace.graph.edges) edges.push_back({i, k});
    j["edges"] = std::move(edges);
    nlohmann::ordered_json contracted = nlohmann::ordered_json::array();
    for (const CoarsenResult& round : trace.rounds) {
        for (const Contraction& c : round.contracted) contracted.push_back({c.i, c.j, c.gate});
    }
    j["contracted"] = std::move(contracted);
    std::cout << j.dump() << "\n";
    return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

void add_config_flags(CLI::App* sc, ConfigArgs& args, CLI::Option*& seed_opt, CLI::Option*& epochs_opt) {
    sc->add_option("--config", args.config_path, "key=value config file");
    sc->add_option("--set", args.set_pairs, "override one config key (key=value, repeatable)");
    seed_opt = sc->add_option("--seed", args.seed, "override the run seed");
    epochs_opt = sc->add_option("--epochs", args.epochs, "override optim.epochs");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal gated-fusion pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
    synth->add_option("--spec", synth_args.spec_path, "key=value generator spec file");
    synth->add_option("--out", synth_args.out, "output dataset directory")->required();
    CLI::Option* synth_seed = synth->add_option("--seed", synth_args.seed, "override the generator seed");

    TrainArgs train_args;
    CLI::Option* train_seed = nullptr;
    CLI::Option* train_epochs = nullptr;
    CLI::App* train = app.add_subcommand("train", "train a model on a dataset directory");
    train->add_option("--data", train_args.data, "dataset directory")->required();
    train->add_option("--out", train_args.out, "run output directory")->required();
    add_config_flags(train, train_args.config, train_seed, train_epochs);

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on one split");
    eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
    eval->add_option("--data", eval_args.data, "dataset directory")->required();
    eval->add_option("--split", eval_args.split_name, "train, val, or test")
        ->check(CLI::IsMember({"train", "val", "test"}));

    GradCheckArgs gc_args;
    CLI::Option* gc_seed = nullptr;
    CLI::Option* gc_epochs = nullptr;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_config_flags(gradcheck, gc_args.config, gc_seed, gc_epochs);
    gradcheck->add_option("--eps", gc_args.eps, "finite-difference step")->check(CLI::PositiveNumber);
    gradcheck->add_option("--tol", gc_args.tol, "max relative error accepted")->check(CLI::PositiveNumber);
    gradcheck->add_option("--max-entries", gc_args.max_entries,
                          "cap probed entries per parameter (0 = all)");
    gradcheck->add_flag("--corrupt-backward", gc_args.corrupt_backward, "test fixture")->group("");

    InspectArgs inspect_args;
    CLI::App* inspect = app.add_subcommand("inspect-graph", "dump one modality's graph as JSON");
    inspect->add_option("--checkpoint", inspect_args.checkpoint, "checkpoint file")->required();
    inspect->add_option("--data", inspect_args.data, "dataset directory")->required();
    inspect->add_option("--sample", inspect_args.sample_id, "sample id")->required();
    inspect->add_option("--modality", inspect_args.modality, "modality name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    synth_args.seed_set = synth_seed->count() > 0;
    train_args.config.seed_set = train_seed->count() > 0;
    train_args.config.epochs_set = train_epochs->count() > 0;
    gc_args.config.seed_set = gc_seed->count() > 0;
    gc_args.config.epochs_set = gc_epochs->count() > 0;

    if (synth->parsed()) return run_guarded([&] { return cmd_synth(synth_args); });
    if (train->parsed()) return run_guarded([&] { return cmd_train(train_args); });
    if (eval->parsed()) return run_guarded([&] { return cmd_eval(eval_args); });
    if (gradcheck->parsed()) return run_guarded([&] { return cmd_gradcheck(gc_args); });
    if (inspect->parsed()) return run_guarded([&] { return cmd_inspect_graph(inspect_args); });
    return kExitUsage;
}
