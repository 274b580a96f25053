// Command-line front end: dataset generation, training, state analysis, the
// three experiment drivers, and the HTTP service.
#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nncalc/dataset.hpp"
#include "nncalc/errors.hpp"
#include "nncalc/experiments.hpp"
#include "nncalc/json_io.hpp"
#include "nncalc/mlp.hpp"
#include "nncalc/service.hpp"
#include "nncalc/states.hpp"

namespace fs = std::filesystem;
using namespace nncalc;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitTraining = 3;

struct DataFlags {
    std::string pattern = "circle";
    int npts = 500;
    double noise = 0.0;
    std::string trojan;
    std::uint64_t seed = 1;
    double train_ratio = 0.5;
    std::string csv;  // load instead of generating
};

struct NetFlags {
    std::string layers = "8,8,8,8,8,8";
    std::string activation = "tanh";
    std::string output_activation = "tanh";
    std::string regularization = "none";
    double regularization_rate = 0.0;
    std::string features = "X1,X2,X1^2,X2^2,X1*X2";
    std::uint64_t net_seed = 1;
};

struct TrainFlags {
    double learning_rate = 0.03;
    int batch_size = 10;
    int epochs = 300;
    std::uint64_t seed = 1;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
    cmd->add_option("--pattern", f.pattern, "circle, xor, gauss or spiral");
    cmd->add_option("--npts", f.npts, "number of points");
    cmd->add_option("--noise", f.noise, "noise level in [0, 0.5]");
    cmd->add_option("--trojan", f.trojan, "trojan preset T1..T9");
    cmd->add_option("--seed", f.seed, "dataset seed");
    cmd->add_option("--train-ratio", f.train_ratio, "fraction of points used for training");
    cmd->add_option("--data", f.csv, "read the dataset from a CSV file instead");
}

void add_net_flags(CLI::App* cmd, NetFlags& f) {
    cmd->add_option("--layers", f.layers, "hidden layer sizes, comma separated");
    cmd->add_option("--activation", f.activation, "tanh, relu, sigmoid or linear");
    cmd->add_option("--output-activation", f.output_activation, "activation of the output node");
    cmd->add_option("--regularization", f.regularization, "none, L1 or L2");
    cmd->add_option("--regularization-rate", f.regularization_rate, "penalty rate");
    cmd->add_option("--features", f.features, "input features, comma separated");
    cmd->add_option("--net-seed", f.net_seed, "weight initialization seed");
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--learning-rate", f.learning_rate, "SGD step size");
    cmd->add_option("--batch-size", f.batch_size, "minibatch size");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--train-seed", f.seed, "shuffle seed");
}

Dataset load_dataset(const DataFlags& f) {
    DatasetSpec spec;
    spec.pattern = parse_pattern(f.pattern);
    spec.npts = f.npts;
    spec.noise = f.noise;
    spec.seed = f.seed;
    spec.train_ratio = f.train_ratio;
    if (!f.trojan.empty()) spec.trojan = trojan_preset(parse_trojan_id(f.trojan));
    if (!f.csv.empty()) {
        std::ifstream in(f.csv);
        if (!in) throw ValidationError("data", "cannot open " + f.csv);
        return read_csv(in);
    }
    return generate(spec);
}

std::vector<int> parse_ints(const std::string& csv, const char* field) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ValidationError(field, "not an integer: '" + item + "'");
        }
    }
    return out;
}

template <class T>
std::vector<T> parse_list(const std::string& csv, const char* field) {
    std::vector<T> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            if constexpr (std::is_floating_point_v<T>) {
                out.push_back(std::stod(item));
            } else {
                out.push_back(static_cast<T>(std::stoull(item)));
            }
        } catch (const std::exception&) {
            throw ValidationError(field, "bad value '" + item + "'");
        }
    }
    return out;
}

NetworkConfig network_config(const NetFlags& f, const FeatureSelection& sel) {
    NetworkConfig c;
    c.input_dim = static_cast<int>(sel.size());
    c.hidden_layers = parse_ints(f.layers, "layers");
    c.activation = parse_activation(f.activation);
    c.output_activation = parse_activation(f.output_activation);
    c.regularization = parse_regularization(f.regularization);
    c.regularization_rate = f.regularization_rate;
    validate(c);
    return c;
}

TrainingParams training_params(const TrainFlags& f) {
    TrainingParams p;
    p.learning_rate = f.learning_rate;
    p.batch_size = f.batch_size;
    p.epochs = f.epochs;
    p.seed = f.seed;
    return p;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw ValidationError("output", "cannot write to " + dir);
    return out;
}

void write_json(const std::string& dir, const std::string& name, const json& j) {
    auto out = open_out(dir, name);
    out << j.dump(2) << '\n';
}

json read_json(const std::string& path, const char* field) {
    std::ifstream in(path);
    if (!in) throw ValidationError(field, "cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(field, "malformed JSON in " + path);
    return j;
}

void print_report(const KLReport& report) {
    std::printf("%-6s %-6s %6s %6s %10s %10s %10s\n", "layer", "class", "k", "n", "D_hat", "D_exact", "bound");
    for (const auto& l : report.layers) {
        for (const auto& e : l.classes) {
            std::printf("%-6d %-6s %6zu %6.0f %10.5f %10s %10.5f\n", l.layer_index,
                        std::string(to_string(static_cast<Label>(e.class_id))).c_str(), static_cast<std::size_t>(e.used_states), e.states,
                        e.modified.value_or(std::nan("")),
                        e.exact ? std::to_string(*e.exact).c_str() : "NA", e.bound);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural network calculator: train small MLPs and measure their layer states"};
    app.require_subcommand(1);
    std::string output;

    DataFlags data;
    NetFlags net;
    TrainFlags training;

    auto* gen = app.add_subcommand("generate", "Generate a labeled 2-D dataset");
    add_data_flags(gen, data);
    gen->add_option("--output", output, "directory for dataset.csv and dataset.json");

    auto* tr = app.add_subcommand("train", "Train a network and save it");
    add_data_flags(tr, data);
    add_net_flags(tr, net);
    add_train_flags(tr, training);
    tr->add_option("--output", output, "directory for model.json and metrics.csv");

    std::string model_path;
    std::string split = "all";
    auto* an = app.add_subcommand("analyze", "Capture layer states and KL measures of a saved model");
    add_data_flags(an, data);
    an->add_option("--model", model_path, "model.json written by train")->required();
    an->add_option("--features", net.features, "input features, comma separated");
    an->add_option("--split", split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
    an->add_option("--output", output, "directory for analytics.csv, states.json and kl.json");

    std::string config_path;
    std::string seeds;
    int repetitions = 0;
    std::string presets;
    double sigma = -1.0;
    std::string sigma_mode;
    std::string noise_values;
    std::string node_values;
    std::string patterns;
    const auto add_experiment = [&](const char* name, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", config_path, "experiment config JSON");
        cmd->add_option("--seeds", seeds, "comma separated experiment seeds");
        cmd->add_option("--output", output, "directory for CSV and JSON artifacts");
        add_data_flags(cmd, data);
        add_net_flags(cmd, net);
        add_train_flags(cmd, training);
        return cmd;
    };
    auto* sens = add_experiment("sensitivity", "Estimate sigma under regen, retrain and untrained variation");
    sens->add_option("--repetitions", repetitions, "repetitions per mode (>= 2)");
    sens->add_option("--patterns", patterns, "datasets to cover, comma separated");
    auto* tc = add_experiment("trojan-compare", "Train paired models with and without a trojan and compare");
    tc->add_option("--presets", presets, "trojan presets, comma separated");
    tc->add_option("--repetitions", repetitions, "repetitions for the sigma estimate");
    tc->add_option("--sigma", sigma, "fixed detection threshold");
    tc->add_option("--sigma-mode", sigma_mode, "regen or retrain estimate for the threshold");
    auto* sw = add_experiment("sweep", "Mean D_hat against noise and nodes per layer");
    sw->add_option("--noise-values", noise_values, "noise levels, comma separated");
    sw->add_option("--node-values", node_values, "nodes per layer, comma separated");

    int port = 8080;
    std::string host = "127.0.0.1";
    int ttl = 3600;
    std::string static_dir;
    std::string cors_origin = "*";
    auto* serve = app.add_subcommand("serve", "Run the HTTP analysis service");
    serve->add_option("--port", port, "listen port");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--ttl", ttl, "idle session lifetime in seconds");
    serve->add_option("--static", static_dir, "directory of UI assets to serve at /");
    serve->add_option("--cors-origin", cors_origin, "allowed browser origin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (gen->parsed()) {
            const Dataset d = load_dataset(data);
            if (output.empty()) {
                write_csv(std::cout, d);
            } else {
                auto out = open_out(output, "dataset.csv");
                write_csv(out, d);
                write_json(output, "dataset.json", to_json(d.spec));
            }
        } else if (tr->parsed()) {
            const Dataset d = load_dataset(data);
            const FeatureSelection sel = FeatureSelection::parse(net.features);
            const NetworkConfig config = network_config(net, sel);
            const TrainingResult r = train(init_network(config, net.net_seed), d, sel, training_params(training),
                                           [&](const EpochMetrics& m) {
                                               if (m.epoch % 50 == 0) {
                                                   std::fprintf(stderr, "epoch %d  train mse %.5f  acc %.4f\n",
                                                                m.epoch, m.train_mse, m.train_accuracy);
                                               }
                                               return true;
                                           });
            const auto& last = r.metrics.epochs.back();
            std::printf("train accuracy %.4f  test accuracy %.4f\n", last.train_accuracy, last.test_accuracy);
            if (!output.empty()) {
                json model = to_json(r.network);
                model["features"] = sel.names();
                write_json(output, "model.json", model);
                auto out = open_out(output, "metrics.csv");
                out << "epoch,train_mse,test_mse,train_accuracy,test_accuracy\n";
                for (const auto& m : r.metrics.epochs) {
                    char line[160];
                    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.train_mse,
                                  m.test_mse, m.train_accuracy, m.test_accuracy);
                    out << line;
                }
            }
        } else if (an->parsed()) {
            const json model = read_json(model_path, "model");
            const Network network = network_from_json(model);
            FeatureSelection sel = FeatureSelection::parse(net.features);
            if (model.contains("features") && an->count("--features") == 0) sel = features_from_json(model["features"]);
            const Dataset d = load_dataset(data);
            const auto points = split == "train" ? d.train : split == "test" ? d.test : d.all_points();
            const Measurement m = measure(network, points, sel);
            print_report(m.report);
            if (!output.empty()) {
                auto out = open_out(output, "analytics.csv");
                write_analytics_csv(out, m.report);
                json hist = json::array();
                for (const auto& h : m.histograms) hist.push_back(to_json(h));
                write_json(output, "states.json", hist);
                json stats = json::array();
                for (const auto& s : m.statistics) stats.push_back(to_json(s));
                write_json(output, "kl.json", {{"report", to_json(m.report)}, {"statistics", stats}});
            }
        } else if (sens->parsed() || tc->parsed() || sw->parsed()) {
            CLI::App* cmd = sens->parsed() ? sens : tc->parsed() ? tc : sw;
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = experiment_config_from_json(read_json(config_path, "config"));
            cfg.experiment = sens->parsed() ? ExperimentKind::sensitivity
                             : tc->parsed() ? ExperimentKind::trojan_compare
                                            : ExperimentKind::monotonicity_sweep;
            const auto given = [&](const char* flag) {
                const CLI::Option* opt = cmd->get_option_no_throw(flag);
                return opt != nullptr && opt->count() > 0;
            };
            if (given("--seeds")) cfg.seeds = parse_list<std::uint64_t>(seeds, "seeds");
            if (given("--npts")) cfg.dataset.npts = data.npts;
            if (given("--noise")) cfg.dataset.noise = data.noise;
            if (given("--train-ratio")) cfg.dataset.train_ratio = data.train_ratio;
            if (given("--features")) {
                cfg.features = FeatureSelection::parse(net.features);
                cfg.network.input_dim = static_cast<int>(cfg.features.size());
            }
            if (given("--layers")) cfg.network.hidden_layers = parse_ints(net.layers, "layers");
            if (given("--activation")) cfg.network.activation = parse_activation(net.activation);
            if (given("--output-activation")) cfg.network.output_activation = parse_activation(net.output_activation);
            if (given("--regularization")) cfg.network.regularization = parse_regularization(net.regularization);
            if (given("--regularization-rate")) cfg.network.regularization_rate = net.regularization_rate;
            if (given("--learning-rate")) cfg.training.learning_rate = training.learning_rate;
            if (given("--batch-size")) cfg.training.batch_size = training.batch_size;
            if (given("--epochs")) cfg.training.epochs = training.epochs;
            if (given("--repetitions")) cfg.repetitions = repetitions;
            if (given("--pattern")) cfg.sweep_pattern = parse_pattern(data.pattern);
            if (given("--patterns")) {
                cfg.patterns.clear();
                std::stringstream ss(patterns);
                for (std::string item; std::getline(ss, item, ',');) cfg.patterns.push_back(parse_pattern(item));
            }
            if (given("--presets")) {
                cfg.presets.clear();
                std::stringstream ss(presets);
                for (std::string item; std::getline(ss, item, ',');) cfg.presets.push_back(parse_trojan_id(item));
            }
            if (given("--sigma")) cfg.sigma = sigma;
            if (given("--sigma-mode")) cfg.sigma_mode = parse_sensitivity_mode(sigma_mode);
            if (given("--noise-values")) cfg.noise_values = parse_list<double>(noise_values, "noise_values");
            if (given("--node-values")) cfg.node_values = parse_ints(node_values, "node_values");
            if (given("--output")) cfg.output_dir = output;
            const json summary = run_experiment(cfg);
            std::cout << summary.dump(2) << '\n';
        } else if (serve->parsed()) {
            service::AnalysisService svc{std::chrono::seconds{ttl}};
            httplib::Server server;
            service::ServerOptions options;
            options.cors_origin = cors_origin;
            if (!static_dir.empty()) options.static_dir = static_dir;
            service::mount(server, svc, options);
            std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
            if (!server.listen(host, port)) {
                std::fprintf(stderr, "error: cannot listen on %s:%d\n", host.c_str(), port);
                return 1;
            }
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "error: training failed: %s\n", e.what());
        return kExitTraining;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
