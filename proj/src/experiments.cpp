#include "nncalc/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "nncalc/errors.hpp"
#include "nncalc/parallel.hpp"
#include "nncalc/rng.hpp"

namespace nncalc {
namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw ValidationError("output", "cannot write " + (std::filesystem::path(dir) / name).string());
    return out;
}

DatasetSpec trial_spec(const ExperimentConfig& cfg, Pattern pattern, std::uint64_t seed) {
    DatasetSpec spec = cfg.dataset;
    spec.pattern = pattern;
    spec.trojan.reset();
    spec.seed = trial_seeds(seed).data;
    return spec;
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::sensitivity: return "sensitivity";
        case ExperimentKind::trojan_compare: return "trojan_compare";
        case ExperimentKind::monotonicity_sweep: return "monotonicity_sweep";
    }
    return "sensitivity";
}

ExperimentKind parse_experiment(std::string_view text) {
    for (auto k : {ExperimentKind::sensitivity, ExperimentKind::trojan_compare, ExperimentKind::monotonicity_sweep}) {
        if (to_string(k) == text) return k;
    }
    throw ValidationError("experiment", "unknown experiment '" + std::string(text) + "'");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw ValidationError("seeds", "at least one seed required");
    DatasetSpec probe = cfg.dataset;
    probe.trojan.reset();
    validate(probe);
    validate(cfg.network);
    if (cfg.network.input_dim != static_cast<int>(cfg.features.size())) {
        throw ValidationError("network.input_dim", "must equal the number of selected features");
    }
    if (cfg.experiment == ExperimentKind::sensitivity || (cfg.experiment == ExperimentKind::trojan_compare && !cfg.sigma)) {
        if (cfg.repetitions < 2) throw ValidationError("repetitions", "need at least 2 repetitions");
    }
    if (cfg.experiment == ExperimentKind::trojan_compare) {
        if (cfg.presets.empty()) throw ValidationError("presets", "at least one preset required");
        for (TrojanId id : cfg.presets) {
            if (id == TrojanId::custom) throw ValidationError("presets", "custom trojans need explicit regions");
        }
        if (cfg.sigma && !(*cfg.sigma >= 0.0)) throw ValidationError("sigma", "must be >= 0");
    }
    if (cfg.experiment == ExperimentKind::monotonicity_sweep) {
        for (double v : cfg.noise_values) {
            if (!(v >= 0.0 && v <= 0.5)) throw ValidationError("noise_values", "must be in [0, 0.5]");
        }
        for (int v : cfg.node_values) {
            if (v < 1 || v > kMaxNodesPerLayer) throw ValidationError("node_values", "must be in [1, 8]");
        }
    }
}

json to_json(const ExperimentConfig& cfg) {
    json presets = json::array();
    for (TrojanId id : cfg.presets) presets.push_back(to_string(id));
    json patterns = json::array();
    for (Pattern p : cfg.patterns) patterns.push_back(to_string(p));
    return {{"experiment", to_string(cfg.experiment)},
            {"dataset", to_json(cfg.dataset)},
            {"network", to_json(cfg.network)},
            {"training", to_json(cfg.training)},
            {"features", cfg.features.names()},
            {"seeds", cfg.seeds},
            {"patterns", patterns},
            {"repetitions", cfg.repetitions},
            {"presets", presets},
            {"sigma", cfg.sigma ? json(*cfg.sigma) : json(nullptr)},
            {"sigma_mode", to_string(cfg.sigma_mode)},
            {"layer_weights", cfg.layer_weights ? json(*cfg.layer_weights) : json(nullptr)},
            {"sweep_pattern", to_string(cfg.sweep_pattern)},
            {"noise_values", cfg.noise_values},
            {"node_values", cfg.node_values},
            {"output_dir", cfg.output_dir}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config", "expected an object");
    ExperimentConfig cfg;
    try {
        if (j.contains("experiment")) cfg.experiment = parse_experiment(j.at("experiment").get<std::string>());
        if (j.contains("dataset")) cfg.dataset = dataset_spec_from_json(j.at("dataset"));
        if (j.contains("features")) {
            cfg.features = features_from_json(j.at("features"));
            cfg.network.input_dim = static_cast<int>(cfg.features.size());
        }
        if (j.contains("network")) {
            json net = j.at("network");
            if (!net.contains("input_dim")) net["input_dim"] = cfg.network.input_dim;
            cfg.network = network_config_from_json(net);
        }
        if (j.contains("training")) cfg.training = training_params_from_json(j.at("training"));
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("patterns")) {
            cfg.patterns.clear();
            for (const auto& p : j.at("patterns")) cfg.patterns.push_back(parse_pattern(p.get<std::string>()));
        }
        if (j.contains("repetitions")) cfg.repetitions = j.at("repetitions").get<int>();
        if (j.contains("presets")) {
            cfg.presets.clear();
            for (const auto& p : j.at("presets")) cfg.presets.push_back(parse_trojan_id(p.get<std::string>()));
        }
        if (j.contains("sigma") && !j.at("sigma").is_null()) cfg.sigma = j.at("sigma").get<double>();
        if (j.contains("sigma_mode")) cfg.sigma_mode = parse_sensitivity_mode(j.at("sigma_mode").get<std::string>());
        if (j.contains("layer_weights") && !j.at("layer_weights").is_null()) {
            cfg.layer_weights = j.at("layer_weights").get<std::vector<double>>();
        }
        if (j.contains("sweep_pattern")) cfg.sweep_pattern = parse_pattern(j.at("sweep_pattern").get<std::string>());
        if (j.contains("noise_values")) cfg.noise_values = j.at("noise_values").get<std::vector<double>>();
        if (j.contains("node_values")) cfg.node_values = j.at("node_values").get<std::vector<int>>();
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError("config", e.what());
    }
    validate(cfg);
    return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output_dir");
    const std::string canonical = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TrialSeeds trial_seeds(std::uint64_t seed) { return {seed, Rng::derive(seed, 1), Rng::derive(seed, 2)}; }

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("spearman", "series lengths differ");
    if (a.size() < 2) return std::nullopt;
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

// --- sensitivity ---

SensitivitySetup sensitivity_setup(const ExperimentConfig& cfg, Pattern pattern, std::uint64_t seed) {
    SensitivitySetup setup;
    setup.dataset = trial_spec(cfg, pattern, seed);
    setup.network = cfg.network;
    setup.training = cfg.training;
    setup.training.seed = trial_seeds(seed).training;
    setup.features = cfg.features;
    setup.net_seed = trial_seeds(seed).net;
    return setup;
}

SensitivityResult run_sensitivity(const ExperimentConfig& cfg) {
    validate(cfg);
    struct Job {
        std::uint64_t seed;
        Pattern pattern;
        SensitivityMode mode;
    };
    std::vector<Job> jobs;
    for (auto seed : cfg.seeds) {
        for (Pattern p : cfg.patterns) {
            for (auto mode : {SensitivityMode::regen, SensitivityMode::retrain, SensitivityMode::untrained}) {
                jobs.push_back({seed, p, mode});
            }
        }
    }
    const auto entries = omp::run_trials(jobs.size(), [&](std::size_t i) {
        return estimate_sigma(sensitivity_setup(cfg, jobs[i].pattern, jobs[i].seed), jobs[i].mode, cfg.repetitions);
    });
    SensitivityResult result;
    for (std::size_t i = 0; i < jobs.size(); i += 3) {
        SensitivityRun run;
        run.seed = jobs[i].seed;
        run.pattern = jobs[i].pattern;
        run.entries = {entries[i], entries[i + 1], entries[i + 2]};
        run.profile = {entries[i].sigma, entries[i + 1].sigma, entries[i + 2].sigma, cfg.repetitions};
        result.runs.push_back(std::move(run));
    }
    return result;
}

void write_sensitivity_csv(std::ostream& out, const ExperimentConfig& cfg, const SensitivityResult& r) {
    const std::string hash = config_hash(cfg);
    out << "seed,config_hash,dataset,mode,layer,class,stddev\n";
    for (const auto& run : r.runs) {
        for (const auto& e : run.entries) {
            for (std::size_t l = 0; l < e.stddevs.size(); ++l) {
                for (std::size_t c = 0; c < e.stddevs[l].size(); ++c) {
                    out << run.seed << ',' << hash << ',' << to_string(run.pattern) << ',' << to_string(e.mode) << ','
                        << l << ',' << to_string(static_cast<Label>(c)) << ',' << num(e.stddevs[l][c]) << '\n';
                }
            }
        }
    }
}

void write_sensitivity_summary_csv(std::ostream& out, const ExperimentConfig& cfg, const SensitivityResult& r) {
    const std::string hash = config_hash(cfg);
    out << "seed,config_hash,dataset,sigma_regen,sigma_retrain,sigma_untrained\n";
    for (const auto& run : r.runs) {
        out << run.seed << ',' << hash << ',' << to_string(run.pattern) << ',' << num(run.profile.sigma_regen) << ','
            << num(run.profile.sigma_retrain) << ',' << num(run.profile.sigma_untrained) << '\n';
    }
}

// --- trojan comparison ---

PairedModels train_pair(const DatasetSpec& trojaned, const NetworkConfig& network, const TrainingParams& training,
                        const FeatureSelection& features, std::uint64_t net_seed) {
    DatasetSpec clean_spec = trojaned;
    clean_spec.trojan.reset();
    const Dataset clean = generate(clean_spec);
    const Dataset poisoned = generate(trojaned);
    const Network init = init_network(network, net_seed);

    PairedModels out;
    const TrainingResult a = train(init, clean, features, training);
    const TrainingResult b = train(init, poisoned, features, training);
    out.without_trojan = a.network;
    out.with_trojan = b.network;
    out.train_accuracy_without = a.metrics.epochs.empty() ? 0.0 : a.metrics.epochs.back().train_accuracy;
    out.train_accuracy_with = b.metrics.epochs.empty() ? 0.0 : b.metrics.epochs.back().train_accuracy;
    const auto points = clean.clean_points();
    out.clean_eval_without = measure(out.without_trojan, points, features).report;
    out.clean_eval_with = measure(out.with_trojan, points, features).report;
    return out;
}

TrojanCompareResult run_trojan_compare(const ExperimentConfig& cfg) {
    validate(cfg);
    TrojanCompareResult result;

    // Noise floors are estimated once per preset on its clean pattern, from the first seed.
    if (!cfg.sigma) {
        result.sensitivities = omp::run_trials(cfg.presets.size(), [&](std::size_t i) {
            const SensitivitySetup setup = sensitivity_setup(cfg, preset_pattern(cfg.presets[i]), cfg.seeds.front());
            return PresetSensitivity{cfg.presets[i],
                                     estimate_sigma(setup, SensitivityMode::regen, cfg.repetitions).sigma,
                                     estimate_sigma(setup, SensitivityMode::retrain, cfg.repetitions).sigma};
        });
    }
    const auto sigma_for = [&](std::size_t preset_index) {
        if (cfg.sigma) return *cfg.sigma;
        const auto& s = result.sensitivities[preset_index];
        return cfg.sigma_mode == SensitivityMode::regen ? s.sigma_regen : s.sigma_retrain;
    };

    const std::size_t nseeds = cfg.seeds.size();
    result.trials = omp::run_trials(cfg.presets.size() * nseeds, [&](std::size_t i) {
        const std::size_t pi = i / nseeds;
        const std::uint64_t seed = cfg.seeds[i % nseeds];
        const TrialSeeds ts = trial_seeds(seed);
        DatasetSpec spec = cfg.dataset;
        spec.pattern = preset_pattern(cfg.presets[pi]);
        spec.trojan = trojan_preset(cfg.presets[pi]);
        spec.seed = ts.data;
        TrainingParams training = cfg.training;
        training.seed = ts.training;
        const PairedModels pair = train_pair(spec, cfg.network, training, cfg.features, ts.net);
        TrojanTrial t;
        t.preset = cfg.presets[pi];
        t.seed = seed;
        t.deltas = compute_deltas(pair.clean_eval_without, pair.clean_eval_with, cfg.layer_weights);
        t.verdict = classify(t.deltas, sigma_for(pi));
        t.train_accuracy_without = pair.train_accuracy_without;
        t.train_accuracy_with = pair.train_accuracy_with;
        return t;
    });
    return result;
}

void write_trojan_csv(std::ostream& out, const ExperimentConfig& cfg, const TrojanCompareResult& r) {
    const std::string hash = config_hash(cfg);
    out << "preset,seed,config_hash,layer,delta_P,delta_N,weight,aggregate_P,aggregate_N,sigma,quadrant,"
           "twot_train_accuracy,twt_train_accuracy\n";
    for (const auto& t : r.trials) {
        for (const auto& l : t.deltas.layers) {
            out << to_string(t.preset) << ',' << t.seed << ',' << hash << ',' << l.layer_index << ',' << num(l.delta_p)
                << ',' << num(l.delta_n) << ',' << num(l.weight) << ',' << num(t.deltas.aggregate_p) << ','
                << num(t.deltas.aggregate_n) << ',' << num(t.verdict.sigma) << ',' << to_string(t.verdict.quadrant)
                << ',' << num(t.train_accuracy_without) << ',' << num(t.train_accuracy_with) << '\n';
        }
    }
}

// --- monotonicity sweep ---

double mean_hidden_modified(const KLReport& report) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t l = 0; l < report.layers.size(); ++l) {
        if (report.layers[l].output_layer) continue;
        for (Label c : {Label::N, Label::P}) {
            sum += report.modified(l, c);
            ++count;
        }
    }
    if (count == 0) throw ValidationError("report", "no hidden layers to average");
    return sum / static_cast<double>(count);
}

SweepResult run_monotonicity_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    struct Job {
        bool noise;
        double value;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double v : cfg.noise_values) {
        for (auto s : cfg.seeds) jobs.push_back({true, v, s});
    }
    for (int v : cfg.node_values) {
        for (auto s : cfg.seeds) jobs.push_back({false, static_cast<double>(v), s});
    }
    const auto means = omp::run_trials(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        DatasetSpec spec = trial_spec(cfg, cfg.sweep_pattern, job.seed);
        NetworkConfig net = cfg.network;
        if (job.noise) {
            spec.noise = job.value;
        } else {
            std::fill(net.hidden_layers.begin(), net.hidden_layers.end(), static_cast<int>(job.value));
        }
        TrainingParams training = cfg.training;
        training.seed = trial_seeds(job.seed).training;
        const Dataset data = generate(spec);
        const Network trained = train(init_network(net, trial_seeds(job.seed).net), data, cfg.features, training).network;
        return mean_hidden_modified(measure(trained, data.clean_points(), cfg.features).report);
    });

    SweepResult r;
    const std::size_t ns = cfg.seeds.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        r.rows.push_back({jobs[i].noise ? "noise" : "nodes", jobs[i].value, jobs[i].seed, means[i]});
    }
    const auto average = [&](std::size_t first_job, std::size_t count) {
        std::vector<double> out;
        for (std::size_t k = 0; k < count; ++k) {
            double sum = 0.0;
            for (std::size_t s = 0; s < ns; ++s) sum += means[first_job + k * ns + s];
            out.push_back(sum / static_cast<double>(ns));
        }
        return out;
    };
    r.noise_means = average(0, cfg.noise_values.size());
    r.node_means = average(cfg.noise_values.size() * ns, cfg.node_values.size());
    r.noise_spearman = spearman(cfg.noise_values, r.noise_means);
    const std::vector<double> nodes(cfg.node_values.begin(), cfg.node_values.end());
    r.node_spearman = spearman(nodes, r.node_means);
    return r;
}

void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r) {
    const std::string hash = config_hash(cfg);
    out << "sweep,value,seed,config_hash,mean_D_hat\n";
    for (const auto& row : r.rows) {
        out << row.sweep << ',' << num(row.value) << ',' << row.seed << ',' << hash << ',' << num(row.mean_modified)
            << '\n';
    }
}

void write_sweep_summary_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r) {
    const std::string hash = config_hash(cfg);
    out << "sweep,value,config_hash,mean_D_hat,spearman\n";
    const auto emit = [&](const char* name, const auto& values, const std::vector<double>& means,
                          const std::optional<double>& rho) {
        for (std::size_t i = 0; i < means.size(); ++i) {
            out << name << ',' << num(static_cast<double>(values[i])) << ',' << hash << ',' << num(means[i]) << ','
                << (rho ? num(*rho) : "NA") << '\n';
        }
    };
    emit("noise", cfg.noise_values, r.noise_means, r.noise_spearman);
    emit("nodes", cfg.node_values, r.node_means, r.node_spearman);
}

json run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    if (!cfg.output_dir.empty()) std::filesystem::create_directories(cfg.output_dir);
    json summary = {{"config", to_json(cfg)}, {"config_hash", config_hash(cfg)}};
    const auto write = [&](const std::string& name, auto&& writer) {
        if (cfg.output_dir.empty()) return;
        std::ofstream out = open_output(cfg.output_dir, name);
        writer(out);
    };
    switch (cfg.experiment) {
        case ExperimentKind::sensitivity: {
            const SensitivityResult r = run_sensitivity(cfg);
            write("sensitivity.csv", [&](std::ostream& o) { write_sensitivity_csv(o, cfg, r); });
            write("sensitivity_summary.csv", [&](std::ostream& o) { write_sensitivity_summary_csv(o, cfg, r); });
            json runs = json::array();
            for (const auto& run : r.runs) {
                runs.push_back({{"seed", run.seed}, {"dataset", to_string(run.pattern)}, {"profile", to_json(run.profile)}});
            }
            summary["runs"] = runs;
            break;
        }
        case ExperimentKind::trojan_compare: {
            const TrojanCompareResult r = run_trojan_compare(cfg);
            write("trojan_compare.csv", [&](std::ostream& o) { write_trojan_csv(o, cfg, r); });
            json trials = json::array();
            for (const auto& t : r.trials) {
                trials.push_back({{"preset", to_string(t.preset)}, {"seed", t.seed}, {"verdict", to_json(t.verdict)}});
            }
            json sens = json::array();
            for (const auto& s : r.sensitivities) {
                sens.push_back({{"preset", to_string(s.preset)}, {"sigma_regen", s.sigma_regen}, {"sigma_retrain", s.sigma_retrain}});
            }
            summary["trials"] = trials;
            summary["sensitivities"] = sens;
            break;
        }
        case ExperimentKind::monotonicity_sweep: {
            const SweepResult r = run_monotonicity_sweep(cfg);
            write("sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, cfg, r); });
            write("sweep_summary.csv", [&](std::ostream& o) { write_sweep_summary_csv(o, cfg, r); });
            summary["noise_means"] = r.noise_means;
            summary["node_means"] = r.node_means;
            summary["noise_spearman"] = r.noise_spearman ? json(*r.noise_spearman) : json(nullptr);
            summary["node_spearman"] = r.node_spearman ? json(*r.node_spearman) : json(nullptr);
            break;
        }
    }
    write("summary.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
    return summary;
}

}  // namespace nncalc
