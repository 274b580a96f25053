#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nncalc/dataset.hpp"
#include "nncalc/features.hpp"
#include "nncalc/json_io.hpp"
#include "nncalc/mlp.hpp"
#include "nncalc/trojan_detect.hpp"

namespace nncalc {

enum class ExperimentKind { sensitivity, trojan_compare, monotonicity_sweep };

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment(std::string_view text);

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::trojan_compare;
    // npts, noise and train_ratio come from here; pattern and seed are set per trial.
    DatasetSpec dataset;
    NetworkConfig network;
    TrainingParams training;
    FeatureSelection features = FeatureSelection::default_set();
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    // sensitivity
    std::vector<Pattern> patterns{Pattern::circle, Pattern::xor_, Pattern::gauss, Pattern::spiral};
    int repetitions = 4;

    // trojan_compare
    std::vector<TrojanId> presets{TrojanId::T1, TrojanId::T2};
    std::optional<double> sigma;  // fixed threshold instead of an estimate
    SensitivityMode sigma_mode = SensitivityMode::retrain;
    std::optional<std::vector<double>> layer_weights;

    // monotonicity_sweep
    Pattern sweep_pattern = Pattern::circle;
    std::vector<double> noise_values{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<int> node_values{2, 3, 4, 5, 6, 7, 8};

    std::string output_dir;
};

void validate(const ExperimentConfig& cfg);
json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const json& j);

// 64-bit FNV-1a of the canonical (sorted-key) JSON, as 16 hex digits.
// output_dir is excluded.
std::string config_hash(const ExperimentConfig& cfg);

// Seeds a trial derives from its experiment seed.
struct TrialSeeds {
    std::uint64_t data = 0;
    std::uint64_t net = 0;
    std::uint64_t training = 0;
};
TrialSeeds trial_seeds(std::uint64_t seed);

// Average-rank Spearman correlation; nullopt for fewer than two points or a
// constant series.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// --- sensitivity ---

struct SensitivityRun {
    std::uint64_t seed = 0;
    Pattern pattern = Pattern::circle;
    std::vector<SensitivityEntry> entries;  // regen, retrain, untrained
    SensitivityProfile profile;
};

struct SensitivityResult {
    std::vector<SensitivityRun> runs;  // seed-major, then pattern
};

SensitivitySetup sensitivity_setup(const ExperimentConfig& cfg, Pattern pattern, std::uint64_t seed);
SensitivityResult run_sensitivity(const ExperimentConfig& cfg);
// seed,config_hash,dataset,mode,layer,class,stddev
void write_sensitivity_csv(std::ostream& out, const ExperimentConfig& cfg, const SensitivityResult& r);
// seed,config_hash,dataset,sigma_regen,sigma_retrain,sigma_untrained
void write_sensitivity_summary_csv(std::ostream& out, const ExperimentConfig& cfg, const SensitivityResult& r);

// --- trojan comparison ---

struct PairedModels {
    Network without_trojan;
    Network with_trojan;
    KLReport clean_eval_without;
    KLReport clean_eval_with;
    double train_accuracy_without = 0.0;
    double train_accuracy_with = 0.0;
};

// Train TwoT on clean data and TwT on the trojaned data (same points, same
// seeds), then measure both on the clean points.
PairedModels train_pair(const DatasetSpec& trojaned, const NetworkConfig& network, const TrainingParams& training,
                        const FeatureSelection& features, std::uint64_t net_seed);

struct TrojanTrial {
    TrojanId preset = TrojanId::T1;
    std::uint64_t seed = 0;
    DeltaReport deltas;
    TrojanVerdict verdict;
    double train_accuracy_without = 0.0;
    double train_accuracy_with = 0.0;
};

struct PresetSensitivity {
    TrojanId preset = TrojanId::T1;
    double sigma_regen = 0.0;
    double sigma_retrain = 0.0;
};

struct TrojanCompareResult {
    std::vector<PresetSensitivity> sensitivities;
    std::vector<TrojanTrial> trials;  // preset-major, then seed
};

TrojanCompareResult run_trojan_compare(const ExperimentConfig& cfg);
// preset,seed,config_hash,layer,delta_P,delta_N,weight,aggregate_P,aggregate_N,sigma,quadrant,
// twot_train_accuracy,twt_train_accuracy
void write_trojan_csv(std::ostream& out, const ExperimentConfig& cfg, const TrojanCompareResult& r);

// --- monotonicity sweep ---

struct SweepRow {
    std::string sweep;  // "noise" or "nodes"
    double value = 0.0;
    std::uint64_t seed = 0;
    double mean_modified = 0.0;  // mean D_hat over hidden layers and classes
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<double> noise_means;  // per noise value, averaged over seeds
    std::vector<double> node_means;
    std::optional<double> noise_spearman;
    std::optional<double> node_spearman;
};

double mean_hidden_modified(const KLReport& report);
SweepResult run_monotonicity_sweep(const ExperimentConfig& cfg);
// sweep,value,seed,config_hash,mean_D_hat
void write_sweep_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r);
// sweep,value,mean_D_hat,spearman
void write_sweep_summary_csv(std::ostream& out, const ExperimentConfig& cfg, const SweepResult& r);

// Runs cfg.experiment and writes its CSV and JSON artifacts under
// cfg.output_dir. Returns the JSON summary.
json run_experiment(const ExperimentConfig& cfg);

}  // namespace nncalc
