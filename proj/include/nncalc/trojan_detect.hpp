#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "nncalc/dataset.hpp"
#include "nncalc/features.hpp"
#include "nncalc/mlp.hpp"
#include "nncalc/states.hpp"

namespace nncalc {

struct LayerDelta {
    int layer_index = 0;
    double delta_p = 0.0;  // D_hat(TwoT/P) - D_hat(TwT/P)
    double delta_n = 0.0;
    double weight = 0.0;
};

struct DeltaReport {
    std::vector<LayerDelta> layers;
    double aggregate_p = 0.0;
    double aggregate_n = 0.0;
};

// Uniform over hidden layers, zero on the output layer.
std::vector<double> default_layer_weights(const KLReport& report);

// Weights are renormalized to sum to 1; they must be non-negative with a
// positive sum.
DeltaReport compute_deltas(const KLReport& without_trojan, const KLReport& with_trojan,
                           std::optional<std::vector<double>> weights = std::nullopt);

enum class Quadrant { FromPtoN, FromNtoP, BothClasses, NotDetectable };

std::string_view to_string(Quadrant q);

struct TrojanVerdict {
    Quadrant quadrant = Quadrant::NotDetectable;
    double sigma = 0.0;
    DeltaReport evidence;
};

// Both aggregates inside [-sigma, sigma] -> NotDetectable; P above and N below
// -> FromPtoN; the mirror -> FromNtoP; both above -> BothClasses; any other
// combination -> NotDetectable.
TrojanVerdict classify(const DeltaReport& deltas, double sigma);

enum class SensitivityMode { regen, retrain, untrained };

std::string_view to_string(SensitivityMode mode);
SensitivityMode parse_sensitivity_mode(std::string_view text);

struct SensitivitySetup {
    DatasetSpec dataset;
    NetworkConfig network;
    TrainingParams training;
    FeatureSelection features = FeatureSelection::default_set();
    std::uint64_t net_seed = 0;
};

struct SensitivityEntry {
    SensitivityMode mode = SensitivityMode::regen;
    int repetitions = 0;
    // Sample standard deviation of D_hat per (hidden layer, class).
    std::vector<std::vector<double>> stddevs;
    double sigma = 0.0;  // mean of stddevs
};

struct SensitivityProfile {
    double sigma_regen = 0.0;
    double sigma_retrain = 0.0;
    double sigma_untrained = 0.0;
    int repetitions = 0;
};

// Mean over (hidden layer, class) of the sample standard deviation of D_hat
// across reports. Needs at least two reports of one architecture.
SensitivityEntry spread_of(std::span<const KLReport> reports);

// regen: one trained model measured on `reps` regenerated datasets.
// retrain: `reps` freshly initialized and trained models on fixed data.
// untrained: `reps` freshly initialized models.
// Every measurement uses the clean points of the dataset.
SensitivityEntry estimate_sigma(const SensitivitySetup& setup, SensitivityMode mode, int reps);

SensitivityProfile sensitivity_profile(const SensitivitySetup& setup, int reps);

}  // namespace nncalc
