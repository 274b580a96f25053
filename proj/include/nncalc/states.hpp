#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nncalc/dataset.hpp"
#include "nncalc/features.hpp"
#include "nncalc/mlp.hpp"

namespace nncalc {

// Binarized layer output, one '0'/'1' character per node in layer order.
struct LayerState {
    std::string bits;

    std::size_t size() const { return bits.size(); }
    auto operator<=>(const LayerState&) const = default;
};

LayerState binarize(std::span<const double> activations, Activation activation);

// Sparse per-class counts of the states one layer produced. Only observed
// states are stored, so memory is O(min(npts, 2^nodes)) per class.
struct StateHistogram {
    int layer_index = 0;
    int nodes = 0;
    bool output_layer = false;
    std::vector<std::map<LayerState, std::uint64_t>> counts;  // indexed by class
    std::uint64_t npts = 0;

    StateHistogram() = default;
    StateHistogram(int layer, int node_count, bool is_output, int num_classes = kNumClasses);

    int num_classes() const { return static_cast<int>(counts.size()); }
    void add(const LayerState& state, int class_id, std::uint64_t count = 1);
    // Key-wise count addition; shapes must match.
    void merge(const StateHistogram& other);
    std::uint64_t class_total(int class_id) const;
    // Empirical class frequency p_j of the measured points.
    double prior(int class_id) const;
    // Distinct states across all classes.
    std::uint64_t distinct_states() const;

    bool operator==(const StateHistogram&) const = default;
};

// Uniform reference over the n/m states assigned to each of m classes.
struct ReferenceDistribution {
    int classes = kNumClasses;
    int nodes = 1;

    double states() const;  // n = 2^nodes
    double probability() const { return static_cast<double>(classes) / states(); }
    std::uint64_t block_size() const;  // n/m
};

ReferenceDistribution reference_for(const StateHistogram& h);

// One layer's histogram per layer (hidden layers, then the output layer),
// taken over the given points with their current labels.
std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel);

// sum_{q != 0} q log2 q - log2(m/n), with q = count / (p_j * npts).
double modified_kl(const StateHistogram& h, const ReferenceDistribution& ref, int class_id);

// Assigned-state sets indexed by class.
using StateAssignment = std::vector<std::set<LayerState>>;

// sum q log2(q/p) with p = m/n on the class's assigned states, 0 elsewhere.
// Throws UndefinedDivergence if a measured state lies outside the block.
double exact_kl(const StateHistogram& h, const StateAssignment& assignment, const ReferenceDistribution& ref,
                int class_id);

// Canonical assignment: each class takes its own states (a shared state goes to
// the class that uses it most, ties to the lower class index, and a class keeps
// at most n/m of its most frequent states); blocks are then filled with unused
// states in lexicographic order. Requires nodes <= 20.
StateAssignment canonical_assignment(const StateHistogram& h, const ReferenceDistribution& ref);

// -sum_{q != 0} q log2(m/n) - log2(m/n). A diagnostic that assumes p = m/n on
// every used state.
double kl_gap_bound(const StateHistogram& h, const ReferenceDistribution& ref, int class_id);

enum class StateCategory { multiple_classes = 1, one_class = 2 };

struct StateCategories {
    std::map<LayerState, StateCategory> categories;
    double unused = 0.0;  // n - observed
};

StateCategories classify_states(const StateHistogram& h);

struct ClassStateStats {
    std::uint64_t nonzero_bins = 0;
    LayerState most_frequent;
    std::uint64_t most_count = 0;
    LayerState least_frequent;
    std::uint64_t least_count = 0;
    // Per bit: '0' or '1' when every used state agrees, 'x' otherwise.
    std::string constant_bits;
};

struct StateStatistics {
    int layer_index = 0;
    std::vector<ClassStateStats> classes;
    std::vector<LayerState> overlapping;  // states seen under two or more classes
};

StateStatistics state_statistics(const StateHistogram& h);

struct KLEntry {
    int class_id = 0;
    std::uint64_t used_states = 0;  // k
    double states = 0.0;            // n
    int classes = 0;                // m
    std::optional<double> modified; // absent when the class has no points
    std::optional<double> exact;    // absent when undefined under the canonical assignment
    double bound = 0.0;
    bool sufficient = false;        // modified >= 0
};

struct LayerKL {
    int layer_index = 0;
    int nodes = 0;
    bool output_layer = false;
    std::uint64_t nonzero_bins = 0;  // distinct states over all classes
    std::vector<KLEntry> classes;
};

struct KLReport {
    std::vector<LayerKL> layers;

    // Modified divergence; throws ValidationError if missing.
    double modified(std::size_t layer, Label label) const;
};

KLReport kl_report(std::span<const StateHistogram> histograms);

// layer,class,k,n,m,D_hat,D_exact_or_NA,bound,nonzero_bins
void write_analytics_csv(std::ostream& out, const KLReport& report);

// Full measurement: states, divergences, statistics.
struct Measurement {
    std::vector<StateHistogram> histograms;
    KLReport report;
    std::vector<StateStatistics> statistics;
};

Measurement measure(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel);

}  // namespace nncalc
