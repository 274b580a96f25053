#include "nncalc/states.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nncalc/errors.hpp"
#include "nncalc/kernels.hpp"

namespace nncalc {
namespace {

double plogp_sum(const std::map<LayerState, std::uint64_t>& counts, double total) {
    double sum = 0.0;
    for (const auto& [state, count] : counts) {
        const double q = static_cast<double>(count) / total;
        sum += q * std::log2(q);
    }
    return sum;
}

void check_class(const StateHistogram& h, int class_id) {
    if (class_id < 0 || class_id >= h.num_classes()) throw ValidationError("class", "class index out of range");
    if (h.class_total(class_id) == 0) throw ValidationError("class", "class prior is zero");
}

LayerState state_from_index(std::uint64_t index, int nodes) {
    LayerState s;
    s.bits.resize(static_cast<std::size_t>(nodes));
    for (int b = 0; b < nodes; ++b) {
        s.bits[static_cast<std::size_t>(b)] = (index >> (nodes - 1 - b)) & 1U ? '1' : '0';
    }
    return s;
}

}  // namespace

LayerState binarize(std::span<const double> activations, Activation activation) {
    const double threshold = state_threshold(activation);
    LayerState s;
    s.bits.reserve(activations.size());
    for (double v : activations) s.bits.push_back(v > threshold ? '1' : '0');
    return s;
}

StateHistogram::StateHistogram(int layer, int node_count, bool is_output, int num_classes)
    : layer_index(layer), nodes(node_count), output_layer(is_output), counts(static_cast<std::size_t>(num_classes)) {}

void StateHistogram::add(const LayerState& state, int class_id, std::uint64_t count) {
    if (state.size() != static_cast<std::size_t>(nodes)) throw ValidationError("state", "bit count != node count");
    if (count == 0) return;
    counts.at(static_cast<std::size_t>(class_id))[state] += count;
    npts += count;
}

void StateHistogram::merge(const StateHistogram& other) {
    if (other.nodes != nodes || other.num_classes() != num_classes()) {
        throw ValidationError("histogram", "cannot merge histograms of different shape");
    }
    for (int j = 0; j < num_classes(); ++j) {
        for (const auto& [state, count] : other.counts[static_cast<std::size_t>(j)]) add(state, j, count);
    }
}

std::uint64_t StateHistogram::class_total(int class_id) const {
    std::uint64_t total = 0;
    for (const auto& [state, count] : counts.at(static_cast<std::size_t>(class_id))) total += count;
    return total;
}

double StateHistogram::prior(int class_id) const {
    return npts == 0 ? 0.0 : static_cast<double>(class_total(class_id)) / static_cast<double>(npts);
}

std::uint64_t StateHistogram::distinct_states() const {
    std::set<LayerState> seen;
    for (const auto& m : counts) {
        for (const auto& kv : m) seen.insert(kv.first);
    }
    return seen.size();
}

double ReferenceDistribution::states() const { return std::ldexp(1.0, nodes); }

std::uint64_t ReferenceDistribution::block_size() const {
    if (nodes >= 64) throw ValidationError("reference.nodes", "too many nodes to enumerate");
    return (std::uint64_t{1} << nodes) / static_cast<std::uint64_t>(classes);
}

ReferenceDistribution reference_for(const StateHistogram& h) { return {h.num_classes(), h.nodes}; }

std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel) {
    return omp::capture_states(net, points, sel);
}

double modified_kl(const StateHistogram& h, const ReferenceDistribution& ref, int class_id) {
    check_class(h, class_id);
    const double total = static_cast<double>(h.class_total(class_id));
    return plogp_sum(h.counts[static_cast<std::size_t>(class_id)], total) - std::log2(ref.probability());
}

double exact_kl(const StateHistogram& h, const StateAssignment& assignment, const ReferenceDistribution& ref,
                int class_id) {
    check_class(h, class_id);
    if (assignment.size() != static_cast<std::size_t>(ref.classes)) {
        throw ValidationError("assignment", "one block per class required");
    }
    const std::uint64_t block = ref.block_size();
    std::set<LayerState> seen;
    for (std::size_t j = 0; j < assignment.size(); ++j) {
        if (assignment[j].size() != block) {
            throw ValidationError("assignment[" + std::to_string(j) + "]", "block must hold n/m states");
        }
        for (const LayerState& s : assignment[j]) {
            if (s.size() != static_cast<std::size_t>(ref.nodes)) {
                throw ValidationError("assignment[" + std::to_string(j) + "]", "state length != node count");
            }
            if (!seen.insert(s).second) throw ValidationError("assignment", "blocks must be disjoint");
        }
    }
    const auto& mine = assignment[static_cast<std::size_t>(class_id)];
    const double total = static_cast<double>(h.class_total(class_id));
    const double p = ref.probability();
    double sum = 0.0;
    for (const auto& [state, count] : h.counts[static_cast<std::size_t>(class_id)]) {
        if (!mine.contains(state)) {
            throw UndefinedDivergence("state " + state.bits + " is measured but has zero reference probability");
        }
        const double q = static_cast<double>(count) / total;
        sum += q * std::log2(q / p);
    }
    return sum;
}

StateAssignment canonical_assignment(const StateHistogram& h, const ReferenceDistribution& ref) {
    if (ref.nodes > 20) throw ValidationError("reference.nodes", "assignment enumeration limited to 20 nodes");
    const auto m = static_cast<std::size_t>(ref.classes);
    const std::uint64_t block = ref.block_size();
    StateAssignment out(m);
    std::set<LayerState> taken;

    // Owner of each observed state: highest count, ties to the lower class.
    std::map<LayerState, std::size_t> owner;
    std::map<LayerState, std::uint64_t> best;
    for (std::size_t j = 0; j < m && j < h.counts.size(); ++j) {
        for (const auto& [state, count] : h.counts[j]) {
            auto it = best.find(state);
            if (it == best.end() || count > it->second) {
                best[state] = count;
                owner[state] = j;
            }
        }
    }
    auto by_frequency = [&](std::size_t j, bool owned_only) {
        std::vector<std::pair<LayerState, std::uint64_t>> v;
        if (j >= h.counts.size()) return v;
        for (const auto& kv : h.counts[j]) {
            if (!owned_only || owner[kv.first] == j) v.push_back(kv);
        }
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        return v;
    };
    for (std::size_t j = 0; j < m; ++j) {
        for (const auto& [state, count] : by_frequency(j, true)) {
            if (out[j].size() == block) break;
            out[j].insert(state);
            taken.insert(state);
        }
    }
    // Used states still unplaced go to any class that uses them and has room.
    for (std::size_t j = 0; j < m; ++j) {
        for (const auto& [state, count] : by_frequency(j, false)) {
            if (out[j].size() == block) break;
            if (taken.insert(state).second) out[j].insert(state);
        }
    }
    const std::uint64_t n = std::uint64_t{1} << ref.nodes;
    std::size_t j = 0;
    for (std::uint64_t idx = 0; idx < n; ++idx) {
        LayerState s = state_from_index(idx, ref.nodes);
        if (taken.contains(s)) continue;
        while (j < m && out[j].size() == block) ++j;
        if (j == m) break;
        out[j].insert(std::move(s));
    }
    return out;
}

double kl_gap_bound(const StateHistogram& h, const ReferenceDistribution& ref, int class_id) {
    check_class(h, class_id);
    const double total = static_cast<double>(h.class_total(class_id));
    const double log_p = std::log2(ref.probability());
    double sum = 0.0;
    for (const auto& [state, count] : h.counts[static_cast<std::size_t>(class_id)]) {
        sum -= static_cast<double>(count) / total * log_p;
    }
    return sum - log_p;
}

StateCategories classify_states(const StateHistogram& h) {
    StateCategories out;
    std::map<LayerState, int> classes_per_state;
    for (const auto& m : h.counts) {
        for (const auto& kv : m) ++classes_per_state[kv.first];
    }
    for (const auto& [state, n] : classes_per_state) {
        out.categories[state] = n >= 2 ? StateCategory::multiple_classes : StateCategory::one_class;
    }
    out.unused = std::ldexp(1.0, h.nodes) - static_cast<double>(classes_per_state.size());
    return out;
}

StateStatistics state_statistics(const StateHistogram& h) {
    StateStatistics out;
    out.layer_index = h.layer_index;
    std::map<LayerState, int> classes_per_state;
    for (const auto& m : h.counts) {
        ClassStateStats cs;
        cs.nonzero_bins = m.size();
        if (!m.empty()) {
            cs.constant_bits = m.begin()->first.bits;
            // Map iteration is lexicographic, so strict comparisons keep the
            // smallest bit string on ties.
            cs.most_count = 0;
            cs.least_count = UINT64_MAX;
            for (const auto& [state, count] : m) {
                if (count > cs.most_count) {
                    cs.most_count = count;
                    cs.most_frequent = state;
                }
                if (count < cs.least_count) {
                    cs.least_count = count;
                    cs.least_frequent = state;
                }
                for (std::size_t b = 0; b < state.bits.size(); ++b) {
                    if (cs.constant_bits[b] != state.bits[b]) cs.constant_bits[b] = 'x';
                }
                ++classes_per_state[state];
            }
        }
        out.classes.push_back(std::move(cs));
    }
    for (const auto& [state, n] : classes_per_state) {
        if (n >= 2) out.overlapping.push_back(state);
    }
    return out;
}

double KLReport::modified(std::size_t layer, Label label) const {
    if (layer >= layers.size()) throw ValidationError("report.layer", "layer out of range");
    const auto j = static_cast<std::size_t>(class_index(label));
    const auto& entries = layers[layer].classes;
    if (j >= entries.size() || !entries[j].modified) {
        throw ValidationError("report.layers[" + std::to_string(layer) + "]", "no divergence for class " +
                                                                                  std::string(to_string(label)));
    }
    return *entries[j].modified;
}

KLReport kl_report(std::span<const StateHistogram> histograms) {
    KLReport report;
    for (const StateHistogram& h : histograms) {
        const ReferenceDistribution ref = reference_for(h);
        LayerKL layer;
        layer.layer_index = h.layer_index;
        layer.nodes = h.nodes;
        layer.output_layer = h.output_layer;
        layer.nonzero_bins = h.distinct_states();
        std::optional<StateAssignment> assignment;
        if (h.nodes <= 20 && ref.states() >= ref.classes) assignment = canonical_assignment(h, ref);
        for (int j = 0; j < h.num_classes(); ++j) {
            KLEntry e;
            e.class_id = j;
            e.used_states = h.counts[static_cast<std::size_t>(j)].size();
            e.states = ref.states();
            e.classes = ref.classes;
            if (h.class_total(j) > 0) {
                e.modified = modified_kl(h, ref, j);
                e.bound = kl_gap_bound(h, ref, j);
                e.sufficient = *e.modified >= 0.0;
                if (assignment) {
                    try {
                        e.exact = exact_kl(h, *assignment, ref, j);
                    } catch (const UndefinedDivergence&) {
                        e.exact.reset();
                    }
                }
            }
            layer.classes.push_back(e);
        }
        report.layers.push_back(std::move(layer));
    }
    return report;
}

void write_analytics_csv(std::ostream& out, const KLReport& report) {
    out << "layer,class,k,n,m,D_hat,D_exact_or_NA,bound,nonzero_bins\n";
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const LayerKL& layer : report.layers) {
        for (const KLEntry& e : layer.classes) {
            out << layer.layer_index << ',' << to_string(static_cast<Label>(e.class_id)) << ',' << e.used_states << ','
                << num(e.states) << ',' << e.classes << ',' << (e.modified ? num(*e.modified) : "NA") << ','
                << (e.exact ? num(*e.exact) : "NA") << ',' << (e.modified ? num(e.bound) : "NA") << ','
                << layer.nonzero_bins << '\n';
        }
    }
}

Measurement measure(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel) {
    Measurement m;
    m.histograms = capture_states(net, points, sel);
    m.report = kl_report(m.histograms);
    for (const auto& h : m.histograms) m.statistics.push_back(state_statistics(h));
    return m;
}

}  // namespace nncalc
