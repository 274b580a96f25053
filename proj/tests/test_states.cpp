#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "nncalc/errors.hpp"
#include "nncalc/states.hpp"
#include "oracles.hpp"

using namespace nncalc;

namespace {

constexpr int P = 1;
constexpr int N = 0;

LayerState st(const char* bits) { return LayerState{bits}; }

// nl = 2 layer with 20 points: class N occupies "11" ten times, class P
// gets the given counts on "00", "01", "10".
StateHistogram two_node(std::vector<std::uint64_t> p_counts) {
    StateHistogram h(0, 2, false);
    const char* states[] = {"00", "01", "10"};
    for (std::size_t i = 0; i < p_counts.size(); ++i) h.add(st(states[i]), P, p_counts[i]);
    h.add(st("11"), N, 10);
    return h;
}

StateHistogram random_histogram(std::mt19937_64& gen, int nodes, int max_states) {
    StateHistogram h(0, nodes, false);
    const unsigned n = 1u << nodes;
    for (int c = 0; c < 2; ++c) {
        const int k = 1 + static_cast<int>(gen() % static_cast<unsigned>(max_states));
        for (int i = 0; i < k; ++i) {
            h.add(st(oracle::bits_of(static_cast<unsigned>(gen() % n), nodes).c_str()), c, 1 + gen() % 9);
        }
    }
    return h;
}

}  // namespace

TEST(States, Binarize) {
    const std::vector<double> a{-0.2, 0.3, 0.0, 1.0};
    EXPECT_EQ(binarize(a, Activation::tanh).bits, "0101");
    const std::vector<double> s{0.49, 0.51};
    EXPECT_EQ(binarize(s, Activation::sigmoid).bits, "01");
}

TEST(States, WorkedExampleNetwork) {
    // Activations (-,+,-,-), (+,+,-), (+,-) for the point (1, 1).
    NetworkConfig c;
    c.input_dim = 2;
    c.hidden_layers = {4, 3, 2};
    Network net = init_network(c, 1);
    for (auto& l : net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    const double first[] = {-1, 1, -1, -1};
    for (int o = 0; o < 4; ++o) net.layers[0].weight(0, o) = first[o];
    const double second[] = {1, 1, -1};
    for (int o = 0; o < 3; ++o) net.layers[1].weight(1, o) = second[o];
    net.layers[2].weight(0, 0) = 1;
    net.layers[2].weight(0, 1) = -1;
    net.layers[3].weight(0, 0) = 1;

    LabeledPoint p;
    p.x = p.y = 1.0;
    p.label = p.original_label = Label::P;
    const auto hs = capture_states(net, std::vector<LabeledPoint>{p}, FeatureSelection::parse("X1,X2"));
    ASSERT_EQ(hs.size(), 4u);
    EXPECT_EQ(hs[0].counts[P].begin()->first.bits, "0100");
    EXPECT_EQ(hs[1].counts[P].begin()->first.bits, "110");
    EXPECT_EQ(hs[2].counts[P].begin()->first.bits, "10");
    EXPECT_TRUE(hs[3].output_layer);
}

TEST(States, ZeroNetworkSinglePoint) {
    NetworkConfig c;
    c.input_dim = 2;
    c.hidden_layers = {3, 2};
    Network net = init_network(c, 1);
    for (auto& l : net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    LabeledPoint p;
    p.label = p.original_label = Label::N;
    const auto hs = capture_states(net, std::vector<LabeledPoint>{p}, FeatureSelection::parse("X1,X2"));
    for (const auto& h : hs) {
        ASSERT_EQ(h.counts[N].size(), 1u);
        EXPECT_EQ(h.counts[N].begin()->first.bits, std::string(static_cast<std::size_t>(h.nodes), '0'));
        EXPECT_EQ(h.counts[N].begin()->second, 1u);
        EXPECT_TRUE(h.counts[P].empty());
    }
}

TEST(States, CountsSumToPointCount) {
    DatasetSpec s;
    s.npts = 500;
    const Dataset d = generate(s);
    const Network net = init_network(NetworkConfig{}, 3);
    for (const auto& h : capture_states(net, d.all_points(), FeatureSelection::default_set())) {
        EXPECT_EQ(h.class_total(N) + h.class_total(P), 500u);
        EXPECT_EQ(h.npts, 500u);
    }
}

TEST(States, ModifiedKlEfficientCase) {
    const auto h = two_node({5, 5});
    EXPECT_NEAR(modified_kl(h, reference_for(h), P), 0.0, 1e-15);
}

TEST(States, ModifiedKlSingleState) {
    const auto h = two_node({10});
    EXPECT_NEAR(modified_kl(h, reference_for(h), P), 1.0, 1e-15);
}

TEST(States, ModifiedKlInsufficientCase) {
    const auto h = two_node({5, 3, 2});
    const double expected = oracle::modified_kl({5, 3, 2}, 4, 2);
    EXPECT_NEAR(expected, -0.48548, 1e-5);
    EXPECT_NEAR(modified_kl(h, reference_for(h), P), expected, 1e-12);
}

TEST(States, ModifiedKlRequiresClassPoints) {
    StateHistogram h(0, 2, false);
    h.add(st("00"), N, 4);
    EXPECT_THROW(modified_kl(h, reference_for(h), P), ValidationError);
}

TEST(States, ExactKlExamples) {
    const auto ref = reference_for(two_node({5, 5}));
    const StateAssignment assign{{st("10"), st("11")}, {st("00"), st("01")}};
    EXPECT_NEAR(exact_kl(two_node({5, 5}), assign, ref, P), 0.0, 1e-15);
    EXPECT_NEAR(exact_kl(two_node({10}), assign, ref, P), 1.0, 1e-15);
    EXPECT_THROW(exact_kl(two_node({5, 3, 2}), assign, ref, P), UndefinedDivergence);
}

TEST(States, ExactKlRejectsBadAssignments) {
    const auto h = two_node({5, 5});
    const auto ref = reference_for(h);
    const StateAssignment overlapping{{st("00"), st("11")}, {st("00"), st("01")}};
    EXPECT_THROW(exact_kl(h, overlapping, ref, P), ValidationError);
    const StateAssignment short_block{{st("10"), st("11")}, {st("00")}};
    EXPECT_THROW(exact_kl(h, short_block, ref, P), ValidationError);
}

TEST(States, GapBound) {
    const auto h = two_node({5, 3, 2});
    EXPECT_NEAR(kl_gap_bound(h, reference_for(h), P), 2.0, 1e-15);
    StateHistogram wide(0, 8, false);
    wide.add(st("00000000"), P, 3);
    wide.add(st("00000001"), N, 3);
    EXPECT_NEAR(kl_gap_bound(wide, reference_for(wide), P), 14.0, 1e-12);
}

TEST(States, ModifiedEqualsExactWhenStatesFitBlock) {
    // Every subset of used states for class P on nl <= 3, every block holding it.
    std::mt19937_64 gen(1);
    for (int nodes = 1; nodes <= 3; ++nodes) {
        const unsigned n = 1u << nodes;
        const unsigned block = n / 2;
        for (unsigned used = 1; used < (1u << n); ++used) {
            if (static_cast<unsigned>(__builtin_popcount(used)) > block) continue;
            StateHistogram h(0, nodes, false);
            std::map<std::string, double> counts;
            for (unsigned s = 0; s < n; ++s) {
                if (used & (1u << s)) {
                    const auto c = 1 + gen() % 7;
                    h.add(st(oracle::bits_of(s, nodes).c_str()), P, c);
                    counts[oracle::bits_of(s, nodes)] = static_cast<double>(c);
                }
            }
            h.add(st(oracle::bits_of(0, nodes).c_str()), N, 1);
            const auto ref = reference_for(h);
            for (const auto& combo : oracle::combinations(n, block)) {
                StateAssignment a(2);
                std::vector<std::string> pblock;
                for (unsigned s = 0; s < n; ++s) {
                    const bool in_p = std::find(combo.begin(), combo.end(), s) != combo.end();
                    a[in_p ? P : N].insert(st(oracle::bits_of(s, nodes).c_str()));
                    if (in_p) pblock.push_back(oracle::bits_of(s, nodes));
                }
                const double d_oracle = oracle::exact_kl(counts, pblock, n, 2);
                if (std::isnan(d_oracle)) {
                    EXPECT_THROW(exact_kl(h, a, ref, P), UndefinedDivergence);
                    continue;
                }
                const double d = exact_kl(h, a, ref, P);
                EXPECT_NEAR(d, d_oracle, 1e-12);
                EXPECT_NEAR(d, modified_kl(h, ref, P), 1e-12);
                EXPECT_LE(d - modified_kl(h, ref, P), kl_gap_bound(h, ref, P) + 1e-12);
            }
        }
    }
}

TEST(States, LowerBoundOnRandomHistograms) {
    std::mt19937_64 gen(2);
    for (int t = 0; t < 2000; ++t) {
        const int nodes = 1 + static_cast<int>(gen() % 6);
        const auto h = random_histogram(gen, nodes, 12);
        const auto ref = reference_for(h);
        for (int c : {N, P}) {
            const double k = static_cast<double>(h.counts[c].size());
            EXPECT_GE(modified_kl(h, ref, c), std::log2(ref.states() / (2.0 * k)) - 1e-12);
        }
    }
}

TEST(States, LowerBoundTightForUniform) {
    StateHistogram h(0, 3, false);
    for (const char* s : {"000", "011", "101"}) h.add(st(s), P, 4);
    h.add(st("111"), N, 1);
    EXPECT_NEAR(modified_kl(h, reference_for(h), P), std::log2(8.0 / (2.0 * 3.0)), 1e-12);
}

TEST(States, PermutationInvariance) {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 200; ++t) {
        const auto h = random_histogram(gen, 4, 10);
        StateHistogram flipped(0, 4, false);
        for (int c : {N, P}) {
            for (const auto& [s, count] : h.counts[c]) {
                std::string b = s.bits;
                std::swap(b[0], b[3]);
                b[1] = b[1] == '0' ? '1' : '0';
                flipped.add(LayerState{b}, c, count);
            }
        }
        for (int c : {N, P}) {
            EXPECT_NEAR(modified_kl(h, reference_for(h), c), modified_kl(flipped, reference_for(flipped), c), 1e-12);
        }
    }
}

TEST(States, CanonicalAssignmentIsValid) {
    std::mt19937_64 gen(4);
    for (int t = 0; t < 200; ++t) {
        const int nodes = 1 + static_cast<int>(gen() % 4);
        const auto h = random_histogram(gen, nodes, 6);
        const auto ref = reference_for(h);
        const auto a = canonical_assignment(h, ref);
        ASSERT_EQ(a.size(), 2u);
        std::set<LayerState> all;
        for (const auto& block : a) {
            EXPECT_EQ(block.size(), ref.block_size());
            all.insert(block.begin(), block.end());
        }
        EXPECT_EQ(all.size(), static_cast<std::size_t>(ref.states()));
    }
}

TEST(States, ClassifyStates) {
    StateHistogram h(0, 3, false);
    h.add(st("001"), P, 3);
    h.add(st("001"), N, 2);
    h.add(st("010"), P, 1);
    h.add(st("100"), N, 1);
    h.add(st("110"), N, 1);
    h.add(st("111"), P, 1);
    const auto cats = classify_states(h);
    EXPECT_EQ(cats.categories.at(st("001")), StateCategory::multiple_classes);
    EXPECT_EQ(cats.categories.at(st("010")), StateCategory::one_class);
    EXPECT_EQ(cats.categories.size(), 5u);
    EXPECT_EQ(cats.unused, 3.0);
}

TEST(States, StatisticsSingleStatePerClass) {
    StateHistogram h(0, 2, false);
    h.add(st("01"), P, 4);
    h.add(st("10"), N, 2);
    const auto s = state_statistics(h);
    EXPECT_EQ(s.classes[P].most_frequent, st("01"));
    EXPECT_EQ(s.classes[P].least_frequent, st("01"));
    EXPECT_EQ(s.classes[P].nonzero_bins, 1u);
}

TEST(States, StatisticsConstantBitsAndTies) {
    StateHistogram h(0, 2, false);
    h.add(st("11"), P, 2);
    h.add(st("10"), P, 2);
    h.add(st("00"), N, 1);
    const auto s = state_statistics(h);
    EXPECT_EQ(s.classes[P].constant_bits, "1x");
    EXPECT_EQ(s.classes[P].most_frequent, st("10"));
    EXPECT_EQ(s.classes[P].least_frequent, st("10"));
}

TEST(States, OverlapMatchesKeyIntersection) {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 100; ++t) {
        const auto h = random_histogram(gen, 3, 6);
        std::vector<LayerState> expected;
        for (const auto& [s, c] : h.counts[N]) {
            if (h.counts[P].count(s)) expected.push_back(s);
        }
        EXPECT_EQ(state_statistics(h).overlapping, expected);
    }
}

TEST(States, MergeAddsCounts) {
    StateHistogram a(0, 2, false), b(0, 2, false);
    a.add(st("01"), P, 2);
    b.add(st("01"), P, 3);
    b.add(st("00"), N, 1);
    a.merge(b);
    EXPECT_EQ(a.counts[P].at(st("01")), 5u);
    EXPECT_EQ(a.npts, 6u);
    StateHistogram wrong(0, 3, false);
    EXPECT_THROW(a.merge(wrong), ValidationError);
}

TEST(States, ReportAndCsv) {
    const auto h = two_node({5, 3, 2});
    const std::vector<StateHistogram> hs{h};
    const KLReport r = kl_report(hs);
    ASSERT_EQ(r.layers.size(), 1u);
    EXPECT_EQ(r.layers[0].nonzero_bins, 4u);
    const auto& e = r.layers[0].classes[P];
    EXPECT_EQ(e.used_states, 3u);
    EXPECT_FALSE(e.sufficient);
    EXPECT_FALSE(e.exact.has_value());
    EXPECT_NEAR(r.modified(0, Label::P), oracle::modified_kl({5, 3, 2}, 4, 2), 1e-12);
    std::ostringstream csv;
    write_analytics_csv(csv, r);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "layer,class,k,n,m,D_hat,D_exact_or_NA,bound,nonzero_bins");
    EXPECT_NE(csv.str().find(",NA,"), std::string::npos);
}
