#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nncalc/dataset.hpp"
#include "nncalc/errors.hpp"
#include "nncalc/features.hpp"
#include "nncalc/mlp.hpp"
#include "oracles.hpp"

using namespace nncalc;

namespace {

NetworkConfig small_config(int input_dim, std::vector<int> hidden, Activation a = Activation::tanh) {
    NetworkConfig c;
    c.input_dim = input_dim;
    c.hidden_layers = std::move(hidden);
    c.activation = a;
    return c;
}

std::vector<LabeledPoint> random_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-6.0, 6.0);
    std::vector<LabeledPoint> out;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledPoint p;
        p.x = u(gen);
        p.y = u(gen);
        p.label = p.original_label = (gen() & 1) ? Label::P : Label::N;
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(Mlp, InitIsDeterministic) {
    const auto c = small_config(5, {8, 8});
    EXPECT_EQ(init_network(c, 3), init_network(c, 3));
    EXPECT_NE(flatten(init_network(c, 3)), flatten(init_network(c, 4)));
}

TEST(Mlp, InitShapesAndRanges) {
    const Network net = init_network(small_config(2, {3}), 1);
    ASSERT_EQ(net.layers.size(), 2u);
    EXPECT_EQ(net.layers[0].weights.size(), 6u);
    EXPECT_EQ(net.layers[0].biases.size(), 3u);
    EXPECT_EQ(net.layers[1].weights.size(), 3u);
    EXPECT_EQ(net.layers[1].biases.size(), 1u);
    EXPECT_EQ(net.parameter_count(), 13u);
    for (const auto& l : net.layers) {
        for (double w : l.weights) {
            EXPECT_GE(w, -0.5);
            EXPECT_LT(w, 0.5);
        }
        for (double b : l.biases) EXPECT_EQ(b, 0.1);
    }
}

TEST(Mlp, ConfigValidation) {
    EXPECT_THROW(validate(small_config(5, {})), ValidationError);
    EXPECT_THROW(validate(small_config(5, {8, 8, 8, 8, 8, 8, 8})), ValidationError);
    EXPECT_THROW(validate(small_config(5, {9})), ValidationError);
    EXPECT_THROW(validate(small_config(0, {2})), ValidationError);
    auto c = small_config(5, {2});
    c.output_nodes = 2;
    EXPECT_THROW(validate(c), ValidationError);
    c = small_config(5, {2});
    c.regularization_rate = -1.0;
    EXPECT_THROW(validate(c), ValidationError);
}

TEST(Mlp, ZeroNetworkGivesZero) {
    Network net = init_network(small_config(2, {3, 2}), 1);
    for (auto& l : net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    const std::vector<double> x{1.5, -2.0};
    const ForwardResult r = forward_with_activations(net, x);
    EXPECT_EQ(r.prediction, 0.0);
    ASSERT_EQ(r.activations.size(), 3u);
    for (const auto& a : r.activations) {
        for (double v : a) EXPECT_EQ(v, 0.0);
    }
}

TEST(Mlp, IdentityLinearLayer) {
    NetworkConfig c = small_config(1, {1}, Activation::linear);
    c.output_activation = Activation::linear;
    Network net = init_network(c, 1);
    for (auto& l : net.layers) {
        l.weights = {1.0};
        l.biases = {0.0};
    }
    const std::vector<double> x{2.5};
    const ForwardResult r = forward_with_activations(net, x);
    EXPECT_EQ(r.activations[0][0], 2.5);
    EXPECT_EQ(r.prediction, 2.5);
}

TEST(Mlp, ForwardMatchesReference) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (Activation a : {Activation::tanh, Activation::relu, Activation::sigmoid, Activation::linear}) {
        const Network net = init_network(small_config(4, {5, 3, 7}, a), gen());
        for (int t = 0; t < 20; ++t) {
            const std::vector<double> x{u(gen), u(gen), u(gen), u(gen)};
            const auto ref = oracle::forward(net, x);
            const auto got = forward_with_activations(net, x);
            ASSERT_EQ(got.activations.size(), ref.a.size());
            for (std::size_t l = 0; l < ref.a.size(); ++l) {
                for (std::size_t o = 0; o < ref.a[l].size(); ++o) {
                    EXPECT_NEAR(got.activations[l][o], ref.a[l][o], 1e-12);
                }
            }
            EXPECT_NEAR(got.prediction, ref.a.back()[0], 1e-12);
        }
    }
}

TEST(Mlp, ForwardRejectsWrongDimension) {
    const Network net = init_network(small_config(3, {2}), 1);
    const std::vector<double> x{1.0, 2.0};
    EXPECT_THROW(forward_with_activations(net, x), ValidationError);
}

TEST(Mlp, EvaluateMatchesBruteForce) {
    const auto sel = FeatureSelection::default_set();
    const Network net = init_network(small_config(5, {6, 4}), 8);
    const auto pts = random_points(257, 3);
    double se = 0.0;
    int correct = 0;
    for (const auto& p : pts) {
        const double pred = oracle::forward(net, compute_features(p, sel)).a.back()[0];
        const double t = p.label == Label::P ? 1.0 : -1.0;
        se += (pred - t) * (pred - t);
        correct += ((pred > 0.0 ? 1.0 : -1.0) == t) ? 1 : 0;
    }
    const Evaluation e = evaluate(net, pts, sel);
    EXPECT_NEAR(e.mse, se / pts.size(), 1e-12);
    EXPECT_DOUBLE_EQ(e.accuracy, static_cast<double>(correct) / pts.size());
}

TEST(Mlp, EvaluateConstantZeroPredictor) {
    NetworkConfig c = small_config(2, {2});
    Network net = init_network(c, 1);
    for (auto& l : net.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    std::vector<LabeledPoint> pts(4);
    pts[0].label = pts[1].label = Label::P;
    const Evaluation e = evaluate(net, pts, FeatureSelection::parse("X1,X2"));
    EXPECT_DOUBLE_EQ(e.mse, 1.0);
    EXPECT_DOUBLE_EQ(e.accuracy, 0.5);
}

TEST(Mlp, EvaluatePerfectPredictor) {
    // Output = tanh(big * x), labels follow the sign of x.
    NetworkConfig c = small_config(1, {1}, Activation::linear);
    c.output_activation = Activation::linear;
    Network net = init_network(c, 1);
    net.layers[0].weights = {1.0};
    net.layers[0].biases = {0.0};
    net.layers[1].weights = {1.0};
    net.layers[1].biases = {0.0};
    std::vector<LabeledPoint> pts(4);
    const double xs[] = {1.0, -1.0, 1.0, -1.0};
    for (int i = 0; i < 4; ++i) {
        pts[i].x = xs[i];
        pts[i].label = xs[i] > 0 ? Label::P : Label::N;
    }
    const Evaluation e = evaluate(net, pts, FeatureSelection::parse("X1"));
    EXPECT_EQ(e.mse, 0.0);
    EXPECT_EQ(e.accuracy, 1.0);
    EXPECT_THROW(evaluate(net, std::vector<LabeledPoint>{}, FeatureSelection::parse("X1")), ValidationError);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
    std::mt19937_64 gen(21);
    for (Activation a : {Activation::tanh, Activation::relu, Activation::sigmoid, Activation::linear}) {
        for (Regularization reg : {Regularization::none, Regularization::L2}) {
            NetworkConfig c = small_config(3, {4, 3}, a);
            c.regularization = reg;
            c.regularization_rate = 0.01;
            Network net = init_network(c, gen());
            const auto samples = make_samples(random_points(6, gen()), FeatureSelection::parse("X1,X2,X1*X2"));
            const auto grad = loss_gradient(net, samples);
            auto params = flatten(net);
            for (std::size_t i = 0; i < params.size(); ++i) {
                const double orig = params[i];
                params[i] = orig + 1e-5;
                assign_parameters(net, params);
                const double up = batch_loss(net, samples);
                params[i] = orig - 1e-5;
                assign_parameters(net, params);
                const double down = batch_loss(net, samples);
                params[i] = orig;
                assign_parameters(net, params);
                const double numeric = (up - down) / 2e-5;
                EXPECT_NEAR(grad[i], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << to_string(a) << " param " << i;
            }
        }
    }
}

TEST(Mlp, TrainZeroEpochsIsNoOp) {
    DatasetSpec s;
    s.npts = 40;
    const Dataset d = generate(s);
    const Network net = init_network(NetworkConfig{}, 2);
    TrainingParams p;
    p.epochs = 0;
    const TrainingResult r = train(net, d, FeatureSelection::default_set(), p);
    EXPECT_EQ(r.network, net);
    EXPECT_TRUE(r.metrics.epochs.empty());
}

TEST(Mlp, TrainsLinearlySeparableSet) {
    // A single linear hidden node is the perceptron-style analog of no hidden layer.
    Dataset d;
    d.spec.npts = 10;
    for (int i = 0; i < 10; ++i) {
        LabeledPoint p;
        p.x = i < 5 ? -1.0 - i * 0.5 : 1.0 + (i - 5) * 0.5;
        p.y = (i % 3) - 1.0;
        p.label = p.original_label = i < 5 ? Label::N : Label::P;
        d.train.push_back(p);
    }
    d.test = d.train;
    NetworkConfig c = small_config(2, {1}, Activation::linear);
    TrainingParams params;
    params.learning_rate = 0.3;
    params.batch_size = 1;
    params.epochs = 200;
    const auto r = train(init_network(c, 1), d, FeatureSelection::parse("X1,X2"), params);
    EXPECT_EQ(r.metrics.epochs.back().train_accuracy, 1.0);
}

TEST(Mlp, TrainingIsDeterministicAndReportsEveryEpoch) {
    DatasetSpec s;
    s.npts = 100;
    s.seed = 3;
    const Dataset d = generate(s);
    TrainingParams p;
    p.epochs = 15;
    p.seed = 9;
    const NetworkConfig c = small_config(5, {4, 4});
    const auto a = train(init_network(c, 1), d, FeatureSelection::default_set(), p);
    const auto b = train(init_network(c, 1), d, FeatureSelection::default_set(), p);
    EXPECT_EQ(a.network, b.network);
    ASSERT_EQ(a.metrics.epochs.size(), 15u);
    for (const auto& m : a.metrics.epochs) {
        EXPECT_GE(m.train_mse, 0.0);
        EXPECT_GE(m.train_accuracy, 0.0);
        EXPECT_LE(m.train_accuracy, 1.0);
    }
}

TEST(Mlp, CallbackCanStopTraining) {
    DatasetSpec s;
    s.npts = 60;
    const Dataset d = generate(s);
    TrainingParams p;
    p.epochs = 50;
    const auto r = train(init_network(small_config(5, {3}), 1), d, FeatureSelection::default_set(), p,
                         [](const EpochMetrics& m) { return m.epoch < 4; });
    EXPECT_EQ(r.metrics.epochs.size(), 4u);
}

TEST(Mlp, DivergenceRaisesTrainingError) {
    DatasetSpec s;
    s.npts = 60;
    const Dataset d = generate(s);
    NetworkConfig c = small_config(5, {8, 8}, Activation::linear);
    c.output_activation = Activation::linear;
    TrainingParams p;
    p.learning_rate = 1e6;
    p.epochs = 50;
    try {
        train(init_network(c, 1), d, FeatureSelection::default_set(), p);
        FAIL();
    } catch (const TrainingError& e) {
        EXPECT_GE(e.epoch(), 1);
    }
}

TEST(Mlp, TrainingParamValidation) {
    DatasetSpec s;
    s.npts = 20;
    const Dataset d = generate(s);
    const Network net = init_network(small_config(5, {2}), 1);
    TrainingParams p;
    p.batch_size = 11;
    EXPECT_THROW(train(net, d, FeatureSelection::default_set(), p), ValidationError);
    p.batch_size = 5;
    p.learning_rate = 0.0;
    EXPECT_THROW(train(net, d, FeatureSelection::default_set(), p), ValidationError);
}

TEST(Mlp, L2ShrinksWeights) {
    DatasetSpec s;
    s.npts = 200;
    const Dataset d = generate(s);
    TrainingParams p;
    p.epochs = 40;
    double previous = INFINITY;
    for (double rate : {0.0, 0.01, 0.1}) {
        NetworkConfig c = small_config(5, {6, 6});
        c.regularization = Regularization::L2;
        c.regularization_rate = rate;
        const auto r = train(init_network(c, 4), d, FeatureSelection::default_set(), p);
        double norm = 0.0;
        for (const auto& l : r.network.layers) {
            for (double w : l.weights) norm += w * w;
        }
        EXPECT_LT(norm, previous);
        previous = norm;
    }
}

TEST(Mlp, AveragingSingleAndSymmetric) {
    const Network a = init_network(small_config(5, {4}), 1);
    EXPECT_EQ(average_networks(std::vector<Network>{a}), a);
    Network neg = a;
    for (auto& l : neg.layers) {
        for (auto& w : l.weights) w = -w;
        for (auto& b : l.biases) b = -b;
    }
    for (double v : flatten(average_networks(std::vector<Network>{a, neg}))) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, AveragingIsElementwiseMean) {
    const auto c = small_config(5, {4, 3});
    const std::vector<Network> nets{init_network(c, 1), init_network(c, 2), init_network(c, 3)};
    const auto avg = flatten(average_networks(nets));
    const auto p0 = flatten(nets[0]), p1 = flatten(nets[1]), p2 = flatten(nets[2]);
    for (std::size_t i = 0; i < avg.size(); ++i) EXPECT_NEAR(avg[i], (p0[i] + p1[i] + p2[i]) / 3.0, 1e-12);
    const std::vector<Network> mixed{init_network(c, 1), init_network(small_config(5, {4}), 1)};
    EXPECT_THROW(average_networks(mixed), ValidationError);
}
