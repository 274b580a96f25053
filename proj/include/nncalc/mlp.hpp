#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "nncalc/dataset.hpp"
#include "nncalc/features.hpp"

namespace nncalc {

enum class Activation { tanh, relu, sigmoid, linear };
enum class Regularization { none, L1, L2 };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);
std::string_view to_string(Regularization r);
Regularization parse_regularization(std::string_view text);

double activate(Activation a, double z);
// Derivative expressed through both the pre-activation and the output.
double activate_derivative(Activation a, double z, double out);
// Output above this value binarizes to 1.
double state_threshold(Activation a);

inline constexpr int kMaxHiddenLayers = 6;
inline constexpr int kMaxNodesPerLayer = 8;

struct NetworkConfig {
    int input_dim = 5;
    std::vector<int> hidden_layers{8, 8, 8, 8, 8, 8};
    Activation activation = Activation::tanh;
    // Applied to the single output node; tanh matches the +-1 target encoding.
    Activation output_activation = Activation::tanh;
    int output_nodes = 1;
    Regularization regularization = Regularization::none;
    double regularization_rate = 0.0;

    bool operator==(const NetworkConfig&) const = default;
};

void validate(const NetworkConfig& config);

// Fully connected layer; weights are inputs x outputs, row-major, so
// weight(i, o) connects input i to node o.
struct Layer {
    int inputs = 0;
    int outputs = 0;
    Activation activation = Activation::tanh;
    std::vector<double> weights;
    std::vector<double> biases;

    double& weight(int i, int o) { return weights[static_cast<std::size_t>(i * outputs + o)]; }
    double weight(int i, int o) const { return weights[static_cast<std::size_t>(i * outputs + o)]; }

    bool operator==(const Layer&) const = default;
};

struct Network {
    NetworkConfig config;
    std::vector<Layer> layers;  // hidden layers then the output layer
    std::uint64_t seed = 0;

    std::size_t parameter_count() const;
    bool operator==(const Network&) const = default;
};

// Flat parameter view: per layer, weights then biases.
std::vector<double> flatten(const Network& net);
void assign_parameters(Network& net, std::span<const double> params);

struct TrainingParams {
    double learning_rate = 0.03;
    int batch_size = 10;
    int epochs = 300;
    std::uint64_t seed = 0;

    bool operator==(const TrainingParams&) const = default;
};

struct EpochMetrics {
    int epoch = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct TrainingMetrics {
    std::vector<EpochMetrics> epochs;
};

struct ForwardResult {
    double prediction = 0.0;
    std::vector<std::vector<double>> activations;  // one vector per layer, output included
};

// Uniform(-0.5, 0.5) weights, 0.1 biases.
Network init_network(const NetworkConfig& config, std::uint64_t seed);

ForwardResult forward_with_activations(const Network& net, std::span<const double> features);
double predict(const Network& net, std::span<const double> features);
inline Label predicted_label(double prediction) { return prediction > 0.0 ? Label::P : Label::N; }

struct Evaluation {
    double mse = 0.0;
    double accuracy = 0.0;
};

// Mean squared error against +-1 targets and sign-readout accuracy.
Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel);

struct Sample {
    std::vector<double> features;
    double target = 0.0;
};

std::vector<Sample> make_samples(std::span<const LabeledPoint> points, const FeatureSelection& sel);

// Batch loss: mean of 0.5*(prediction - target)^2 plus the weight penalty
// (L2: 0.5*rate*sum w^2, L1: rate*sum |w|; biases are not penalized).
double batch_loss(const Network& net, std::span<const Sample> batch);
// Gradient of batch_loss, in flatten() order.
std::vector<double> loss_gradient(const Network& net, std::span<const Sample> batch);

// Return false to stop training after the reported epoch.
using EpochCallback = std::function<bool(const EpochMetrics&)>;

struct TrainingResult {
    Network network;
    TrainingMetrics metrics;
};

// Minibatch SGD over the train split, reshuffled every epoch. Throws
// TrainingError when the loss stops being finite.
TrainingResult train(Network net, const Dataset& data, const FeatureSelection& sel, const TrainingParams& params,
                     const EpochCallback& on_epoch = {});

Network average_networks(std::span<const Network> nets);

// Elementwise a + scale * b; configs must match.
Network combine(const Network& a, const Network& b, double scale);

}  // namespace nncalc
