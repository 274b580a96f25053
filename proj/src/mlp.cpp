#include "nncalc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nncalc/errors.hpp"
#include "nncalc/kernels.hpp"
#include "nncalc/rng.hpp"

namespace nncalc {
namespace {

constexpr double kInitBias = 0.1;
constexpr double kInitRange = 0.5;
constexpr std::uint64_t kBatchOrderStream = 11;

// Per-layer pre-activations and outputs for one sample, reused across samples.
struct Trace {
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> a;
    std::vector<std::vector<double>> delta;

    explicit Trace(const Network& net) {
        for (const Layer& layer : net.layers) {
            z.emplace_back(static_cast<std::size_t>(layer.outputs));
            a.emplace_back(static_cast<std::size_t>(layer.outputs));
            delta.emplace_back(static_cast<std::size_t>(layer.outputs));
        }
    }
};

void forward_into(const Network& net, std::span<const double> input, Trace& trace) {
    std::span<const double> prev = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        auto& z = trace.z[l];
        auto& a = trace.a[l];
        for (int o = 0; o < layer.outputs; ++o) z[static_cast<std::size_t>(o)] = layer.biases[static_cast<std::size_t>(o)];
        for (int i = 0; i < layer.inputs; ++i) {
            const double v = prev[static_cast<std::size_t>(i)];
            const double* row = &layer.weights[static_cast<std::size_t>(i * layer.outputs)];
            for (int o = 0; o < layer.outputs; ++o) z[static_cast<std::size_t>(o)] += v * row[o];
        }
        for (int o = 0; o < layer.outputs; ++o) {
            a[static_cast<std::size_t>(o)] = activate(layer.activation, z[static_cast<std::size_t>(o)]);
        }
        prev = a;
    }
}

void check_input(const Network& net, std::size_t size) {
    if (size != static_cast<std::size_t>(net.config.input_dim)) {
        throw ValidationError("features", "expected " + std::to_string(net.config.input_dim) + " features, got " +
                                              std::to_string(size));
    }
}

// Adds d(loss)/d(params) for one sample, scaled by `scale`, into grad.
void accumulate_gradient(const Network& net, const Sample& sample, Trace& trace, double scale,
                         std::vector<double>& grad) {
    forward_into(net, sample.features, trace);
    const std::size_t last = net.layers.size() - 1;
    {
        const Layer& out = net.layers[last];
        for (int o = 0; o < out.outputs; ++o) {
            const auto uo = static_cast<std::size_t>(o);
            const double err = trace.a[last][uo] - sample.target;
            trace.delta[last][uo] = err * activate_derivative(out.activation, trace.z[last][uo], trace.a[last][uo]);
        }
    }
    for (std::size_t l = last; l-- > 0;) {
        const Layer& next = net.layers[l + 1];
        const Layer& layer = net.layers[l];
        for (int i = 0; i < layer.outputs; ++i) {
            double sum = 0.0;
            for (int o = 0; o < next.outputs; ++o) sum += next.weight(i, o) * trace.delta[l + 1][static_cast<std::size_t>(o)];
            const auto ui = static_cast<std::size_t>(i);
            trace.delta[l][ui] = sum * activate_derivative(layer.activation, trace.z[l][ui], trace.a[l][ui]);
        }
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& layer = net.layers[l];
        std::span<const double> input = l == 0 ? std::span<const double>(sample.features) : std::span<const double>(trace.a[l - 1]);
        const auto& delta = trace.delta[l];
        for (int i = 0; i < layer.inputs; ++i) {
            const double v = input[static_cast<std::size_t>(i)] * scale;
            double* g = &grad[offset + static_cast<std::size_t>(i * layer.outputs)];
            for (int o = 0; o < layer.outputs; ++o) g[o] += v * delta[static_cast<std::size_t>(o)];
        }
        offset += layer.weights.size();
        for (int o = 0; o < layer.outputs; ++o) grad[offset + static_cast<std::size_t>(o)] += scale * delta[static_cast<std::size_t>(o)];
        offset += layer.biases.size();
    }
}

void add_penalty_gradient(const Network& net, std::vector<double>& grad) {
    const auto& cfg = net.config;
    if (cfg.regularization == Regularization::none || cfg.regularization_rate == 0.0) return;
    std::size_t offset = 0;
    for (const Layer& layer : net.layers) {
        for (std::size_t w = 0; w < layer.weights.size(); ++w) {
            const double v = layer.weights[w];
            const double d = cfg.regularization == Regularization::L2 ? v : (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
            grad[offset + w] += cfg.regularization_rate * d;
        }
        offset += layer.weights.size() + layer.biases.size();
    }
}

double penalty(const Network& net) {
    const auto& cfg = net.config;
    if (cfg.regularization == Regularization::none) return 0.0;
    double sum = 0.0;
    for (const Layer& layer : net.layers) {
        for (double w : layer.weights) sum += cfg.regularization == Regularization::L2 ? 0.5 * w * w : std::abs(w);
    }
    return cfg.regularization_rate * sum;
}

Evaluation evaluate_samples(const Network& net, std::span<const Sample> samples, Trace& trace) {
    if (samples.empty()) return {};
    double sq = 0.0;
    std::size_t hits = 0;
    for (const Sample& s : samples) {
        forward_into(net, s.features, trace);
        const double pred = trace.a.back()[0];
        sq += (pred - s.target) * (pred - s.target);
        if ((pred > 0.0) == (s.target > 0.0)) ++hits;
    }
    const auto n = static_cast<double>(samples.size());
    return {sq / n, static_cast<double>(hits) / n};
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::linear: return "linear";
    }
    return "tanh";
}

Activation parse_activation(std::string_view text) {
    for (Activation a : {Activation::tanh, Activation::relu, Activation::sigmoid, Activation::linear}) {
        if (to_string(a) == text) return a;
    }
    throw ValidationError("activation", "unknown activation '" + std::string(text) + "'");
}

std::string_view to_string(Regularization r) {
    switch (r) {
        case Regularization::none: return "none";
        case Regularization::L1: return "L1";
        case Regularization::L2: return "L2";
    }
    return "none";
}

Regularization parse_regularization(std::string_view text) {
    for (Regularization r : {Regularization::none, Regularization::L1, Regularization::L2}) {
        if (to_string(r) == text) return r;
    }
    throw ValidationError("regularization", "unknown regularization '" + std::string(text) + "'");
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::tanh: return std::tanh(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::linear: return z;
    }
    return z;
}

double activate_derivative(Activation a, double z, double out) {
    switch (a) {
        case Activation::tanh: return 1.0 - out * out;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return out * (1.0 - out);
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

double state_threshold(Activation a) { return a == Activation::sigmoid ? 0.5 : 0.0; }

void validate(const NetworkConfig& c) {
    if (c.input_dim < 1 || c.input_dim > static_cast<int>(kFeatureCount)) {
        throw ValidationError("network.input_dim", "must be in [1, 10]");
    }
    if (c.hidden_layers.empty() || c.hidden_layers.size() > static_cast<std::size_t>(kMaxHiddenLayers)) {
        throw ValidationError("network.hidden_layers", "need 1 to 6 hidden layers");
    }
    for (std::size_t i = 0; i < c.hidden_layers.size(); ++i) {
        if (c.hidden_layers[i] < 1 || c.hidden_layers[i] > kMaxNodesPerLayer) {
            throw ValidationError("network.hidden_layers[" + std::to_string(i) + "]", "nodes must be in [1, 8]");
        }
    }
    if (c.output_nodes != 1) throw ValidationError("network.output_nodes", "must be 1");
    if (!(c.regularization_rate >= 0.0) || !std::isfinite(c.regularization_rate)) {
        throw ValidationError("network.regularization_rate", "must be finite and >= 0");
    }
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

std::vector<double> flatten(const Network& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (const Layer& l : net.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
}

void assign_parameters(Network& net, std::span<const double> params) {
    if (params.size() != net.parameter_count()) throw ValidationError("parameters", "size mismatch");
    std::size_t offset = 0;
    for (Layer& l : net.layers) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), l.weights.size(), l.weights.begin());
        offset += l.weights.size();
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), l.biases.size(), l.biases.begin());
        offset += l.biases.size();
    }
}

Network init_network(const NetworkConfig& config, std::uint64_t seed) {
    validate(config);
    Network net;
    net.config = config;
    net.seed = seed;
    Rng rng(seed);
    int inputs = config.input_dim;
    auto add_layer = [&](int outputs, Activation act) {
        Layer layer;
        layer.inputs = inputs;
        layer.outputs = outputs;
        layer.activation = act;
        layer.weights.resize(static_cast<std::size_t>(inputs * outputs));
        for (double& w : layer.weights) w = rng.uniform(-kInitRange, kInitRange);
        layer.biases.assign(static_cast<std::size_t>(outputs), kInitBias);
        net.layers.push_back(std::move(layer));
        inputs = outputs;
    };
    for (int nodes : config.hidden_layers) add_layer(nodes, config.activation);
    add_layer(config.output_nodes, config.output_activation);
    return net;
}

ForwardResult forward_with_activations(const Network& net, std::span<const double> features) {
    check_input(net, features.size());
    Trace trace(net);
    forward_into(net, features, trace);
    ForwardResult out;
    out.prediction = trace.a.back()[0];
    out.activations = std::move(trace.a);
    return out;
}

double predict(const Network& net, std::span<const double> features) {
    check_input(net, features.size());
    Trace trace(net);
    forward_into(net, features, trace);
    return trace.a.back()[0];
}

Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel) {
    return omp::evaluate(net, points, sel);
}

std::vector<Sample> make_samples(std::span<const LabeledPoint> points, const FeatureSelection& sel) {
    std::vector<Sample> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({compute_features(p, sel), target_of(p.label)});
    return out;
}

double batch_loss(const Network& net, std::span<const Sample> batch) {
    if (batch.empty()) throw ValidationError("batch", "empty batch");
    Trace trace(net);
    double sum = 0.0;
    for (const Sample& s : batch) {
        check_input(net, s.features.size());
        forward_into(net, s.features, trace);
        const double err = trace.a.back()[0] - s.target;
        sum += 0.5 * err * err;
    }
    return sum / static_cast<double>(batch.size()) + penalty(net);
}

std::vector<double> loss_gradient(const Network& net, std::span<const Sample> batch) {
    if (batch.empty()) throw ValidationError("batch", "empty batch");
    Trace trace(net);
    std::vector<double> grad(net.parameter_count(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const Sample& s : batch) {
        check_input(net, s.features.size());
        accumulate_gradient(net, s, trace, scale, grad);
    }
    add_penalty_gradient(net, grad);
    return grad;
}

TrainingResult train(Network net, const Dataset& data, const FeatureSelection& sel, const TrainingParams& params,
                     const EpochCallback& on_epoch) {
    if (data.train.empty()) throw ValidationError("dataset.train", "training split is empty");
    if (!(params.learning_rate > 0.0) || !std::isfinite(params.learning_rate)) {
        throw ValidationError("training.learning_rate", "must be positive");
    }
    if (params.batch_size < 1 || static_cast<std::size_t>(params.batch_size) > data.train.size()) {
        throw ValidationError("training.batch_size", "must be in [1, |train|]");
    }
    if (params.epochs < 0) throw ValidationError("training.epochs", "must be >= 0");
    check_input(net, sel.size());

    const std::vector<Sample> train_set = make_samples(data.train, sel);
    const std::vector<Sample> test_set = make_samples(data.test, sel);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Rng rng(Rng::derive(params.seed, kBatchOrderStream));
    Trace trace(net);
    std::vector<double> params_flat = flatten(net);
    std::vector<double> grad(params_flat.size());
    TrainingMetrics metrics;

    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(params.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(params.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t b = start; b < end; ++b) accumulate_gradient(net, train_set[order[b]], trace, scale, grad);
            add_penalty_gradient(net, grad);
            for (std::size_t p = 0; p < params_flat.size(); ++p) params_flat[p] -= params.learning_rate * grad[p];
            assign_parameters(net, params_flat);
        }
        const Evaluation tr = evaluate_samples(net, train_set, trace);
        const Evaluation te = evaluate_samples(net, test_set, trace);
        if (!std::isfinite(tr.mse) || !std::all_of(params_flat.begin(), params_flat.end(), [](double v) { return std::isfinite(v); })) {
            throw TrainingError(epoch, "loss diverged to a non-finite value");
        }
        EpochMetrics m{epoch, tr.mse, te.mse, tr.accuracy, te.accuracy};
        metrics.epochs.push_back(m);
        if (on_epoch && !on_epoch(m)) break;
    }
    return {std::move(net), std::move(metrics)};
}

Network average_networks(std::span<const Network> nets) {
    if (nets.empty()) throw ValidationError("networks", "nothing to average");
    std::vector<double> sum = flatten(nets[0]);
    for (std::size_t i = 1; i < nets.size(); ++i) {
        if (nets[i].config != nets[0].config) {
            throw ValidationError("networks[" + std::to_string(i) + "].config", "architecture mismatch");
        }
        const std::vector<double> p = flatten(nets[i]);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += p[k];
    }
    const auto n = static_cast<double>(nets.size());
    for (double& v : sum) v /= n;
    Network out = nets[0];
    assign_parameters(out, sum);
    return out;
}

Network combine(const Network& a, const Network& b, double scale) {
    if (a.config != b.config) throw ValidationError("network.config", "architecture mismatch");
    std::vector<double> pa = flatten(a);
    const std::vector<double> pb = flatten(b);
    for (std::size_t k = 0; k < pa.size(); ++k) pa[k] += scale * pb[k];
    Network out = a;
    assign_parameters(out, pa);
    return out;
}

}  // namespace nncalc
