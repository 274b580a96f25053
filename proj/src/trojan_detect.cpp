#include "nncalc/trojan_detect.hpp"

#include <cmath>
#include <numeric>

#include "nncalc/errors.hpp"
#include "nncalc/parallel.hpp"
#include "nncalc/rng.hpp"

namespace nncalc {

std::vector<double> default_layer_weights(const KLReport& report) {
    std::size_t hidden = 0;
    for (const auto& l : report.layers) hidden += l.output_layer ? 0 : 1;
    std::vector<double> w;
    for (const auto& l : report.layers) {
        if (hidden == 0) {
            w.push_back(1.0 / static_cast<double>(report.layers.size()));
        } else {
            w.push_back(l.output_layer ? 0.0 : 1.0 / static_cast<double>(hidden));
        }
    }
    return w;
}

DeltaReport compute_deltas(const KLReport& without_trojan, const KLReport& with_trojan,
                           std::optional<std::vector<double>> weights) {
    const std::size_t n = without_trojan.layers.size();
    if (n == 0 || with_trojan.layers.size() != n) throw ValidationError("reports", "layer counts differ");
    std::vector<double> w = weights ? std::move(*weights) : default_layer_weights(without_trojan);
    if (w.size() != n) throw ValidationError("weights", "one weight per layer required");
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("weights", "weights must be finite and >= 0");
        total += v;
    }
    if (!(total > 0.0)) throw ValidationError("weights", "weights must not all be zero");

    DeltaReport out;
    for (std::size_t l = 0; l < n; ++l) {
        if (without_trojan.layers[l].nodes != with_trojan.layers[l].nodes) {
            throw ValidationError("reports.layers[" + std::to_string(l) + "]", "architectures differ");
        }
        LayerDelta d;
        d.layer_index = static_cast<int>(l);
        d.delta_p = without_trojan.modified(l, Label::P) - with_trojan.modified(l, Label::P);
        d.delta_n = without_trojan.modified(l, Label::N) - with_trojan.modified(l, Label::N);
        d.weight = w[l] / total;
        out.aggregate_p += d.weight * d.delta_p;
        out.aggregate_n += d.weight * d.delta_n;
        out.layers.push_back(d);
    }
    return out;
}

std::string_view to_string(Quadrant q) {
    switch (q) {
        case Quadrant::FromPtoN: return "FromPtoN";
        case Quadrant::FromNtoP: return "FromNtoP";
        case Quadrant::BothClasses: return "BothClasses";
        case Quadrant::NotDetectable: return "NotDetectable";
    }
    return "NotDetectable";
}

TrojanVerdict classify(const DeltaReport& deltas, double sigma) {
    if (!(sigma >= 0.0)) throw ValidationError("sigma", "must be >= 0");
    const double p = deltas.aggregate_p;
    const double n = deltas.aggregate_n;
    Quadrant q = Quadrant::NotDetectable;
    if (p > sigma && n < -sigma) {
        q = Quadrant::FromPtoN;
    } else if (n > sigma && p < -sigma) {
        q = Quadrant::FromNtoP;
    } else if (p > sigma && n > sigma) {
        q = Quadrant::BothClasses;
    }
    return {q, sigma, deltas};
}

std::string_view to_string(SensitivityMode mode) {
    switch (mode) {
        case SensitivityMode::regen: return "regen";
        case SensitivityMode::retrain: return "retrain";
        case SensitivityMode::untrained: return "untrained";
    }
    return "regen";
}

SensitivityMode parse_sensitivity_mode(std::string_view text) {
    for (auto m : {SensitivityMode::regen, SensitivityMode::retrain, SensitivityMode::untrained}) {
        if (to_string(m) == text) return m;
    }
    throw ValidationError("mode", "unknown sensitivity mode '" + std::string(text) + "'");
}

SensitivityEntry spread_of(std::span<const KLReport> reports) {
    if (reports.size() < 2) throw ValidationError("reps", "need at least 2 repetitions");
    SensitivityEntry out;
    out.repetitions = static_cast<int>(reports.size());
    const std::size_t layers = reports[0].layers.size();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        if (reports[0].layers[l].output_layer) continue;
        std::vector<double> per_class;
        for (Label c : {Label::N, Label::P}) {
            double mean = 0.0;
            for (const auto& r : reports) mean += r.modified(l, c);
            mean /= static_cast<double>(reports.size());
            double var = 0.0;
            for (const auto& r : reports) var += (r.modified(l, c) - mean) * (r.modified(l, c) - mean);
            var /= static_cast<double>(reports.size() - 1);
            per_class.push_back(std::sqrt(var));
            sum += per_class.back();
            ++count;
        }
        out.stddevs.push_back(std::move(per_class));
    }
    out.sigma = count ? sum / static_cast<double>(count) : 0.0;
    return out;
}

SensitivityEntry estimate_sigma(const SensitivitySetup& setup, SensitivityMode mode, int reps) {
    if (reps < 2) throw ValidationError("reps", "need at least 2 repetitions");
    const Dataset data = generate(setup.dataset);
    const auto clean = data.clean_points();
    const auto rep_seed = [&](std::uint64_t base, std::size_t r) { return Rng::derive(base, 1000 + r); };

    std::optional<Network> fixed;
    if (mode == SensitivityMode::regen) {
        fixed = train(init_network(setup.network, setup.net_seed), data, setup.features, setup.training).network;
    }
    const auto reports = omp::run_trials(static_cast<std::size_t>(reps), [&](std::size_t r) {
        switch (mode) {
            case SensitivityMode::regen: {
                const Dataset other = regenerate(data, rep_seed(setup.dataset.seed, r));
                return measure(*fixed, other.clean_points(), setup.features).report;
            }
            case SensitivityMode::retrain: {
                TrainingParams params = setup.training;
                params.seed = rep_seed(setup.training.seed, r);
                const Network net = init_network(setup.network, rep_seed(setup.net_seed, r));
                return measure(train(net, data, setup.features, params).network, clean, setup.features).report;
            }
            case SensitivityMode::untrained:
                break;
        }
        const Network net = init_network(setup.network, rep_seed(setup.net_seed, r));
        return measure(net, clean, setup.features).report;
    });
    SensitivityEntry out = spread_of(reports);
    out.mode = mode;
    return out;
}

SensitivityProfile sensitivity_profile(const SensitivitySetup& setup, int reps) {
    SensitivityProfile p;
    p.repetitions = reps;
    p.sigma_regen = estimate_sigma(setup, SensitivityMode::regen, reps).sigma;
    p.sigma_retrain = estimate_sigma(setup, SensitivityMode::retrain, reps).sigma;
    p.sigma_untrained = estimate_sigma(setup, SensitivityMode::untrained, reps).sigma;
    return p;
}

}  // namespace nncalc
