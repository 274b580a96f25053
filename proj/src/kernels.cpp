#include "nncalc/kernels.hpp"

#include "nncalc/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nncalc {
namespace {

std::vector<StateHistogram> empty_histograms(const Network& net) {
    std::vector<StateHistogram> out;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        out.emplace_back(static_cast<int>(l), net.layers[l].outputs, l + 1 == net.layers.size());
    }
    return out;
}

void record_point(const Network& net, const LabeledPoint& p, const FeatureSelection& sel,
                  std::vector<StateHistogram>& hists) {
    const std::vector<double> features = compute_features(p, sel);
    const ForwardResult fwd = forward_with_activations(net, features);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        hists[l].add(binarize(fwd.activations[l], net.layers[l].activation), class_index(p.label));
    }
}

void check_points(std::span<const LabeledPoint> points) {
    if (points.empty()) throw ValidationError("points", "no points to measure");
}

struct PointError {
    double squared = 0.0;
    bool hit = false;
};

PointError point_error(const Network& net, const LabeledPoint& p, const FeatureSelection& sel) {
    const double pred = predict(net, compute_features(p, sel));
    const double t = target_of(p.label);
    return {(pred - t) * (pred - t), predicted_label(pred) == p.label};
}

Evaluation reduce(std::span<const PointError> errors) {
    double sq = 0.0;
    std::size_t hits = 0;
    for (const PointError& e : errors) {
        sq += e.squared;
        hits += e.hit ? 1 : 0;
    }
    const auto n = static_cast<double>(errors.size());
    return {sq / n, static_cast<double>(hits) / n};
}

double grid_coord(int i, int resolution) {
    return -kDomainHalfWidth + 2.0 * kDomainHalfWidth * (i + 0.5) / resolution;
}

void check_resolution(int resolution) {
    if (resolution < 1 || resolution > 1000) throw ValidationError("resolution", "must be in [1, 1000]");
}

}  // namespace

namespace serial {

Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel) {
    check_points(points);
    std::vector<PointError> errors;
    errors.reserve(points.size());
    for (const auto& p : points) errors.push_back(point_error(net, p, sel));
    return reduce(errors);
}

std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel) {
    check_points(points);
    std::vector<StateHistogram> hists = empty_histograms(net);
    for (const auto& p : points) record_point(net, p, sel, hists);
    return hists;
}

std::vector<double> predict_grid(const Network& net, const FeatureSelection& sel, int resolution) {
    check_resolution(resolution);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(resolution * resolution));
    for (int r = 0; r < resolution; ++r) {
        for (int c = 0; c < resolution; ++c) {
            out.push_back(predict(net, compute_features(grid_coord(c, resolution), grid_coord(r, resolution), sel)));
        }
    }
    return out;
}

}  // namespace serial

namespace omp {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel) {
    check_points(points);
    std::vector<PointError> errors(points.size());
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        errors[static_cast<std::size_t>(i)] = point_error(net, points[static_cast<std::size_t>(i)], sel);
    }
    return reduce(errors);
}

std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel) {
    check_points(points);
    const int threads = max_threads();
    std::vector<std::vector<StateHistogram>> local(static_cast<std::size_t>(threads), empty_histograms(net));
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel num_threads(threads)
    {
#ifdef _OPENMP
        auto& mine = local[static_cast<std::size_t>(omp_get_thread_num())];
#else
        auto& mine = local[0];
#endif
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) record_point(net, points[static_cast<std::size_t>(i)], sel, mine);
    }
    std::vector<StateHistogram> out = std::move(local[0]);
    for (std::size_t t = 1; t < local.size(); ++t) {
        for (std::size_t l = 0; l < out.size(); ++l) out[l].merge(local[t][l]);
    }
    return out;
}

std::vector<double> predict_grid(const Network& net, const FeatureSelection& sel, int resolution) {
    check_resolution(resolution);
    std::vector<double> out(static_cast<std::size_t>(resolution * resolution));
#pragma omp parallel for schedule(static)
    for (int r = 0; r < resolution; ++r) {
        for (int c = 0; c < resolution; ++c) {
            out[static_cast<std::size_t>(r * resolution + c)] =
                predict(net, compute_features(grid_coord(c, resolution), grid_coord(r, resolution), sel));
        }
    }
    return out;
}

}  // namespace omp

}  // namespace nncalc
