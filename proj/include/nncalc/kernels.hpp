#pragma once

// Data-parallel loops over points. The serial versions are the reference
// implementations; the OpenMP versions must return identical results.

#include <span>
#include <vector>

#include "nncalc/mlp.hpp"
#include "nncalc/states.hpp"

namespace nncalc {

namespace serial {

Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel);
std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel);
std::vector<double> predict_grid(const Network& net, const FeatureSelection& sel, int resolution);

}  // namespace serial

namespace omp {

// Per-point errors are computed in parallel and summed in point order, so the
// result is bit-identical to serial::evaluate.
Evaluation evaluate(const Network& net, std::span<const LabeledPoint> points, const FeatureSelection& sel);
// Thread-local histograms merged at the end; integer counts make the merge exact.
std::vector<StateHistogram> capture_states(const Network& net, std::span<const LabeledPoint> points,
                                           const FeatureSelection& sel);
std::vector<double> predict_grid(const Network& net, const FeatureSelection& sel, int resolution);

int max_threads();

}  // namespace omp

}  // namespace nncalc
