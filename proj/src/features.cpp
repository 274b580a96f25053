#include "nncalc/features.hpp"

#include <algorithm>
#include <cmath>

#include "nncalc/errors.hpp"

namespace nncalc {
namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames{
    "X1", "X2", "X1^2", "X2^2", "X1*X2", "sin(X1)", "sin(X2)", "sin(X1*X2)", "sin(X1^2+X2^2)", "X1+X2"};

}  // namespace

std::string_view to_string(Feature f) { return kNames[static_cast<std::size_t>(f)]; }

Feature parse_feature(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return static_cast<Feature>(i);
    }
    throw ValidationError("features", "unknown feature '" + std::string(name) + "'");
}

double evaluate_feature(Feature f, double x, double y) {
    switch (f) {
        case Feature::X1: return x;
        case Feature::X2: return y;
        case Feature::X1Squared: return x * x;
        case Feature::X2Squared: return y * y;
        case Feature::X1TimesX2: return x * y;
        case Feature::SinX1: return std::sin(x);
        case Feature::SinX2: return std::sin(y);
        case Feature::SinX1X2: return std::sin(x * y);
        case Feature::SinRadius: return std::sin(x * x + y * y);
        case Feature::X1PlusX2: return x + y;
    }
    return 0.0;
}

FeatureSelection::FeatureSelection(std::vector<Feature> features) : features_(std::move(features)) {
    if (features_.empty()) throw ValidationError("features", "selection is empty");
    std::sort(features_.begin(), features_.end());
    if (std::adjacent_find(features_.begin(), features_.end()) != features_.end()) {
        throw ValidationError("features", "duplicate feature");
    }
}

FeatureSelection FeatureSelection::parse(std::string_view text) {
    std::vector<Feature> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(',', start), text.size());
        out.push_back(parse_feature(text.substr(start, end - start)));
        start = end + 1;
    }
    return FeatureSelection(std::move(out));
}

FeatureSelection FeatureSelection::default_set() {
    return FeatureSelection({Feature::X1, Feature::X2, Feature::X1Squared, Feature::X2Squared, Feature::X1TimesX2});
}

std::vector<std::string> FeatureSelection::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (Feature f : features_) out.emplace_back(to_string(f));
    return out;
}

std::vector<double> compute_features(double x, double y, const FeatureSelection& sel) {
    std::vector<double> out;
    out.reserve(sel.size());
    for (Feature f : sel.features()) out.push_back(evaluate_feature(f, x, y));
    return out;
}

std::vector<double> compute_features(const LabeledPoint& p, const FeatureSelection& sel) {
    return compute_features(p.x, p.y, sel);
}

}  // namespace nncalc
