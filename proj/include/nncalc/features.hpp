#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "nncalc/dataset.hpp"

namespace nncalc {

// Canonical order; a selection always lists features in this order.
enum class Feature { X1, X2, X1Squared, X2Squared, X1TimesX2, SinX1, SinX2, SinX1X2, SinRadius, X1PlusX2 };

inline constexpr std::size_t kFeatureCount = 10;

std::string_view to_string(Feature f);
Feature parse_feature(std::string_view name);

// sin features take radians; no input scaling is applied.
double evaluate_feature(Feature f, double x, double y);

class FeatureSelection {
public:
    // Sorts into canonical order; rejects empty or duplicate selections.
    explicit FeatureSelection(std::vector<Feature> features);

    static FeatureSelection parse(std::string_view comma_separated);
    // X1, X2, X1^2, X2^2, X1*X2
    static FeatureSelection default_set();

    std::size_t size() const { return features_.size(); }
    const std::vector<Feature>& features() const { return features_; }
    std::vector<std::string> names() const;

    bool operator==(const FeatureSelection&) const = default;

private:
    std::vector<Feature> features_;
};

std::vector<double> compute_features(const LabeledPoint& p, const FeatureSelection& sel);
std::vector<double> compute_features(double x, double y, const FeatureSelection& sel);

}  // namespace nncalc
