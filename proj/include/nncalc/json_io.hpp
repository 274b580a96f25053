#pragma once

#include <json.hpp>
#include <string>

#include "nncalc/dataset.hpp"
#include "nncalc/memory_bank.hpp"
#include "nncalc/mlp.hpp"
#include "nncalc/states.hpp"
#include "nncalc/trojan_detect.hpp"

// JSON mapping for every persisted or wire-level type. Doubles are written
// with round-trip precision, so parse(dump(x)) == x bit for bit.
namespace nncalc {

using json = nlohmann::json;

json to_json(const TrojanSpec& t);
json to_json(const DatasetSpec& s);
json to_json(const LabeledPoint& p);
json to_json(const Dataset& d);
json to_json(const NetworkConfig& c);
json to_json(const Network& n);
json to_json(const TrainingParams& p);
json to_json(const EpochMetrics& m);
json to_json(const StateHistogram& h);
json to_json(const StateStatistics& s);
json to_json(const KLReport& r);
json to_json(const DeltaReport& d);
// {quadrant, sigma, per_layer: [{layer, delta_P, delta_N}], aggregate: {delta_P, delta_N}}
json to_json(const TrojanVerdict& v);
json to_json(const SensitivityEntry& e);
json to_json(const SensitivityProfile& p);
json to_json(const CalculatorSession& s);

// Parsers throw ValidationError naming the offending field path. Missing
// optional fields take the struct defaults.
TrojanSpec trojan_from_json(const json& j, const std::string& path = "trojan");
DatasetSpec dataset_spec_from_json(const json& j, const std::string& path = "dataset");
Dataset dataset_from_json(const json& j, const std::string& path = "dataset");
NetworkConfig network_config_from_json(const json& j, const std::string& path = "network");
Network network_from_json(const json& j, const std::string& path = "model");
TrainingParams training_params_from_json(const json& j, const std::string& path = "training");
FeatureSelection features_from_json(const json& j, const std::string& path = "features");
CalculatorSession session_from_json(const json& j, const std::string& path = "session");

}  // namespace nncalc
