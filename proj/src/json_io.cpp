#include "nncalc/json_io.hpp"

#include "nncalc/errors.hpp"

namespace nncalc {
namespace {

template <typename T>
T field(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.is_object()) throw ValidationError(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(path + "." + key, "wrong type");
    }
}

const json& required(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) throw ValidationError(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ValidationError(path + "." + key, "missing");
    return *it;
}

template <typename T, typename Parse>
T parsed(const json& j, const std::string& key, const std::string& path, T fallback, Parse parse) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) throw ValidationError(path + "." + key, "expected a string");
    try {
        return parse(v.get<std::string>());
    } catch (const ValidationError& e) {
        throw ValidationError(path + "." + key, e.what());
    }
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json layer_json(const Layer& l) {
    json w = json::array();
    for (int i = 0; i < l.inputs; ++i) {
        json row = json::array();
        for (int o = 0; o < l.outputs; ++o) row.push_back(l.weight(i, o));
        w.push_back(std::move(row));
    }
    return w;
}

}  // namespace

json to_json(const TrojanSpec& t) {
    json regions = json::array();
    for (const auto& r : t.regions) {
        regions.push_back({{"shape", r.shape == RegionShape::disk ? "disk" : "square"},
                           {"center", {r.cx, r.cy}},
                           {"size", r.size},
                           {"source_class", to_string(r.source)},
                           {"target_class", to_string(r.target)}});
    }
    return {{"id", to_string(t.id)}, {"regions", regions}};
}

json to_json(const DatasetSpec& s) {
    return {{"pattern", to_string(s.pattern)},
            {"npts", s.npts},
            {"noise", s.noise},
            {"trojan", s.trojan ? to_json(*s.trojan) : json(nullptr)},
            {"seed", s.seed},
            {"train_ratio", s.train_ratio}};
}

json to_json(const LabeledPoint& p) {
    return {{"x", p.x},
            {"y", p.y},
            {"label", to_string(p.label)},
            {"original_label", to_string(p.original_label)},
            {"trojaned", p.trojaned}};
}

json to_json(const Dataset& d) {
    json train = json::array();
    json test = json::array();
    for (const auto& p : d.train) train.push_back(to_json(p));
    for (const auto& p : d.test) test.push_back(to_json(p));
    return {{"spec", to_json(d.spec)}, {"train", train}, {"test", test}};
}

json to_json(const NetworkConfig& c) {
    return {{"input_dim", c.input_dim},
            {"hidden_layers", c.hidden_layers},
            {"activation", to_string(c.activation)},
            {"output_activation", to_string(c.output_activation)},
            {"output_nodes", c.output_nodes},
            {"regularization", to_string(c.regularization)},
            {"regularization_rate", c.regularization_rate}};
}

json to_json(const Network& n) {
    json weights = json::array();
    json biases = json::array();
    for (const Layer& l : n.layers) {
        weights.push_back(layer_json(l));
        biases.push_back(l.biases);
    }
    return {{"config", to_json(n.config)}, {"seed", n.seed}, {"weights", weights}, {"biases", biases}};
}

json to_json(const TrainingParams& p) {
    return {{"learning_rate", p.learning_rate}, {"batch_size", p.batch_size}, {"epochs", p.epochs}, {"seed", p.seed}};
}

json to_json(const EpochMetrics& m) {
    return {{"epoch", m.epoch},
            {"train_mse", m.train_mse},
            {"test_mse", m.test_mse},
            {"train_accuracy", m.train_accuracy},
            {"test_accuracy", m.test_accuracy}};
}

json to_json(const StateHistogram& h) {
    json classes = json::object();
    for (int j = 0; j < h.num_classes(); ++j) {
        json bins = json::object();
        for (const auto& [state, count] : h.counts[static_cast<std::size_t>(j)]) bins[state.bits] = count;
        classes[std::string(to_string(static_cast<Label>(j)))] = {{"prior", h.prior(j)}, {"counts", bins}};
    }
    return {{"layer", h.layer_index}, {"nodes", h.nodes}, {"output_layer", h.output_layer}, {"npts", h.npts},
            {"classes", classes}};
}

json to_json(const StateStatistics& s) {
    json classes = json::object();
    for (std::size_t j = 0; j < s.classes.size(); ++j) {
        const auto& c = s.classes[j];
        classes[std::string(to_string(static_cast<Label>(j)))] = {
            {"nonzero_bins", c.nonzero_bins},
            {"most_frequent", {{"state", c.most_frequent.bits}, {"count", c.most_count}}},
            {"least_frequent", {{"state", c.least_frequent.bits}, {"count", c.least_count}}},
            {"constant_bits", c.constant_bits}};
    }
    json overlap = json::array();
    for (const auto& st : s.overlapping) overlap.push_back(st.bits);
    return {{"layer", s.layer_index}, {"classes", classes}, {"overlapping", overlap},
            {"overlapping_count", s.overlapping.size()}};
}

json to_json(const KLReport& r) {
    json layers = json::array();
    for (const auto& l : r.layers) {
        json classes = json::object();
        for (const auto& e : l.classes) {
            classes[std::string(to_string(static_cast<Label>(e.class_id)))] = {
                {"k", e.used_states}, {"n", e.states},       {"m", e.classes},
                {"D_hat", opt(e.modified)}, {"D_exact", opt(e.exact)}, {"bound", e.bound},
                {"sufficient", e.sufficient}};
        }
        layers.push_back({{"layer", l.layer_index},
                          {"nodes", l.nodes},
                          {"output_layer", l.output_layer},
                          {"nonzero_bins", l.nonzero_bins},
                          {"classes", classes}});
    }
    return {{"layers", layers}};
}

json to_json(const DeltaReport& d) {
    json layers = json::array();
    for (const auto& l : d.layers) {
        layers.push_back({{"layer", l.layer_index}, {"delta_P", l.delta_p}, {"delta_N", l.delta_n}, {"weight", l.weight}});
    }
    return {{"per_layer", layers}, {"aggregate", {{"delta_P", d.aggregate_p}, {"delta_N", d.aggregate_n}}}};
}

json to_json(const TrojanVerdict& v) {
    json per_layer = json::array();
    for (const auto& l : v.evidence.layers) {
        per_layer.push_back({{"layer", l.layer_index}, {"delta_P", l.delta_p}, {"delta_N", l.delta_n}});
    }
    return {{"quadrant", to_string(v.quadrant)},
            {"sigma", v.sigma},
            {"per_layer", per_layer},
            {"aggregate", {{"delta_P", v.evidence.aggregate_p}, {"delta_N", v.evidence.aggregate_n}}}};
}

json to_json(const SensitivityEntry& e) {
    return {{"mode", to_string(e.mode)}, {"repetitions", e.repetitions}, {"sigma", e.sigma}, {"stddevs", e.stddevs}};
}

json to_json(const SensitivityProfile& p) {
    return {{"sigma_regen", p.sigma_regen},
            {"sigma_retrain", p.sigma_retrain},
            {"sigma_untrained", p.sigma_untrained},
            {"repetitions", p.repetitions}};
}

json to_json(const CalculatorSession& s) {
    const auto slot = [](const std::optional<MemorySlot>& m) -> json {
        if (!m) return nullptr;
        json payload = m->kind == RegisterKind::dataset ? to_json(std::get<Dataset>(m->payload))
                                                        : to_json(std::get<Network>(m->payload));
        return {{"kind", to_string(m->kind)}, {"label", m->label}, {"payload", payload}};
    };
    json stored = json::object();
    for (const auto& [label, net] : s.stored_models) stored[label] = to_json(net);
    return {{"current_dataset", s.current_dataset ? to_json(*s.current_dataset) : json(nullptr)},
            {"current_network", s.current_network ? to_json(*s.current_network) : json(nullptr)},
            {"data_register", slot(s.data_register)},
            {"nn_register", slot(s.nn_register)},
            {"stored_models", stored},
            {"history", s.history}};
}

TrojanSpec trojan_from_json(const json& j, const std::string& path) {
    if (j.is_string()) return trojan_preset(parse_trojan_id(j.get<std::string>()));
    TrojanSpec t;
    t.id = parsed(j, "id", path, TrojanId::custom, parse_trojan_id);
    if (t.id != TrojanId::custom && !j.contains("regions")) return trojan_preset(t.id);
    const json& regions = required(j, "regions", path);
    if (!regions.is_array()) throw ValidationError(path + ".regions", "expected an array");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const std::string rp = path + ".regions[" + std::to_string(i) + "]";
        const json& r = regions[i];
        TrojanRegion region;
        const auto shape = field<std::string>(r, "shape", rp, "disk");
        if (shape == "disk") {
            region.shape = RegionShape::disk;
        } else if (shape == "square") {
            region.shape = RegionShape::square;
        } else {
            throw ValidationError(rp + ".shape", "expected disk or square");
        }
        const auto center = field<std::vector<double>>(r, "center", rp, {});
        if (center.size() != 2) throw ValidationError(rp + ".center", "expected [x, y]");
        region.cx = center[0];
        region.cy = center[1];
        region.size = field<double>(r, "size", rp, 0.0);
        region.source = parsed(r, "source_class", rp, Label::P, parse_label);
        region.target = parsed(r, "target_class", rp, Label::N, parse_label);
        t.regions.push_back(region);
    }
    return t;
}

DatasetSpec dataset_spec_from_json(const json& j, const std::string& path) {
    DatasetSpec s;
    s.pattern = parsed(j, "pattern", path, s.pattern, parse_pattern);
    s.npts = field<int>(j, "npts", path, s.npts);
    s.noise = field<double>(j, "noise", path, s.noise);
    s.seed = field<std::uint64_t>(j, "seed", path, s.seed);
    s.train_ratio = field<double>(j, "train_ratio", path, s.train_ratio);
    if (j.contains("trojan") && !j.at("trojan").is_null()) s.trojan = trojan_from_json(j.at("trojan"), path + ".trojan");
    try {
        validate(s);
    } catch (const ValidationError& e) {
        throw ValidationError(path + "." + e.field(), e.what());
    }
    return s;
}

Dataset dataset_from_json(const json& j, const std::string& path) {
    Dataset d;
    d.spec = dataset_spec_from_json(required(j, "spec", path), path + ".spec");
    const auto points = [&](const char* key, std::vector<LabeledPoint>& out) {
        const json& arr = required(j, key, path);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string pp = path + "." + key + "[" + std::to_string(i) + "]";
            LabeledPoint p;
            p.x = field<double>(arr[i], "x", pp, 0.0);
            p.y = field<double>(arr[i], "y", pp, 0.0);
            p.label = parsed(arr[i], "label", pp, Label::N, parse_label);
            p.original_label = parsed(arr[i], "original_label", pp, p.label, parse_label);
            p.trojaned = p.label != p.original_label;
            out.push_back(p);
        }
    };
    points("train", d.train);
    points("test", d.test);
    return d;
}

NetworkConfig network_config_from_json(const json& j, const std::string& path) {
    NetworkConfig c;
    c.input_dim = field<int>(j, "input_dim", path, c.input_dim);
    c.hidden_layers = field<std::vector<int>>(j, "hidden_layers", path, c.hidden_layers);
    c.activation = parsed(j, "activation", path, c.activation, parse_activation);
    c.output_activation = parsed(j, "output_activation", path, c.output_activation, parse_activation);
    c.output_nodes = field<int>(j, "output_nodes", path, c.output_nodes);
    c.regularization = parsed(j, "regularization", path, c.regularization, parse_regularization);
    c.regularization_rate = field<double>(j, "regularization_rate", path, c.regularization_rate);
    try {
        validate(c);
    } catch (const ValidationError& e) {
        throw ValidationError(path + "." + e.field().substr(e.field().find('.') + 1), e.what());
    }
    return c;
}

Network network_from_json(const json& j, const std::string& path) {
    const NetworkConfig config = network_config_from_json(required(j, "config", path), path + ".config");
    Network net = init_network(config, field<std::uint64_t>(j, "seed", path, 0));
    const json& weights = required(j, "weights", path);
    const json& biases = required(j, "biases", path);
    if (!weights.is_array() || weights.size() != net.layers.size() || !biases.is_array() ||
        biases.size() != net.layers.size()) {
        throw ValidationError(path + ".weights", "layer count does not match config");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        const std::string wp = path + ".weights[" + std::to_string(l) + "]";
        const json& w = weights[l];
        if (!w.is_array() || w.size() != static_cast<std::size_t>(layer.inputs)) throw ValidationError(wp, "bad shape");
        for (int i = 0; i < layer.inputs; ++i) {
            const json& row = w[static_cast<std::size_t>(i)];
            if (!row.is_array() || row.size() != static_cast<std::size_t>(layer.outputs)) {
                throw ValidationError(wp + "[" + std::to_string(i) + "]", "bad shape");
            }
            for (int o = 0; o < layer.outputs; ++o) {
                if (!row[static_cast<std::size_t>(o)].is_number()) throw ValidationError(wp, "expected numbers");
                layer.weight(i, o) = row[static_cast<std::size_t>(o)].get<double>();
            }
        }
        const std::string bp = path + ".biases[" + std::to_string(l) + "]";
        const json& b = biases[l];
        if (!b.is_array() || b.size() != layer.biases.size()) throw ValidationError(bp, "bad shape");
        for (std::size_t o = 0; o < layer.biases.size(); ++o) {
            if (!b[o].is_number()) throw ValidationError(bp, "expected numbers");
            layer.biases[o] = b[o].get<double>();
        }
    }
    return net;
}

TrainingParams training_params_from_json(const json& j, const std::string& path) {
    TrainingParams p;
    p.learning_rate = field<double>(j, "learning_rate", path, p.learning_rate);
    p.batch_size = field<int>(j, "batch_size", path, p.batch_size);
    p.epochs = field<int>(j, "epochs", path, p.epochs);
    p.seed = field<std::uint64_t>(j, "seed", path, p.seed);
    if (!(p.learning_rate > 0.0)) throw ValidationError(path + ".learning_rate", "must be positive");
    if (p.batch_size < 1) throw ValidationError(path + ".batch_size", "must be positive");
    if (p.epochs < 0) throw ValidationError(path + ".epochs", "must be >= 0");
    return p;
}

FeatureSelection features_from_json(const json& j, const std::string& path) {
    try {
        if (j.is_string()) return FeatureSelection::parse(j.get<std::string>());
        if (!j.is_array()) throw ValidationError(path, "expected a list of feature names");
        std::vector<Feature> fs;
        for (const auto& name : j) fs.push_back(parse_feature(name.get<std::string>()));
        return FeatureSelection(std::move(fs));
    } catch (const ValidationError& e) {
        throw ValidationError(path, e.what());
    } catch (const json::exception& e) {
        throw ValidationError(path, e.what());
    }
}

CalculatorSession session_from_json(const json& j, const std::string& path) {
    CalculatorSession s;
    if (!j.is_object()) throw ValidationError(path, "expected an object");
    if (j.contains("current_dataset") && !j["current_dataset"].is_null()) {
        s.current_dataset = dataset_from_json(j["current_dataset"], path + ".current_dataset");
    }
    if (j.contains("current_network") && !j["current_network"].is_null()) {
        s.current_network = network_from_json(j["current_network"], path + ".current_network");
    }
    const auto slot = [&](const char* key) -> std::optional<MemorySlot> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        const std::string sp = path + "." + key;
        const json& m = j[key];
        MemorySlot out;
        out.kind = parsed(m, "kind", sp, RegisterKind::dataset, parse_register);
        out.label = field<std::string>(m, "label", sp, "");
        if (out.kind == RegisterKind::dataset) {
            out.payload = dataset_from_json(required(m, "payload", sp), sp + ".payload");
        } else {
            out.payload = network_from_json(required(m, "payload", sp), sp + ".payload");
        }
        return out;
    };
    s.data_register = slot("data_register");
    s.nn_register = slot("nn_register");
    if (j.contains("stored_models")) {
        for (const auto& [label, net] : j["stored_models"].items()) {
            s.stored_models.emplace(label, network_from_json(net, path + ".stored_models." + label));
        }
    }
    s.history = field<std::vector<std::string>>(j, "history", path, {});
    return s;
}

}  // namespace nncalc
