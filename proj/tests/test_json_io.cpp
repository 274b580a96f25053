#include <gtest/gtest.h>

#include "nncalc/errors.hpp"
#include "nncalc/experiments.hpp"
#include "nncalc/json_io.hpp"

using namespace nncalc;

namespace {

std::string field_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST(JsonIo, NetworkRoundTripIsBitExact) {
    NetworkConfig c;
    c.hidden_layers = {5, 3};
    c.activation = Activation::relu;
    c.regularization = Regularization::L2;
    c.regularization_rate = 0.003;
    const Network net = init_network(c, 42);
    const Network back = network_from_json(json::parse(to_json(net).dump()));
    EXPECT_EQ(back, net);
}

TEST(JsonIo, DatasetRoundTrip) {
    DatasetSpec s;
    s.npts = 60;
    s.noise = 0.3;
    s.trojan = trojan_preset(TrojanId::T2);
    const Dataset d = generate(s);
    EXPECT_EQ(dataset_from_json(json::parse(to_json(d).dump())), d);
}

TEST(JsonIo, TrojanPresetByName) {
    const DatasetSpec s = dataset_spec_from_json(json{{"pattern", "spiral"}, {"trojan", "T8"}});
    ASSERT_TRUE(s.trojan.has_value());
    EXPECT_EQ(*s.trojan, trojan_preset(TrojanId::T8));
}

TEST(JsonIo, SessionRoundTrip) {
    CalculatorSession s;
    DatasetSpec spec;
    spec.npts = 30;
    s.current_dataset = generate(spec);
    s.current_network = init_network(NetworkConfig{}, 3);
    s = ms(s, RegisterKind::network, "twot");
    s = ms(s, RegisterKind::dataset);
    EXPECT_EQ(session_from_json(json::parse(to_json(s).dump())), s);
}

TEST(JsonIo, FieldPaths) {
    EXPECT_EQ(field_of([] { dataset_spec_from_json(json{{"noise", 0.9}}); }), "dataset.noise");
    EXPECT_EQ(field_of([] { dataset_spec_from_json(json{{"npts", "many"}}); }), "dataset.npts");
    EXPECT_EQ(field_of([] { network_config_from_json(json{{"hidden_layers", {4, 12}}}); }),
              "network.hidden_layers[1]");
    EXPECT_EQ(field_of([] { network_config_from_json(json{{"activation", "gelu"}}); }), "network.activation");
    EXPECT_EQ(field_of([] { training_params_from_json(json{{"learning_rate", -1}}); }), "training.learning_rate");
    EXPECT_EQ(field_of([] { features_from_json(json{"X1", "X9"}); }), "features");
}

TEST(JsonIo, ModelShapeMismatch) {
    json j = to_json(init_network(NetworkConfig{}, 1));
    j["weights"][0].erase(0);
    EXPECT_THROW(network_from_json(j), ValidationError);
}

TEST(JsonIo, ExperimentConfigRoundTrip) {
    ExperimentConfig cfg;
    cfg.experiment = ExperimentKind::sensitivity;
    cfg.seeds = {4, 5};
    cfg.sigma = 0.25;
    cfg.features = FeatureSelection::parse("X1,X2,sin(X1)");
    cfg.network.input_dim = 3;
    const ExperimentConfig back = experiment_config_from_json(json::parse(to_json(cfg).dump()));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_EQ(config_hash(back), config_hash(cfg));
}
