#include "nncalc/service.hpp"

#include <httplib.h>

#include <random>

#include "nncalc/errors.hpp"
#include "nncalc/kernels.hpp"
#include "nncalc/states.hpp"
#include "nncalc/trojan_detect.hpp"

namespace nncalc::service {
namespace {

Response reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response error_reply(int status, const std::string& message, const json& extra = json::object()) {
    json body = extra;
    body["error"] = message;
    return reply(status, body);
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw ValidationError("body", "malformed JSON");
    if (!j.is_object()) throw ValidationError("body", "expected a JSON object");
    return j;
}

Response guarded(const std::function<Response()>& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        return error_reply(400, e.what(), {{"field", e.field()}});
    } catch (const TrainingError& e) {
        return error_reply(409, e.what(), {{"epoch", e.epoch()}});
    } catch (const EmptyRegister& e) {
        return error_reply(409, e.what(), {{"field", "register"}});
    } catch (const UndefinedDivergence& e) {
        return error_reply(400, e.what(), {{"field", "assignment"}});
    } catch (const json::exception& e) {
        return error_reply(400, e.what(), {{"field", "body"}});
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

json network_summary(const Network& net) {
    return {{"config", to_json(net.config)}, {"seed", net.seed}, {"parameters", net.parameter_count()}};
}

json dataset_summary(const Dataset& d) {
    std::size_t trojaned = 0;
    std::size_t positives = 0;
    for (const auto& p : d.all_points()) {
        trojaned += p.trojaned ? 1 : 0;
        positives += p.label == Label::P ? 1 : 0;
    }
    return {{"spec", to_json(d.spec)},
            {"train", d.train.size()},
            {"test", d.test.size()},
            {"positives", positives},
            {"trojaned", trojaned}};
}

const Dataset& require_dataset(const SessionState& s) {
    if (!s.calculator.current_dataset) throw ValidationError("dataset", "no dataset selected");
    return *s.calculator.current_dataset;
}

// Before anything is trained the session measures a freshly initialized
// default network, the same thing the untrained sensitivity mode looks at.
Network active_network(const SessionState& s, bool& untrained) {
    untrained = !s.calculator.current_network;
    if (!untrained) return *s.calculator.current_network;
    NetworkConfig config;
    config.input_dim = static_cast<int>(s.features.size());
    return init_network(config, s.training.seed);
}

std::vector<LabeledPoint> split_points(const Dataset& d, const std::string& split) {
    if (split.empty() || split == "all") return d.all_points();
    if (split == "train") return d.train;
    if (split == "test") return d.test;
    throw ValidationError("split", "expected all, train or test");
}

void check_features(const Network& net, const FeatureSelection& sel) {
    if (net.config.input_dim != static_cast<int>(sel.size())) {
        throw ValidationError("features", "network input_dim does not match the session features");
    }
}

json session_summary(const SessionState& s) {
    const auto slot = [](const std::optional<MemorySlot>& m) -> json {
        if (!m) return nullptr;
        json out = {{"label", m->label}};
        if (const auto* d = std::get_if<Dataset>(&m->payload)) out["dataset"] = dataset_summary(*d);
        if (const auto* n = std::get_if<Network>(&m->payload)) out["network"] = network_summary(*n);
        return out;
    };
    json stored = json::array();
    for (const auto& [label, net] : s.calculator.stored_models) stored.push_back(label);
    const auto& c = s.calculator;
    return {{"current_dataset", c.current_dataset ? dataset_summary(*c.current_dataset) : json(nullptr)},
            {"current_network", c.current_network ? to_json(*c.current_network) : json(nullptr)},
            {"registers", {{"d", slot(c.data_register)}, {"nn", slot(c.nn_register)}}},
            {"stored_models", stored},
            {"history", c.history}};
}

}  // namespace

json to_json(const SessionState& s) {
    return {{"version", 1},
            {"calculator", nncalc::to_json(s.calculator)},
            {"features", s.features.names()},
            {"training", nncalc::to_json(s.training)}};
}

SessionState session_state_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("session", "expected an object");
    SessionState s;
    if (j.contains("calculator")) s.calculator = session_from_json(j.at("calculator"), "calculator");
    if (j.contains("features")) s.features = features_from_json(j.at("features"));
    if (j.contains("training")) s.training = training_params_from_json(j.at("training"));
    return s;
}

AnalysisService::AnalysisService(std::chrono::seconds ttl, std::function<Clock::time_point()> now)
    : ttl_(ttl), now_(std::move(now)) {}

std::string AnalysisService::new_id() {
    static thread_local std::mt19937_64 gen{std::random_device{}()};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%016llx%04llx", static_cast<unsigned long long>(gen()),
                  static_cast<unsigned long long>(++counter_ & 0xffff));
    return buf;
}

std::shared_ptr<AnalysisService::Entry> AnalysisService::find(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::size_t AnalysisService::expire_idle() {
    std::lock_guard lock(mutex_);
    const auto now = now_();
    std::size_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        // A session with a request in flight is busy, not idle.
        std::unique_lock busy(it->second->mutex, std::try_to_lock);
        if (busy.owns_lock() && now - it->second->last_used > ttl_) {
            busy.unlock();
            it = sessions_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

std::size_t AnalysisService::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

Response AnalysisService::with_session(const std::string& id, const std::function<Response(SessionState&)>& fn) {
    expire_idle();
    auto entry = find(id);
    if (!entry) return error_reply(404, "unknown session '" + id + "'");
    std::lock_guard lock(entry->mutex);
    entry->last_used = now_();
    // Handlers work on a copy so a failed request leaves the session untouched.
    SessionState working = entry->state;
    Response r = guarded([&] { return fn(working); });
    if (r.status < 400) entry->state = std::move(working);
    entry->last_used = now_();
    return r;
}

Response AnalysisService::create_session(const std::string& body) {
    return guarded([&] {
        expire_idle();
        auto entry = std::make_shared<Entry>();
        if (!body.empty()) entry->state = session_state_from_json(parse_body(body));
        entry->last_used = now_();
        std::string id;
        {
            std::lock_guard lock(mutex_);
            do {
                id = new_id();
            } while (sessions_.contains(id));
            sessions_.emplace(id, entry);
        }
        return reply(201, {{"id", id}, {"ttl_seconds", ttl_.count()}, {"session", session_summary(entry->state)}});
    });
}

Response AnalysisService::set_dataset(const std::string& id, const std::string& body) {
    return with_session(id, [&](SessionState& s) {
        const Dataset d = generate(dataset_spec_from_json(parse_body(body)));
        s.calculator.current_dataset = d;
        s.calculator.history.push_back("dataset " + std::string(to_string(d.spec.pattern)) + " seed " +
                                       std::to_string(d.spec.seed) +
                                       (d.spec.trojan ? " trojan " + std::string(to_string(d.spec.trojan->id)) : ""));
        json out = dataset_summary(d);
        out["points"] = nncalc::to_json(d);
        return reply(200, out);
    });
}

Response AnalysisService::train(const std::string& id, const std::string& body,
                                const std::function<void(const std::string&)>& on_line) {
    return with_session(id, [&](SessionState& s) {
        const json j = parse_body(body);
        FeatureSelection features = s.features;
        if (j.contains("features")) features = features_from_json(j.at("features"));
        json net_json = j.value("network", json::object());
        if (!net_json.contains("input_dim")) net_json["input_dim"] = features.size();
        const NetworkConfig config = network_config_from_json(net_json);
        const TrainingParams params = training_params_from_json(j.value("training", json::object()));
        const Dataset& data = require_dataset(s);

        Network start;
        if (j.value("resume", false)) {
            if (!s.calculator.current_network) throw ValidationError("resume", "no network to resume");
            start = *s.calculator.current_network;
        } else {
            start = init_network(config, j.value("seed", params.seed));
        }
        check_features(start, features);

        std::string stream;
        const auto emit = [&](const json& line) {
            std::string text = line.dump() + "\n";
            if (on_line) on_line(text);
            stream += text;
        };
        const TrainingResult r = nncalc::train(start, data, features, params, [&](const EpochMetrics& m) {
            json line = nncalc::to_json(m);
            line["event"] = "epoch";
            emit(line);
            return true;
        });
        s.features = features;
        s.training = params;
        s.calculator.current_network = r.network;
        s.calculator.history.push_back("train " + std::to_string(params.epochs) + " epochs seed " +
                                       std::to_string(params.seed));
        json done = {{"event", "done"}, {"network", network_summary(r.network)}, {"epochs", r.metrics.epochs.size()}};
        if (!r.metrics.epochs.empty()) done["final"] = nncalc::to_json(r.metrics.epochs.back());
        emit(done);
        return Response{200, stream, "application/x-ndjson"};
    });
}

Response AnalysisService::memory(const std::string& id, const std::string& reg, const std::string& op,
                                 const std::string& label) {
    return with_session(id, [&](SessionState& s) {
        s.calculator = apply(std::move(s.calculator), parse_register(reg), parse_memory_op(op), label);
        return reply(200, session_summary(s));
    });
}

Response AnalysisService::states(const std::string& id, const std::string& split) {
    return with_session(id, [&](SessionState& s) {
        bool untrained = false;
        const Network net = active_network(s, untrained);
        check_features(net, s.features);
        const auto points = split_points(require_dataset(s), split);
        json layers = json::array();
        for (const auto& h : capture_states(net, points, s.features)) layers.push_back(nncalc::to_json(h));
        return reply(200, {{"split", split.empty() ? "all" : split}, {"untrained", untrained}, {"layers", layers}});
    });
}

Response AnalysisService::kl(const std::string& id, const std::string& split) {
    return with_session(id, [&](SessionState& s) {
        bool untrained = false;
        const Network net = active_network(s, untrained);
        check_features(net, s.features);
        const Measurement m = measure(net, split_points(require_dataset(s), split), s.features);
        json stats = json::array();
        for (const auto& st : m.statistics) stats.push_back(nncalc::to_json(st));
        return reply(200, {{"split", split.empty() ? "all" : split},
                           {"untrained", untrained},
                           {"report", nncalc::to_json(m.report)},
                           {"statistics", stats}});
    });
}

Response AnalysisService::trojan_delta(const std::string& id, const std::string& body) {
    return with_session(id, [&](SessionState& s) {
        const json j = parse_body(body);
        const auto model = [&](const char* key) -> const Network& {
            if (!j.contains(key) || !j.at(key).is_string()) throw ValidationError(key, "expected a stored model label");
            const auto it = s.calculator.stored_models.find(j.at(key).get<std::string>());
            if (it == s.calculator.stored_models.end()) throw ValidationError(key, "no stored model with that label");
            return it->second;
        };
        const Network& twot = model("twot");
        const Network& twt = model("twt");
        check_features(twot, s.features);
        check_features(twt, s.features);
        const Dataset& data = require_dataset(s);
        const auto points = data.clean_points();

        std::optional<std::vector<double>> weights;
        if (j.contains("weights") && !j.at("weights").is_null()) weights = j.at("weights").get<std::vector<double>>();
        const DeltaReport deltas =
            compute_deltas(measure(twot, points, s.features).report, measure(twt, points, s.features).report, weights);

        double sigma = 0.0;
        if (j.contains("sigma") && !j.at("sigma").is_null()) {
            sigma = j.at("sigma").get<double>();
            if (!(sigma >= 0.0)) throw ValidationError("sigma", "must be >= 0");
        } else {
            SensitivitySetup setup;
            setup.dataset = data.spec;
            setup.dataset.trojan.reset();
            setup.network = twot.config;
            setup.training = s.training;
            setup.features = s.features;
            setup.net_seed = twot.seed;
            sigma = estimate_sigma(setup, SensitivityMode::retrain, j.value("repetitions", 4)).sigma;
        }
        const TrojanVerdict verdict = classify(deltas, sigma);
        return reply(200, {{"deltas", nncalc::to_json(deltas)}, {"verdict", nncalc::to_json(verdict)}});
    });
}

Response AnalysisService::export_session(const std::string& id) {
    return with_session(id, [&](SessionState& s) { return reply(200, to_json(s)); });
}

Response AnalysisService::boundary(const std::string& id, int grid) {
    return with_session(id, [&](SessionState& s) {
        bool untrained = false;
        const Network net = active_network(s, untrained);
        check_features(net, s.features);
        return reply(200, {{"grid", grid},
                           {"extent", {-kDomainHalfWidth, kDomainHalfWidth}},
                           {"untrained", untrained},
                           {"values", omp::predict_grid(net, s.features, grid)}});
    });
}

void mount(httplib::Server& server, AnalysisService& service, const ServerOptions& options) {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    if (options.static_dir) server.set_mount_point("/", *options.static_dir);

    const auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    const auto param = [](const httplib::Request& req, const char* key) {
        return req.has_param(key) ? req.get_param_value(key) : std::string{};
    };

    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/session", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.create_session(req.body));
    });
    server.Post(R"(/session/([^/]+)/dataset)", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.set_dataset(req.matches[1], req.body));
    });
    server.Post(R"(/session/([^/]+)/train)", [&service, send, param](const httplib::Request& req,
                                                                       httplib::Response& res) {
        const std::string id = req.matches[1];
        if (param(req, "stream") != "1") {
            send(res, service.train(id, req.body));
            return;
        }
        // Streaming commits to 200 up front; failures arrive as an in-band error event.
        if (service.export_session(id).status == 404) {
            send(res, service.train(id, req.body));
            return;
        }
        res.set_chunked_content_provider("application/x-ndjson",
                                         [&service, id, body = req.body](std::size_t, httplib::DataSink& sink) {
                                             const Response r = service.train(id, body, [&](const std::string& line) {
                                                 sink.write(line.data(), line.size());
                                             });
                                             if (r.status != 200) {
                                                 json err = json::parse(r.body);
                                                 err["event"] = "error";
                                                 err["status"] = r.status;
                                                 const std::string line = err.dump() + "\n";
                                                 sink.write(line.data(), line.size());
                                             }
                                             sink.done();
                                             return true;
                                         });
    });
    server.Post(R"(/session/([^/]+)/memory/([^/]+)/([^/]+))",
                [&service, send, param](const httplib::Request& req, httplib::Response& res) {
                    send(res, service.memory(req.matches[1], req.matches[2], req.matches[3], param(req, "label")));
                });
    server.Get(R"(/session/([^/]+)/states)", [&service, send, param](const httplib::Request& req,
                                                                      httplib::Response& res) {
        send(res, service.states(req.matches[1], param(req, "split")));
    });
    server.Get(R"(/session/([^/]+)/kl)", [&service, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, service.kl(req.matches[1], param(req, "split")));
    });
    server.Post(R"(/session/([^/]+)/trojan-delta)",
                [&service, send](const httplib::Request& req, httplib::Response& res) {
                    send(res, service.trojan_delta(req.matches[1], req.body));
                });
    server.Get(R"(/session/([^/]+)/export)", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.export_session(req.matches[1]));
    });
    server.Get(R"(/session/([^/]+)/boundary)", [&service, send, param](const httplib::Request& req,
                                                                        httplib::Response& res) {
        const std::string g = param(req, "grid");
        int grid = 50;
        try {
            if (!g.empty()) grid = std::stoi(g);
        } catch (const std::exception&) {
            send(res, error_reply(400, "grid must be an integer", {{"field", "grid"}}));
            return;
        }
        send(res, service.boundary(req.matches[1], grid));
    });
}

}  // namespace nncalc::service
