#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "nncalc/features.hpp"
#include "nncalc/json_io.hpp"
#include "nncalc/memory_bank.hpp"

namespace httplib {
class Server;
}

namespace nncalc::service {

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    json parsed() const { return json::parse(body); }
};

// Everything a session keeps between requests.
struct SessionState {
    CalculatorSession calculator;
    FeatureSelection features = FeatureSelection::default_set();
    TrainingParams training;
};

json to_json(const SessionState& s);
SessionState session_state_from_json(const json& j);

using Clock = std::chrono::steady_clock;

// Handlers are plain functions of (session, request) so they can be driven
// without a socket. Each session is guarded by its own mutex; distinct
// sessions proceed in parallel.
class AnalysisService {
public:
    explicit AnalysisService(std::chrono::seconds ttl = std::chrono::seconds(3600),
                             std::function<Clock::time_point()> now = Clock::now);

    // Empty body: fresh session. Otherwise the body is an /export document.
    Response create_session(const std::string& body = {});
    Response set_dataset(const std::string& id, const std::string& body);
    // Body: {network, training, features?, resume?}. Each epoch and the final
    // summary go to on_line as one JSON object per line.
    Response train(const std::string& id, const std::string& body,
                   const std::function<void(const std::string&)>& on_line = {});
    Response memory(const std::string& id, const std::string& reg, const std::string& op, const std::string& label);
    Response states(const std::string& id, const std::string& split);
    Response kl(const std::string& id, const std::string& split);
    // Body: {twot, twt, sigma?, weights?, repetitions?}.
    Response trojan_delta(const std::string& id, const std::string& body);
    Response export_session(const std::string& id);
    Response boundary(const std::string& id, int grid);

    std::size_t expire_idle();
    std::size_t session_count() const;

private:
    struct Entry {
        std::mutex mutex;
        SessionState state;
        Clock::time_point last_used;
    };

    std::shared_ptr<Entry> find(const std::string& id);
    Response with_session(const std::string& id, const std::function<Response(SessionState&)>& fn);
    std::string new_id();

    std::chrono::seconds ttl_;
    std::function<Clock::time_point()> now_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_ = 0;
};

struct ServerOptions {
    std::string cors_origin = "*";
    std::optional<std::string> static_dir;
};

// Registers every route on server. The service must outlive it.
void mount(httplib::Server& server, AnalysisService& service, const ServerOptions& options = {});

}  // namespace nncalc::service
