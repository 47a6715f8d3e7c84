#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

#include "mcbr/store.hpp"

namespace mcbr {

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct ServiceConfig {
    EngineConfig engine;
    /// Sessions untouched for this long are dropped.
    std::chrono::seconds idle_timeout{30 * 60};
    /// Seed for session tokens; 0 draws one from std::random_device.
    std::uint64_t token_seed = 0;
};

/// Request/response API over a Repository. Transport-free: `handle` takes a
/// method, a request target and a JSON body, so tests drive it directly.
///
///   GET  /catalog
///   GET  /cases                    GET /cases/{id}
///   GET  /adaptation-cases         GET /adaptation-cases/{id}
///   GET  /rules
///   POST /sessions                 {"symptoms": "0101.." | "present": [names], "mode": "auto"|"interactive"}
///   GET  /sessions/{id}            DELETE /sessions/{id}
///   POST /sessions/{id}/select     {"rank": 1}
///   POST /sessions/{id}/verdict    {"success": bool, "repair": {"primary", "differentials"}}
///   POST /sessions/{id}/retain     {"retain_diagnostic": bool, "retain_adaptation": bool}
///   POST /experiments              {"kind": "accuracy"|"robustness"|"learning", "config": {..}}
///   GET  /experiments              GET /experiments/{id}   GET /experiments/{id}/curve
///
/// Every JSON response carries "revisions": {"cases", "adaptation_cases"}.
/// Errors are {"error": {"code", "message"}} with a 4xx status for bad input
/// or state order and 5xx for storage faults.
class ApiService {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit ApiService(Repository& repo, ServiceConfig config = {}, Clock clock = {});

    ApiResponse handle(std::string_view method, std::string_view target, std::string_view body);

    std::size_t session_count() const;
    /// Drops idle sessions; returns how many were removed.
    std::size_t expire_idle();

private:
    struct Entry {
        std::mutex mutex;
        Session session;
        std::chrono::steady_clock::time_point created;
        std::chrono::steady_clock::time_point updated;
    };

    ApiResponse dispatch(std::string_view method, const std::vector<std::string>& path, std::string_view body);
    ApiResponse create_session(std::string_view body);
    ApiResponse session_action(const std::string& id, std::string_view action, std::string_view body);
    ApiResponse run_experiment(std::string_view body);

    std::shared_ptr<Entry> find_session(const std::string& id);
    std::string new_token();
    nlohmann::json session_view(const Entry& entry) const;
    nlohmann::json revisions() const;
    ApiResponse ok(nlohmann::json body, int status = 200) const;

    Repository& repo_;
    ServiceConfig config_;
    Clock clock_;

    mutable std::mutex table_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mt19937_64 token_engine_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code) noexcept;

/// Plain HTTP front end for an ApiService.
class HttpServer {
public:
    explicit HttpServer(ApiService& api);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the socket; port 0 picks a free one. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace mcbr
