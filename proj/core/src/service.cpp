#include "mcbr/service.hpp"

#include <charconv>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace mcbr {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::StateOrder:
    case ErrorCode::IdCollision: return 409;
    case ErrorCode::EmptyCaseBase: return 422;
    case ErrorCode::Storage:
    case ErrorCode::MissingFile: return 500;
    default: return 400;
    }
}

namespace {

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
    json body = {{"error", {{"code", code}, {"message", message}}}};
    return {status, body.dump(), "application/json"};
}

std::vector<std::string> split_path(std::string_view target) {
    const auto q = target.find('?');
    if (q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= target.size()) {
        const auto j = std::min(target.find('/', i), target.size());
        if (j > i) out.emplace_back(target.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

json parse_body(std::string_view body) {
    if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("request body is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Validation, "request body must be a JSON object");
    return j;
}

CaseId parse_id(const std::string& s) {
    CaseId id = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc{} || p != s.data() + s.size()) throw Error(ErrorCode::Validation, "bad id '" + s + "'");
    return id;
}

template <typename T>
T field(const json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::Validation, std::string("field '") + name + "' has the wrong type");
    }
}

SymptomVector query_from(const json& body, const SymptomCatalog& catalog) {
    if (body.contains("symptoms")) {
        const auto bits = field<std::string>(body, "symptoms", "");
        if (bits.size() != catalog.size())
            throw Error(ErrorCode::CatalogMismatch, "symptom vector has " + std::to_string(bits.size()) +
                                                        " entries, catalog has " + std::to_string(catalog.size()));
        try {
            return SymptomVector::from_bitstring(bits);
        } catch (const Error& e) {
            throw Error(ErrorCode::Validation, e.what());
        }
    }
    if (body.contains("present")) {
        SymptomVector v(catalog.size());
        for (const auto& name : field<std::vector<std::string>>(body, "present", {})) {
            auto id = catalog.find(name);
            if (!id) throw Error(ErrorCode::Validation, "unknown symptom '" + name + "'");
            v.set(*id, true);
        }
        return v;
    }
    throw Error(ErrorCode::Validation, "request needs 'symptoms' or 'present'");
}

EngineConfig engine_from(const json& body, EngineConfig c) {
    c.tau_reuse = field(body, "tau_reuse", c.tau_reuse);
    c.tau_adapt = field(body, "tau_adapt", c.tau_adapt);
    c.k = field(body, "k", c.k);
    c.include_failed_cases = field(body, "include_failed_cases", c.include_failed_cases);
    c.validate();
    return c;
}

json rules_json(const RuleBase& rules, const SymptomCatalog& catalog) {
    json out = json::array();
    for (const auto& r : rules.rules()) {
        RuleBase single;
        single.add(r);
        std::string text = format_rules(single, catalog);
        while (!text.empty() && text.back() == '\n') text.pop_back();
        out.push_back({{"id", r.id}, {"text", text}});
    }
    return out;
}

} // namespace

ApiService::ApiService(Repository& repo, ServiceConfig config, Clock clock)
    : repo_(repo), config_(std::move(config)), clock_(std::move(clock)) {
    config_.engine.validate();
    if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
    token_engine_.seed(config_.token_seed ? config_.token_seed : (std::uint64_t{std::random_device{}()} << 32) ^
                                                                     std::random_device{}());
}

std::size_t ApiService::session_count() const {
    std::lock_guard lock(table_mutex_);
    return sessions_.size();
}

std::size_t ApiService::expire_idle() {
    const auto now = clock_();
    std::lock_guard lock(table_mutex_);
    std::size_t removed = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (now - it->second->updated >= config_.idle_timeout) {
            it = sessions_.erase(it);
            ++removed;
        } else {
            ++it;
        }
    }
    return removed;
}

std::string ApiService::new_token() {
    // Caller holds table_mutex_.
    for (;;) {
        std::ostringstream os;
        os << std::hex;
        os.width(16);
        os.fill('0');
        os << token_engine_();
        os.width(16);
        os << token_engine_();
        if (!sessions_.count(os.str())) return os.str();
    }
}

std::shared_ptr<ApiService::Entry> ApiService::find_session(const std::string& id) {
    expire_idle();
    std::lock_guard lock(table_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "' (unknown or expired)");
    return it->second;
}

json ApiService::revisions() const {
    return {{"cases", repo_.cases_revision()}, {"adaptation_cases", repo_.adaptation_revision()}};
}

ApiResponse ApiService::ok(json body, int status) const {
    body["revisions"] = revisions();
    return {status, body.dump(), "application/json"};
}

json ApiService::session_view(const Entry& entry) const {
    json s = session_to_json(entry.session, repo_.catalog());
    using namespace std::chrono;
    s["idle_seconds"] = duration_cast<seconds>(clock_() - entry.updated).count();
    s["age_seconds"] = duration_cast<seconds>(clock_() - entry.created).count();
    return s;
}

ApiResponse ApiService::handle(std::string_view method, std::string_view target, std::string_view body) {
    try {
        return dispatch(method, split_path(target), body);
    } catch (const Error& e) {
        return error_response(http_status(e.code()), code_name(e.code()), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal_error", e.what());
    }
}

ApiResponse ApiService::dispatch(std::string_view method, const std::vector<std::string>& path, std::string_view body) {
    const std::size_t n = path.size();
    auto is = [&](std::size_t i, std::string_view s) { return i < n && path[i] == s; };
    const bool get = method == "GET";
    const bool post = method == "POST";

    if (get && n == 1 && is(0, "health")) return ok({{"status", "ok"}});

    if (get && n == 1 && is(0, "catalog")) {
        json entries = json::array();
        const auto& cat = repo_.catalog();
        for (std::size_t i = 0; i < cat.size(); ++i)
            entries.push_back({{"index", i}, {"name", cat.entries()[i].name}, {"influential", cat.entries()[i].influential}});
        return ok({{"symptoms", entries}});
    }

    if (get && is(0, "cases") && n <= 2) {
        return repo_.read([&](const Knowledge& kb) {
            auto view = [&](const DiagnosticCase& c) {
                json j = json::parse(format_case_record(c));
                json present = json::array();
                for (auto id : c.description.present()) present.push_back(kb.catalog.name(id));
                j["present"] = present;
                return j;
            };
            if (n == 2) {
                const auto* c = kb.cases.find(parse_id(path[1]));
                if (!c) throw Error(ErrorCode::NotFound, "no case " + path[1]);
                return ok({{"case", view(*c)}});
            }
            json list = json::array();
            for (const auto& [id, c] : kb.cases.cases()) list.push_back(view(c));
            return ok({{"count", kb.cases.size()}, {"cases", list}});
        });
    }

    if (get && is(0, "adaptation-cases") && n <= 2) {
        return repo_.read([&](const Knowledge& kb) {
            if (n == 2) {
                const auto* c = kb.adaptation_cases.find(parse_id(path[1]));
                if (!c) throw Error(ErrorCode::NotFound, "no adaptation case " + path[1]);
                return ok({{"case", json::parse(format_adaptation_record(*c))}});
            }
            json list = json::array();
            for (const auto& [id, c] : kb.adaptation_cases.cases()) list.push_back(json::parse(format_adaptation_record(c)));
            return ok({{"count", kb.adaptation_cases.size()}, {"cases", list}});
        });
    }

    if (get && n == 1 && is(0, "rules")) {
        return repo_.read([&](const Knowledge& kb) {
            json influential = json::array();
            for (auto id : kb.influential) influential.push_back(kb.catalog.name(id));
            return ok({{"prediagnosis", rules_json(kb.prediagnosis_rules, kb.catalog)},
                       {"adaptation", rules_json(kb.adaptation_rules, kb.catalog)},
                       {"influential_symptoms", influential}});
        });
    }

    if (is(0, "sessions")) {
        if (post && n == 1) return create_session(body);
        if (n == 2 && get) {
            auto entry = find_session(path[1]);
            std::lock_guard lock(entry->mutex);
            return ok({{"session", session_view(*entry)}});
        }
        if (n == 2 && method == "DELETE") {
            std::lock_guard lock(table_mutex_);
            if (!sessions_.erase(path[1])) throw Error(ErrorCode::NotFound, "no session '" + path[1] + "'");
            return ok({{"deleted", path[1]}});
        }
        if (n == 3 && post) return session_action(path[1], path[2], body);
    }

    if (is(0, "experiments")) {
        if (post && n == 1) return run_experiment(body);
        if (get && n == 1) return ok({{"reports", repo_.report_ids()}});
        if (get && n == 2) return ok({{"report", report_to_json(repo_.load_report(path[1]), repo_.catalog())}});
        if (get && n == 3 && is(2, "curve"))
            return {200, format_curve_csv(repo_.load_report(path[1]), repo_.catalog()), "text/csv"};
    }

    std::string joined;
    for (const auto& p : path) joined += "/" + p;
    return error_response(404, "not_found", "no route " + std::string(method) + " " + (joined.empty() ? "/" : joined));
}

ApiResponse ApiService::create_session(std::string_view body) {
    const json req = parse_body(body);
    const SymptomVector query = query_from(req, repo_.catalog());
    const EngineConfig engine = engine_from(req, config_.engine);
    const auto mode_name = field<std::string>(req, "mode", "auto");
    if (mode_name != "auto" && mode_name != "interactive")
        throw Error(ErrorCode::Validation, "mode must be 'auto' or 'interactive'");
    const auto mode = mode_name == "auto" ? SelectionMode::Auto : SelectionMode::Interactive;

    auto entry = std::make_shared<Entry>();
    entry->session = repo_.read([&](const Knowledge& kb) { return diagnose(kb, query, engine, mode); });
    entry->created = entry->updated = clock_();
    expire_idle();
    {
        std::lock_guard lock(table_mutex_);
        entry->session.id = new_token();
        sessions_.emplace(entry->session.id, entry);
    }
    return ok({{"session", session_view(*entry)}}, 201);
}

ApiResponse ApiService::session_action(const std::string& id, std::string_view action, std::string_view body) {
    const json req = parse_body(body);
    auto entry = find_session(id);
    std::lock_guard lock(entry->mutex);
    Session& s = entry->session;
    json extra = json::object();

    if (action == "select") {
        if (!req.contains("rank")) throw Error(ErrorCode::Validation, "select needs 'rank'");
        const auto rank = field<std::int64_t>(req, "rank", 0);
        if (rank < 1) throw Error(ErrorCode::OutOfRange, "rank must be >= 1");
        const EngineConfig engine = engine_from(req, config_.engine);
        repo_.read([&](const Knowledge& kb) {
            select(s, kb, static_cast<std::size_t>(rank), engine);
            return 0;
        });
    } else if (action == "verdict") {
        if (!req.contains("success")) throw Error(ErrorCode::Validation, "verdict needs 'success'");
        Verdict v;
        v.success = field(req, "success", true);
        if (req.contains("repair") && !req["repair"].is_null()) {
            try {
                v.repaired = solution_from_json(req["repair"]);
            } catch (const Error& e) {
                throw Error(ErrorCode::Validation, std::string("repair: ") + e.what());
            }
        }
        revise(s, v);
    } else if (action == "retain") {
        const bool diag = field(req, "retain_diagnostic", true);
        const bool adapt = field(req, "retain_adaptation", true);
        const auto sizes = [&] {
            return repo_.read([](const Knowledge& kb) {
                return json{{"cases", kb.cases.size()}, {"adaptation_cases", kb.adaptation_cases.size()}};
            });
        };
        extra["before"] = sizes();
        const RetainResult r = repo_.retain(s, diag, adapt);
        extra["after"] = sizes();
        extra["case_id"] = r.case_id ? json(*r.case_id) : json(nullptr);
        extra["adaptation_case_id"] = r.adaptation_case_id ? json(*r.adaptation_case_id) : json(nullptr);
        extra["notes"] = r.notes;
    } else {
        throw Error(ErrorCode::NotFound, "unknown session action '" + std::string(action) + "'");
    }
    entry->updated = clock_();
    extra["session"] = session_view(*entry);
    return ok(std::move(extra));
}

ApiResponse ApiService::run_experiment(std::string_view body) {
    const json req = parse_body(body);
    const auto kind_name = field<std::string>(req, "kind", "");
    const auto kind = parse_experiment_kind(kind_name);
    if (!kind) throw Error(ErrorCode::Validation, "kind must be accuracy, robustness or learning");

    ExperimentConfig base;
    base.engine = config_.engine;
    if (*kind == ExperimentKind::Robustness) base.removal_schedule = default_removal_schedule(repo_.catalog());
    const ExperimentConfig cfg =
        experiment_config_from_json(req.value("config", json::object()), repo_.catalog(), base);

    const Knowledge kb = repo_.snapshot();
    ExperimentReport report;
    switch (*kind) {
    case ExperimentKind::Accuracy: report = accuracy_experiment(kb, cfg); break;
    case ExperimentKind::Robustness: report = robustness_experiment(kb, cfg); break;
    case ExperimentKind::Learning: {
        if (!repo_.probability_table())
            throw Error(ErrorCode::Configuration, "learning experiment needs a probability table in the repository");
        const auto phases = field<std::size_t>(req, "phases", 3);
        const auto per_phase = field<std::size_t>(req, "per_phase", 30);
        const bool repeat = field(req, "repeat_first", true);
        const auto stream = synthetic_stream(kb.catalog, *repo_.probability_table(), phases, per_phase, cfg.seed, repeat);
        report = learning_experiment(kb, stream, cfg);
        break;
    }
    }
    const std::string id = repo_.save_report(report);
    return ok({{"report_id", id},
               {"summary",
                {{"kind", kind_name},
                 {"evaluated", report.evaluated},
                 {"accuracy", report.accuracy},
                 {"accuracy_lenient", report.accuracy_lenient},
                 {"majority_baseline", report.majority_baseline}}}},
              201);
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
    ApiService& api;
    httplib::Server server;
    explicit Impl(ApiService& a) : api(a) {}
};

HttpServer::HttpServer(ApiService& api) : impl_(std::make_unique<Impl>(api)) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        const ApiResponse r = impl_->api.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(r.body, r.content_type);
    };
    auto& s = impl_->server;
    s.Get(R"(/.*)", forward);
    s.Post(R"(/.*)", forward);
    s.Delete(R"(/.*)", forward);
    s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& s = impl_->server;
    const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Storage, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace mcbr
