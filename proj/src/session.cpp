#include "poolwise/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iterator>
#include <random>

#include <httplib.h>

#include "poolwise/rng.hpp"

namespace poolwise {

namespace {

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

double confirmed_welfare(const Instance& instance, const BeliefState& belief) {
    double w = 0.0;
    for (AgentId id : belief.confirmed_healthy) w += instance.utility(id);
    return w;
}

std::vector<AgentId> added(const std::vector<AgentId>& before, const std::vector<AgentId>& after) {
    std::vector<AgentId> out;
    std::set_difference(after.begin(), after.end(), before.begin(), before.end(),
                        std::back_inserter(out));
    return out;
}

}  // namespace

Json to_json(const Session& session) {
    Json j;
    j["id"] = session.id;
    const auto& inst = session.instance;
    Json roster = Json::array();
    for (const auto& a : inst.agents()) {
        const auto i = static_cast<std::size_t>(a.id);
        const char* status = session.belief.is_confirmed_healthy(a.id)    ? "confirmed_healthy"
                             : session.belief.is_confirmed_infected(a.id) ? "infected"
                                                                          : "unresolved";
        roster.push_back(Json{{"id", a.id},
                              {"u", a.utility},
                              {"p", a.prior},
                              {"marginal", session.belief.marginals[i]},
                              {"status", status}});
    }
    j["roster"] = std::move(roster);
    j["B"] = inst.budget();
    j["G"] = inst.pool_cap();
    j["history"] = to_json(session.history);
    j["belief"] = to_json(session.belief);
    j["welfare_so_far"] = session.welfare_so_far;
    j["remaining_budget"] = session.remaining_budget();
    j["created_at"] = session.created_at;
    j["updated_at"] = session.updated_at;
    return j;
}

SessionStore::SessionStore(InferenceSettings inference, std::optional<std::filesystem::path> journal)
    : inference_(inference) {
    std::random_device rd;
    id_state_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
                static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    if (journal) {
        if (std::filesystem::exists(*journal)) replay(*journal);
        journal_.open(*journal, std::ios::app);
        if (!journal_) throw Error("cannot open session journal " + journal->string());
    }
}

SessionStore::~SessionStore() = default;

Session SessionStore::build(std::string id, Instance instance, History history, std::string created,
                            std::string updated) const {
    auto belief = infer(instance, history, inference_);
    const double welfare = confirmed_welfare(instance, belief);
    return Session{std::move(id),      std::move(instance), std::move(history), std::move(belief),
                   welfare,            std::move(created),  std::move(updated)};
}

std::string SessionStore::fresh_id() {
    for (;;) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(mix64(id_state_ += 0x9e3779b97f4a7c15ULL)));
        if (!sessions_.count(buf)) return buf;
    }
}

void SessionStore::journal_write(const Json& line) {
    std::lock_guard lock(journal_mutex_);
    if (!journal_.is_open()) return;
    journal_ << line.dump() << '\n';
    journal_.flush();
}

void SessionStore::replay(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::exception&) {
            // a torn final line from a crash is dropped
            continue;
        }
        const auto op = j.value("op", std::string());
        const auto id = j.value("id", std::string());
        const auto at = j.value("at", std::string());
        if (op == "create") {
            sessions_[id] = std::make_shared<Entry>(build(id, instance_from_json(j.at("instance")), {}, at, at));
        } else if (op == "outcome") {
            auto it = sessions_.find(id);
            if (it == sessions_.end()) {
                throw Error("journal line " + std::to_string(line_no) + ": unknown session " + id);
            }
            auto& s = it->second->session;
            auto history = s.history;
            history.push_back({pool_from_json(j.at("pool")), outcome_from_string(j.at("result").get<std::string>())});
            s = build(id, s.instance, std::move(history), s.created_at, at);
        } else {
            throw Error("journal line " + std::to_string(line_no) + ": unknown op \"" + op + "\"");
        }
    }
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("no session \"" + id + "\"");
    return it->second;
}

Session SessionStore::create(const Instance& instance) {
    const auto at = now_utc();
    std::optional<Session> copy;
    {
        std::unique_lock lock(map_mutex_);
        auto entry = std::make_shared<Entry>(build(fresh_id(), instance, {}, at, at));
        sessions_[entry->session.id] = entry;
        copy = entry->session;
    }
    journal_write(Json{{"op", "create"}, {"id", copy->id}, {"at", at}, {"instance", to_json(instance)}});
    return std::move(*copy);
}

Session SessionStore::get(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    return entry->session;
}

std::vector<std::string> SessionStore::ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, entry] : sessions_) out.push_back(id);
    return out;
}

Recommendation SessionStore::recommend(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    const auto& s = entry->session;
    const auto step = greedy_dynamic_step(s.instance, s.history, inference_);
    if (!step) return {};
    return {step->pool, step->value};
}

OutcomeUpdate SessionStore::record_outcome(const std::string& id, const Pool& pool, Outcome outcome) {
    auto entry = find(id);
    std::unique_lock lock(entry->mutex);
    auto& s = entry->session;
    if (s.remaining_budget() <= 0) {
        throw StateError("testing budget of " + std::to_string(s.instance.budget()) + " is exhausted");
    }
    pool.check(s.instance);
    auto history = s.history;
    history.push_back({pool, outcome});
    const auto at = now_utc();
    Session next = build(id, s.instance, std::move(history), s.created_at, at);

    auto healthy = added(s.belief.confirmed_healthy, next.belief.confirmed_healthy);
    auto infected = added(s.belief.confirmed_infected, next.belief.confirmed_infected);
    journal_write(Json{{"op", "outcome"}, {"id", id}, {"at", at}, {"pool", to_json(pool)},
                       {"result", to_string(outcome)}});
    s = std::move(next);
    return OutcomeUpdate{s, std::move(healthy), std::move(infected)};
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, Json{{"code", code}, {"message", message}});
}

template <typename F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const StateError& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const InconsistencyError& e) {
        send_error(res, 422, "inconsistent_outcome", e.what());
    } catch (const CapacityError& e) {
        send_error(res, 422, "capacity", e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "bad_request", std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
        send_error(res, 400, "bad_request", e.what());
    }
}

Json outcome_body(const OutcomeUpdate& update) {
    Json j = to_json(update.session);
    j["newly_resolved"] = Json{{"healthy", update.newly_healthy}, {"infected", update.newly_infected}};
    return j;
}

}  // namespace

void register_routes(httplib::Server& server, SessionStore& store) {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, Json{{"status", "ok"}});
    });
    server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto body = Json::parse(req.body);
            // accept either a bare instance or {"instance": {...}}
            if (body.is_object() && body.contains("instance")) body = body.at("instance");
            const auto session = store.create(instance_from_json(body));
            send_json(res, 201, Json{{"id", session.id}, {"state", to_json(session)}});
        });
    });
    server.Get(R"(/sessions/([^/]+))", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, to_json(store.get(req.matches[1]))); });
    });
    server.Get(R"(/sessions/([^/]+)/recommendation)",
               [&store](const httplib::Request& req, httplib::Response& res) {
                   guarded(res, [&] {
                       const auto rec = store.recommend(req.matches[1]);
                       send_json(res, 200,
                                 Json{{"pool", rec.pool ? to_json(*rec.pool) : Json(nullptr)},
                                      {"value", rec.value}});
                   });
               });
    server.Post(R"(/sessions/([^/]+)/outcomes)",
                [&store](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                        const auto body = Json::parse(req.body);
                        if (!body.is_object() || !body.contains("pool") || !body.contains("result")) {
                            throw ParameterError("outcome body needs \"pool\" and \"result\"");
                        }
                        const auto update =
                            store.record_outcome(req.matches[1], pool_from_json(body.at("pool")),
                                                 outcome_from_string(body.at("result").get<std::string>()));
                        send_json(res, 200, outcome_body(update));
                    });
                });
}

void serve(SessionStore& store, const ServeOptions& options) {
    httplib::Server server;
    register_routes(server, store);
    if (options.static_dir) {
        if (!server.set_mount_point("/", options.static_dir->string())) {
            throw Error("static directory " + options.static_dir->string() + " does not exist");
        }
    }
    if (!server.listen(options.host, options.port)) {
        throw Error("cannot listen on " + options.host + ":" + std::to_string(options.port));
    }
}

}  // namespace poolwise
