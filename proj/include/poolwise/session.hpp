#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "poolwise/inference.hpp"
#include "poolwise/planning.hpp"
#include "poolwise/serialize.hpp"

namespace httplib {
class Server;
}

namespace poolwise {

class NotFoundError : public Error {
public:
    using Error::Error;
};

struct Session {
    std::string id;
    Instance instance;
    History history;
    BeliefState belief;
    double welfare_so_far = 0.0;
    std::string created_at;
    std::string updated_at;

    int remaining_budget() const { return instance.budget() - static_cast<int>(history.size()); }
};

struct Recommendation {
    std::optional<Pool> pool;  // nullopt once every agent is resolved
    double value = 0.0;
};

struct OutcomeUpdate {
    Session session;
    std::vector<AgentId> newly_healthy;   // first negative pool for these agents
    std::vector<AgentId> newly_infected;
};

// Full state payload: roster with marginals, confirmed sets, history, welfare
// and remaining budget.
Json to_json(const Session& session);

// In-process session store. Mutations of one session are serialized; reads may
// run concurrently. With a journal path every create and outcome is appended as
// one JSON line, and an existing journal is replayed on construction.
class SessionStore {
public:
    explicit SessionStore(InferenceSettings inference = {},
                          std::optional<std::filesystem::path> journal = std::nullopt);
    ~SessionStore();
    SessionStore(const SessionStore&) = delete;
    SessionStore& operator=(const SessionStore&) = delete;

    Session create(const Instance& instance);
    Session get(const std::string& id) const;
    std::vector<std::string> ids() const;

    // Greedy single test for the session's current history. Does not modify the
    // session. Throws StateError when the budget is exhausted.
    Recommendation recommend(const std::string& id) const;

    // The pool need not be the recommended one. Throws StateError when the
    // budget is exhausted and InconsistencyError for an impossible outcome.
    OutcomeUpdate record_outcome(const std::string& id, const Pool& pool, Outcome outcome);

private:
    struct Entry {
        explicit Entry(Session s) : session(std::move(s)) {}
        mutable std::shared_mutex mutex;
        Session session;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    std::string fresh_id();
    void journal_write(const Json& line);
    void replay(const std::filesystem::path& path);
    Session build(std::string id, Instance instance, History history, std::string created,
                  std::string updated) const;

    InferenceSettings inference_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mutex journal_mutex_;
    std::ofstream journal_;
    std::uint64_t id_state_;
};

// Registers the HTTP/JSON routes:
//   POST /sessions, GET /sessions/{id}, GET /sessions/{id}/recommendation,
//   POST /sessions/{id}/outcomes, GET /healthz.
// Errors are {"code", "message"} with status 400, 404, 409 or 422.
void register_routes(httplib::Server& server, SessionStore& store);

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> static_dir;  // console assets
};

// Blocks until the server stops.
void serve(SessionStore& store, const ServeOptions& options);

}  // namespace poolwise
