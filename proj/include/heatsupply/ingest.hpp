#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "heatsupply/clock.hpp"
#include "heatsupply/store.hpp"
#include "heatsupply/telemetry.hpp"

namespace heatsupply {

// ---------------------------------------------------------------------------
// Commands

struct SetMode {
    OperatingMode mode;
    friend bool operator==(const SetMode&, const SetMode&) = default;
};

struct SetPump {
    std::uint8_t index;  // 0..7
    PumpState state;
    friend bool operator==(const SetPump&, const SetPump&) = default;
};

struct SetSetpoint {
    std::uint8_t index;  // 0..7
    Temperature value;
    friend bool operator==(const SetSetpoint&, const SetSetpoint&) = default;
};

using CommandKind = std::variant<SetMode, SetPump, SetSetpoint>;

enum class CommandState { Pending, Delivered, Acked, Expired };

std::string_view to_string(CommandState state) noexcept;

struct Command {
    std::uint64_t id = 0;
    StationId station;
    CommandKind kind;
    std::uint64_t created_at = 0;
    std::uint64_t ttl_s = 300;
    CommandState state = CommandState::Pending;
};

nlohmann::json command_to_json(const Command& cmd);
std::optional<Command> command_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const StationRecord& record);
std::optional<StationRecord> record_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Request / response plumbing shared by the HTTP server and in-process callers

using Params = std::map<std::string, std::string>;

struct Request {
    std::string method = "GET";
    std::string path;
    Params params;
    std::map<std::string, std::string> headers;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "text/plain";
};

struct ServiceConfig {
    std::string listen = "127.0.0.1:8080";
    std::string data_dir = "data";
    std::uint64_t command_ttl_s = 300;
    std::string auth_token;  // empty disables the X-Auth-Token check

    std::string host() const;
    int port() const;
};

/// Parses `key=value` lines; `#` starts a comment. Throws std::runtime_error.
ServiceConfig load_config(const std::string& path);
ServiceConfig parse_config(std::string_view text);

enum class AckResult { Acked, UnknownCommand, WrongState };

class IngestService {
public:
    static constexpr std::size_t kDefaultQueryLimit = 1000;
    static constexpr const char* kAuthHeader = "X-Auth-Token";

    IngestService(Store& store, const Clock& clock, std::uint64_t command_ttl_s = 300, std::string auth_token = {});

    /// Routes a request to the matching handler. Never throws.
    Response dispatch(const Request& request);

    Response handle_record(const std::optional<std::string>& raw);
    Response handle_query(const Params& params);
    Response handle_latest(const Params& params);
    Response handle_enqueue_command(const Params& params);
    Response handle_poll_commands(const Params& params);
    Response handle_ack(const Params& params);
    Response handle_stations();

    // Typed command-queue API behind the handlers.
    Command enqueue(const StationId& station, const CommandKind& kind, std::optional<std::uint64_t> ttl_s = {});
    std::vector<Command> poll(const StationId& station);
    std::pair<AckResult, CommandState> ack(const StationId& station, std::uint64_t id);
    std::optional<Command> command(std::uint64_t id) const;
    std::size_t pending_count(const StationId& station) const;

    Store& store() noexcept { return store_; }

private:
    void expire_locked(Command& cmd, std::uint64_t now);

    Store& store_;
    const Clock& clock_;
    std::uint64_t default_ttl_s_;
    std::string auth_token_;

    mutable std::mutex commands_mu_;
    std::uint64_t next_id_ = 1;
    std::map<std::uint64_t, Command> commands_;  // id order
};

}  // namespace heatsupply
