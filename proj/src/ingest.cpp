#include "heatsupply/ingest.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace heatsupply {

using nlohmann::json;

namespace {

Response text(int status, std::string body) { return {status, std::move(body), "text/plain"}; }
Response json_response(const json& j) { return {200, j.dump(), "application/json; charset=utf-8"}; }

template <typename UInt>
std::optional<UInt> parse_uint(std::string_view s) {
    if (s.empty()) return std::nullopt;
    UInt v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

const std::string* find_param(const Params& params, const std::string& key) {
    const auto it = params.find(key);
    return it == params.end() ? nullptr : &it->second;
}

std::optional<StationId> station_param(const Params& params) {
    const auto* s = find_param(params, "station");
    if (!s) return std::nullopt;
    return StationId::parse(*s);
}

std::string_view kind_token(const CommandKind& kind) {
    if (std::holds_alternative<SetMode>(kind)) return "SETMODE";
    if (std::holds_alternative<SetPump>(kind)) return "SETPUMP";
    return "SETSETPOINT";
}

std::optional<CommandState> parse_state(std::string_view s) {
    if (s == "PENDING") return CommandState::Pending;
    if (s == "DELIVERED") return CommandState::Delivered;
    if (s == "ACKED") return CommandState::Acked;
    if (s == "EXPIRED") return CommandState::Expired;
    return std::nullopt;
}

// `ERR <param>` if the parameter is malformed.
std::variant<CommandKind, std::string> parse_kind(const Params& params) {
    const auto* kind = find_param(params, "kind");
    if (!kind) return std::string("kind");
    if (*kind == "SETMODE") {
        const auto* m = find_param(params, "mode");
        const auto mode = m ? parse_mode(*m) : std::nullopt;
        if (!mode) return std::string("mode");
        return SetMode{*mode};
    }
    if (*kind != "SETPUMP" && *kind != "SETSETPOINT") return std::string("kind");

    const auto* idx = find_param(params, "index");
    const auto index = idx ? parse_uint<unsigned>(*idx) : std::nullopt;
    if (!index || *index >= kChannels) return std::string("index");
    const auto* value = find_param(params, "value");
    if (!value) return std::string("value");

    if (*kind == "SETPUMP") {
        if (*value == "1" || *value == "on" || *value == "ON") return SetPump{static_cast<std::uint8_t>(*index), PumpState::On};
        if (*value == "0" || *value == "off" || *value == "OFF") return SetPump{static_cast<std::uint8_t>(*index), PumpState::Off};
        return std::string("value");
    }
    const auto t = Temperature::parse(*value);
    if (!t) return std::string("value");
    return SetSetpoint{static_cast<std::uint8_t>(*index), *t};
}

}  // namespace

std::string_view to_string(CommandState state) noexcept {
    switch (state) {
        case CommandState::Pending: return "PENDING";
        case CommandState::Delivered: return "DELIVERED";
        case CommandState::Acked: return "ACKED";
        case CommandState::Expired: return "EXPIRED";
    }
    return "PENDING";
}

json command_to_json(const Command& cmd) {
    json j{{"id", cmd.id},
           {"station", cmd.station.str()},
           {"kind", kind_token(cmd.kind)},
           {"created_at", cmd.created_at},
           {"ttl", cmd.ttl_s},
           {"state", to_string(cmd.state)}};
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SetMode>) {
                j["mode"] = to_string(k.mode);
            } else if constexpr (std::is_same_v<K, SetPump>) {
                j["index"] = k.index;
                j["value"] = k.state == PumpState::On ? 1 : 0;
            } else {
                j["index"] = k.index;
                j["value"] = k.value.to_string();
            }
        },
        cmd.kind);
    return j;
}

std::optional<Command> command_from_json(const json& j) {
    try {
        auto station = StationId::parse(j.at("station").get<std::string>());
        const auto state = parse_state(j.at("state").get<std::string>());
        if (!station || !state) return std::nullopt;

        const auto kind = j.at("kind").get<std::string>();
        Params p{{"kind", kind}};
        if (kind == "SETMODE") {
            p["mode"] = j.at("mode").get<std::string>();
        } else {
            p["index"] = std::to_string(j.at("index").get<unsigned>());
            p["value"] = j.at("value").is_string() ? j.at("value").get<std::string>()
                                                   : std::to_string(j.at("value").get<int>());
        }
        auto parsed = parse_kind(p);
        if (!std::holds_alternative<CommandKind>(parsed)) return std::nullopt;

        return Command{j.at("id").get<std::uint64_t>(), std::move(*station), std::get<CommandKind>(parsed),
                       j.at("created_at").get<std::uint64_t>(), j.at("ttl").get<std::uint64_t>(), *state};
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

json record_to_json(const StationRecord& record) {
    const auto& f = record.frame;
    json temps = json::array();
    json pumps = json::array();
    for (std::size_t i = 0; i < kChannels; ++i) {
        temps.push_back(f.temps[i].to_string());
        pumps.push_back(f.pumps[i] == PumpState::On ? 1 : 0);
    }
    return json{{"station", f.station.str()},
                {"seq", f.seq},
                {"timestamp", f.timestamp},
                {"received_at", record.received_at},
                {"temps", std::move(temps)},
                {"pumps", std::move(pumps)},
                {"mode", to_string(f.mode)}};
}

std::optional<StationRecord> record_from_json(const json& j) {
    try {
        auto station = StationId::parse(j.at("station").get<std::string>());
        const auto mode = parse_mode(j.at("mode").get<std::string>());
        const auto& temps = j.at("temps");
        const auto& pumps = j.at("pumps");
        if (!station || !mode || temps.size() != kChannels || pumps.size() != kChannels) return std::nullopt;

        TelemetryFrame f{std::move(*station), j.at("seq").get<std::uint32_t>(), j.at("timestamp").get<std::uint64_t>()};
        for (std::size_t i = 0; i < kChannels; ++i) {
            const auto t = Temperature::parse(temps[i].get<std::string>());
            if (!t) return std::nullopt;
            f.temps[i] = *t;
            const int p = pumps[i].get<int>();
            if (p != 0 && p != 1) return std::nullopt;
            f.pumps[i] = p ? PumpState::On : PumpState::Off;
        }
        f.mode = *mode;
        return StationRecord{std::move(f), j.at("received_at").get<std::uint64_t>()};
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------

std::string ServiceConfig::host() const {
    const auto colon = listen.rfind(':');
    return colon == std::string::npos ? listen : listen.substr(0, colon);
}

int ServiceConfig::port() const {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) return 8080;
    const auto p = parse_uint<unsigned>(std::string_view(listen).substr(colon + 1));
    if (!p || *p > 65535) throw std::runtime_error("invalid port in listen: " + listen);
    return static_cast<int>(*p);
}

ServiceConfig parse_config(std::string_view text) {
    ServiceConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "listen") {
            cfg.listen = value;
        } else if (key == "data_dir") {
            cfg.data_dir = value;
        } else if (key == "command_ttl_s") {
            const auto ttl = parse_uint<std::uint64_t>(value);
            if (!ttl) throw std::runtime_error("config line " + std::to_string(line_no) + ": bad command_ttl_s");
            cfg.command_ttl_s = *ttl;
        } else if (key == "auth_token") {
            cfg.auth_token = value;
        } else {
            throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    cfg.port();  // validates
    return cfg;
}

ServiceConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------

IngestService::IngestService(Store& store, const Clock& clock, std::uint64_t command_ttl_s, std::string auth_token)
    : store_(store), clock_(clock), default_ttl_s_(command_ttl_s), auth_token_(std::move(auth_token)) {}

Response IngestService::dispatch(const Request& request) {
    try {
        if (!auth_token_.empty()) {
            const auto it = request.headers.find(kAuthHeader);
            if (it == request.headers.end() || it->second != auth_token_) return text(401, "ERR AUTH");
        }
        const auto& path = request.path;
        const bool is_get = request.method == "GET";
        const auto& p = request.params;

        if (path == "/commands/enqueue") {
            if (!is_get && request.method != "POST") return text(405, "ERR METHOD");
            return handle_enqueue_command(p);
        }
        const bool known = path == "/zapis_danni" || path == "/danni" || path == "/latest" ||
                           path == "/commands/poll" || path == "/commands/ack" || path == "/stations";
        if (!known) return text(404, "ERR NOT_FOUND");
        if (!is_get) return text(405, "ERR METHOD");

        if (path == "/zapis_danni") {
            const auto* data = find_param(p, "data");
            return handle_record(data ? std::optional<std::string>(*data) : std::nullopt);
        }
        if (path == "/danni") return handle_query(p);
        if (path == "/latest") return handle_latest(p);
        if (path == "/commands/poll") return handle_poll_commands(p);
        if (path == "/commands/ack") return handle_ack(p);
        return handle_stations();
    } catch (const std::exception&) {
        return text(500, "ERR INTERNAL");
    }
}

Response IngestService::handle_record(const std::optional<std::string>& raw) {
    if (!raw) return text(400, "ERR data");
    const auto frame = decode_frame(*raw);
    if (!frame) return text(400, "ERR " + std::string(field_name(frame.error().field)));
    const auto outcome = store_.append(*frame, clock_.now_seconds());
    if (!outcome) return text(500, "ERR STORAGE");
    return text(200, *outcome == AppendOutcome::Appended ? "OK" : "DUP");
}

Response IngestService::handle_query(const Params& params) {
    const auto station = station_param(params);
    if (!station) return text(400, "ERR station");

    std::uint64_t from = 0;
    std::uint64_t to = std::numeric_limits<std::uint64_t>::max();
    std::size_t limit = kDefaultQueryLimit;
    if (const auto* s = find_param(params, "from")) {
        const auto v = parse_uint<std::uint64_t>(*s);
        if (!v) return text(400, "ERR from");
        from = *v;
    }
    if (const auto* s = find_param(params, "to")) {
        const auto v = parse_uint<std::uint64_t>(*s);
        if (!v) return text(400, "ERR to");
        to = *v;
    }
    if (const auto* s = find_param(params, "limit")) {
        const auto v = parse_uint<std::size_t>(*s);
        if (!v || *v == 0) return text(400, "ERR limit");
        limit = *v;
    }
    if (from > to) return text(400, "ERR RANGE");

    const auto records = store_.query_range(*station, from, to, limit);
    if (!records) {
        if (records.error() == QueryError::UnknownStation) return text(404, "ERR UNKNOWN_STATION");
        return text(400, "ERR RANGE");
    }
    json out = json::array();
    for (const auto& r : *records) out.push_back(record_to_json(r));
    return json_response(out);
}

Response IngestService::handle_latest(const Params& params) {
    const auto station = station_param(params);
    if (!station) return text(400, "ERR station");
    const auto rec = store_.latest(*station);
    if (!rec) return text(404, "ERR UNKNOWN_STATION");
    return json_response(record_to_json(*rec));
}

Response IngestService::handle_enqueue_command(const Params& params) {
    const auto station = station_param(params);
    if (!station) return text(400, "ERR station");
    auto kind = parse_kind(params);
    if (const auto* bad = std::get_if<std::string>(&kind)) return text(400, "ERR " + *bad);
    const auto cmd = enqueue(*station, std::get<CommandKind>(kind));
    return json_response(json{{"id", cmd.id}, {"state", to_string(cmd.state)}});
}

Response IngestService::handle_poll_commands(const Params& params) {
    const auto station = station_param(params);
    if (!station) return text(400, "ERR station");
    json out = json::array();
    for (const auto& cmd : poll(*station)) out.push_back(command_to_json(cmd));
    return json_response(out);
}

Response IngestService::handle_ack(const Params& params) {
    const auto station = station_param(params);
    if (!station) return text(400, "ERR station");
    const auto* id_text = find_param(params, "id");
    const auto id = id_text ? parse_uint<std::uint64_t>(*id_text) : std::nullopt;
    if (!id) return text(400, "ERR id");

    const auto [result, state] = ack(*station, *id);
    switch (result) {
        case AckResult::Acked: return text(200, "OK");
        case AckResult::UnknownCommand: return text(404, "ERR UNKNOWN_COMMAND");
        case AckResult::WrongState: return text(409, "ERR STATE " + std::string(to_string(state)));
    }
    return text(500, "ERR INTERNAL");
}

Response IngestService::handle_stations() {
    json out = json::array();
    for (const auto& s : store_.list_stations()) {
        out.push_back(json{{"station", s.station.str()},
                           {"last_received_at", s.last_received_at},
                           {"records", s.record_count},
                           {"pending_commands", pending_count(s.station)}});
    }
    return json_response(out);
}

// ---------------------------------------------------------------------------

void IngestService::expire_locked(Command& cmd, std::uint64_t now) {
    const bool live = cmd.state == CommandState::Pending || cmd.state == CommandState::Delivered;
    if (live && now > cmd.created_at + cmd.ttl_s) cmd.state = CommandState::Expired;
}

Command IngestService::enqueue(const StationId& station, const CommandKind& kind, std::optional<std::uint64_t> ttl_s) {
    std::lock_guard lock(commands_mu_);
    Command cmd{next_id_++, station, kind, clock_.now_seconds(), ttl_s.value_or(default_ttl_s_), CommandState::Pending};
    commands_.emplace(cmd.id, cmd);
    return cmd;
}

std::vector<Command> IngestService::poll(const StationId& station) {
    std::lock_guard lock(commands_mu_);
    const auto now = clock_.now_seconds();
    std::vector<Command> out;
    for (auto& [id, cmd] : commands_) {
        if (cmd.station != station) continue;
        expire_locked(cmd, now);
        if (cmd.state != CommandState::Pending) continue;
        cmd.state = CommandState::Delivered;
        out.push_back(cmd);
    }
    return out;
}

std::pair<AckResult, CommandState> IngestService::ack(const StationId& station, std::uint64_t id) {
    std::lock_guard lock(commands_mu_);
    const auto it = commands_.find(id);
    if (it == commands_.end() || it->second.station != station) return {AckResult::UnknownCommand, CommandState::Pending};
    auto& cmd = it->second;
    expire_locked(cmd, clock_.now_seconds());
    if (cmd.state != CommandState::Delivered) return {AckResult::WrongState, cmd.state};
    cmd.state = CommandState::Acked;
    return {AckResult::Acked, cmd.state};
}

std::optional<Command> IngestService::command(std::uint64_t id) const {
    std::lock_guard lock(commands_mu_);
    const auto it = commands_.find(id);
    if (it == commands_.end()) return std::nullopt;
    return it->second;
}

std::size_t IngestService::pending_count(const StationId& station) const {
    std::lock_guard lock(commands_mu_);
    const auto now = clock_.now_seconds();
    std::size_t n = 0;
    for (const auto& [id, cmd] : commands_) {
        if (cmd.station == station && cmd.state == CommandState::Pending && now <= cmd.created_at + cmd.ttl_s) ++n;
    }
    return n;
}

}  // namespace heatsupply
