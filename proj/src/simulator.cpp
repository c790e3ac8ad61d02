#include "heatsupply/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <queue>
#include <set>
#include <thread>

#include <json.hpp>

namespace heatsupply::sim {

// ---------------------------------------------------------------------------
// Link model

std::optional<LinkProfile> link_preset(std::string_view name) {
    if (name == "dialup") return LinkProfile{"dialup", 56000.0, 0.5, 0.02};
    if (name == "radio") return LinkProfile{"radio", 9600.0, 0.3, 0.05};
    if (name == "gprs") return LinkProfile{"gprs", 40000.0, 0.7, 0.03};
    if (name == "broadband") return LinkProfile{"broadband", 1e7, 0.02, 0.001};
    if (name == "perfect") return LinkProfile{"perfect", 1e9, 0.0, 0.0};
    return std::nullopt;
}

std::vector<std::string> link_preset_names() { return {"dialup", "radio", "gprs", "broadband", "perfect"}; }

double unit_draw(std::mt19937_64& rng) noexcept { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

TransferOutcome simulate_transfer(std::size_t payload_bytes, const LinkProfile& profile, std::mt19937_64& rng) {
    if (unit_draw(rng) < profile.drop_probability) return Dropped{};
    return Delivered{profile.latency_s + static_cast<double>(payload_bytes) * 8.0 / profile.bitrate_bps};
}

// ---------------------------------------------------------------------------
// Plant

void StationConfig::validate() const {
    if (!(push_period_s > 0)) throw ConfigError("push_period must be > 0");
    if (!(poll_period_s > 0)) throw ConfigError("poll_period must be > 0");
    if (!(rate_k > 0)) throw ConfigError("rate_k must be > 0");
    if (!(hysteresis > 0)) throw ConfigError("hysteresis must be > 0");
    if (!link.valid()) throw ConfigError("invalid link profile '" + link.name + "'");
}

PlantState PlantState::initial(const StationConfig& config) {
    PlantState s;
    s.temps_c.fill(config.ambient.celsius());
    s.pumps.fill(PumpState::Off);
    s.mode = config.initial_mode;
    return s;
}

std::array<Temperature, kChannels> PlantState::reported_temps() const {
    std::array<Temperature, kChannels> out;
    for (std::size_t i = 0; i < kChannels; ++i) out[i] = Temperature::clamped(temps_c[i]);
    return out;
}

PlantState step_plant(const PlantState& state, const StationConfig& config, double dt) {
    PlantState next = state;
    for (std::size_t i = 0; i < kChannels; ++i) {
        const double setpoint = config.setpoints[i].celsius();
        switch (next.mode) {
            case OperatingMode::Off:
                next.pumps[i] = PumpState::Off;
                break;
            case OperatingMode::Auto:
                if (next.temps_c[i] < setpoint - config.hysteresis) {
                    next.pumps[i] = PumpState::On;
                } else if (next.temps_c[i] > setpoint + config.hysteresis) {
                    next.pumps[i] = PumpState::Off;
                }
                break;
            case OperatingMode::Manual:
                break;
        }
        const bool on = next.pumps[i] == PumpState::On;
        const double target = on ? setpoint : config.ambient.celsius();
        const double t = next.temps_c[i] + config.rate_k * (target - next.temps_c[i]) * dt;
        next.temps_c[i] = std::clamp(t, kMinCelsius, kMaxCelsius);
        if (on) next.pump_on_seconds += dt;
    }
    next.sim_time += dt;
    return next;
}

// ---------------------------------------------------------------------------
// Meter link

mbus::MeterReading meter_reading(const PlantState& state) {
    const double wh = std::round(state.pump_on_seconds * kEnergyPerPumpSecondWh);
    const double capped = std::min(wh, static_cast<double>(std::numeric_limits<std::uint32_t>::max()));
    const auto temps = state.reported_temps();
    return {static_cast<std::uint32_t>(capped), temps[0], temps[1]};
}

mbus::Bytes meter_respond(std::span<const std::uint8_t> request, std::uint8_t address, const PlantState& state) {
    const auto req = mbus::parse_long_frame(request);
    if (!req || req->c_field != mbus::kCtrlReqUd2 || req->a_field != address || req->ci_field != mbus::kCiRequest)
        return {};
    return mbus::build_long_frame(
        {mbus::kCtrlRspUd, address, mbus::kCiMeterReading, mbus::encode_meter_payload(meter_reading(state))});
}

Result<mbus::MeterReading, LinkError> meter_exchange(const PlantState& state, const MeterLink& link) {
    auto request = mbus::build_long_frame({mbus::kCtrlReqUd2, link.address, mbus::kCiRequest, {}});
    if (link.tamper_request) link.tamper_request(request);

    auto reply = meter_respond(request, link.address, state);
    if (link.tamper_reply) link.tamper_reply(reply);
    if (reply.empty()) return LinkError{"meter did not answer"};

    const auto frame = mbus::parse_long_frame(reply);
    if (!frame) {
        return LinkError{"reply " + std::string(mbus::to_string(frame.error().kind)) + " at offset " +
                         std::to_string(frame.error().offset)};
    }
    if (frame->a_field != link.address || frame->ci_field != mbus::kCiMeterReading)
        return LinkError{"unexpected reply header"};
    const auto reading = mbus::decode_meter_payload(frame->user_data);
    if (!reading) return LinkError{"bad meter payload"};
    return *reading;
}

// ---------------------------------------------------------------------------
// Station

Station::Station(StationConfig config, Transport& transport, const Clock& clock, LogSink log)
    : config_(std::move(config)),
      transport_(transport),
      clock_(clock),
      log_(std::move(log)),
      state_(PlantState::initial(config_)),
      rng_(config_.seed) {
    config_.validate();
    meter_link_.address = config_.meter_address;
}

void Station::log(const std::string& message) const {
    if (log_) log_("[" + config_.id.str() + "] " + message);
}

PlantState Station::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

StationStats Station::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::optional<mbus::MeterReading> Station::last_meter_reading() const {
    std::lock_guard lock(mu_);
    return last_reading_;
}

PendingPush Station::prepare_push() {
    std::lock_guard lock(mu_);
    state_ = step_plant(state_, config_, config_.push_period_s);

    if (auto reading = meter_exchange(state_, meter_link_)) {
        last_reading_ = *reading;
    } else {
        ++stats_.meter_errors;
        log("meter link: " + reading.error().message);
    }

    TelemetryFrame frame{config_.id, state_.seq, clock_.now_seconds()};
    frame.temps = state_.reported_temps();
    frame.pumps = state_.pumps;
    frame.mode = state_.mode;
    auto payload = encode_frame(frame);
    auto outcome = simulate_transfer(payload.size(), config_.link, rng_);
    return {std::move(payload), frame.seq, outcome};
}

void Station::complete_push(const PendingPush& push) {
    if (std::holds_alternative<Dropped>(push.outcome)) {
        std::lock_guard lock(mu_);
        ++stats_.dropped;
        return;
    }
    const auto reply = transport_.get("/zapis_danni", {{"data", push.payload}});

    std::lock_guard lock(mu_);
    if (!reply) {
        ++stats_.failed;
        log("push seq " + std::to_string(push.seq) + " failed: " + reply.error().message);
        return;
    }
    if (reply->status != 200) {
        ++stats_.failed;
        log("push seq " + std::to_string(push.seq) + " rejected: " + std::to_string(reply->status) + " " +
            reply->body);
        return;
    }
    ++stats_.sent;
    if (state_.seq == push.seq) ++state_.seq;
}

void Station::push_once(std::stop_token stop) {
    const auto push = prepare_push();
    if (const auto* d = std::get_if<Delivered>(&push.outcome); d && d->duration_s > 0) {
        std::mutex m;
        std::condition_variable_any cv;
        std::unique_lock lock(m);
        cv.wait_for(lock, stop, std::chrono::duration<double>(d->duration_s), [] { return false; });
        if (stop.stop_requested()) return;
    }
    complete_push(push);
}

bool Station::apply(const CommandKind& kind) {
    std::lock_guard lock(mu_);
    return std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, SetMode>) {
                state_.mode = k.mode;
                if (k.mode == OperatingMode::Off) state_.pumps.fill(PumpState::Off);
                return true;
            } else if constexpr (std::is_same_v<K, SetPump>) {
                if (state_.mode != OperatingMode::Manual) return false;
                state_.pumps[k.index] = k.state;
                return true;
            } else {
                config_.setpoints[k.index] = k.value;
                return true;
            }
        },
        kind);
}

void Station::poll_commands() {
    const auto reply = transport_.get("/commands/poll", {{"station", config_.id.str()}});
    {
        std::lock_guard lock(mu_);
        ++stats_.polls;
    }
    if (!reply || reply->status != 200) {
        log("poll failed: " + (reply ? std::to_string(reply->status) : reply.error().message));
        return;
    }
    const auto body = nlohmann::json::parse(reply->body, nullptr, false);
    if (!body.is_array()) {
        log("poll: unexpected body");
        return;
    }

    std::vector<Command> commands;
    for (const auto& item : body) {
        if (auto cmd = command_from_json(item)) commands.push_back(std::move(*cmd));
    }
    std::sort(commands.begin(), commands.end(), [](const Command& a, const Command& b) { return a.id < b.id; });

    for (const auto& cmd : commands) {
        const bool applied = apply(cmd.kind);
        if (!applied) log("command " + std::to_string(cmd.id) + " not applicable in current mode");
        const auto ack = transport_.get("/commands/ack", {{"station", config_.id.str()}, {"id", std::to_string(cmd.id)}});
        std::lock_guard lock(mu_);
        if (applied) ++stats_.applied;
        if (ack && ack->status == 200) {
            ++stats_.acked;
        } else {
            log("ack " + std::to_string(cmd.id) + " failed");
        }
    }
}

namespace {

using std::chrono::duration;
using std::chrono::steady_clock;

// Sleeps until `deadline` or stop; returns false on stop.
bool sleep_until(steady_clock::time_point deadline, std::stop_token stop) {
    std::mutex m;
    std::condition_variable_any cv;
    std::unique_lock lock(m);
    cv.wait_until(lock, stop, deadline, [] { return false; });
    return !stop.stop_requested();
}

template <typename Fn>
void periodic(double period_s, std::stop_token stop, Fn&& fn) {
    const auto start = steady_clock::now();
    for (std::uint64_t k = 1;; ++k) {
        const auto deadline = start + std::chrono::duration_cast<steady_clock::duration>(duration<double>(period_s * k));
        if (!sleep_until(deadline, stop)) return;
        fn();
    }
}

}  // namespace

void run_station(Station& station, std::stop_token stop) {
    std::jthread poller([&station, stop] {
        periodic(station.config().poll_period_s, stop, [&] {
            try {
                station.poll_commands();
            } catch (const std::exception&) {
            }
        });
    });
    periodic(station.config().push_period_s, stop, [&] {
        try {
            station.push_once(stop);
        } catch (const std::exception&) {
        }
    });
}

// ---------------------------------------------------------------------------
// Fleet

namespace {

void check_fleet(const std::vector<StationConfig>& configs) {
    std::set<StationId> seen;
    for (const auto& c : configs) {
        c.validate();
        if (!seen.insert(c.id).second) throw ConfigError("duplicate station id " + c.id.str());
    }
}

FleetSummary summarize(const std::vector<std::unique_ptr<Station>>& stations) {
    FleetSummary out;
    for (const auto& s : stations) out.stations.emplace_back(s->config().id, s->stats());
    return out;
}

enum class EventKind { Action = 0, Poll = 1, Push = 2, Deliver = 3 };

struct Event {
    double time;
    EventKind kind;
    std::size_t station;  // action index for Action events
    std::uint64_t tick;  // k for periodic events
    std::optional<PendingPush> push;
};

struct Later {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.station > b.station;
    }
};

}  // namespace

FleetSummary run_fleet_simulated(const std::vector<StationConfig>& configs, Transport& transport, SimClock& clock,
                                 const FleetOptions& options) {
    check_fleet(configs);
    std::vector<std::unique_ptr<Station>> stations;
    for (const auto& c : configs) stations.push_back(std::make_unique<Station>(c, transport, clock, options.log));

    const double t0 = clock.now();
    const double end = t0 + options.duration_s;
    constexpr double kEps = 1e-9;

    std::priority_queue<Event, std::vector<Event>, Later> queue;
    const auto schedule_tick = [&](EventKind kind, std::size_t i, std::uint64_t k) {
        const auto& cfg = stations[i]->config();
        const double period = kind == EventKind::Poll ? cfg.poll_period_s : cfg.push_period_s;
        const double t = t0 + period * static_cast<double>(k);
        if (t <= end + kEps) queue.push({t, kind, i, k, std::nullopt});
    };
    for (std::size_t i = 0; i < stations.size(); ++i) {
        schedule_tick(EventKind::Poll, i, 1);
        schedule_tick(EventKind::Push, i, 1);
    }

    for (std::size_t i = 0; i < options.actions.size(); ++i) {
        const double t = t0 + options.actions[i].at_s;
        if (t <= end + kEps) queue.push({t, EventKind::Action, i, 0, std::nullopt});
    }

    std::vector<bool> in_flight(stations.size(), false);
    while (!queue.empty()) {
        Event ev = queue.top();
        queue.pop();
        clock.set(ev.time);
        if (ev.kind == EventKind::Action) {
            options.actions[ev.station].run();
            continue;
        }
        auto& station = *stations[ev.station];

        switch (ev.kind) {
            case EventKind::Action:
                break;
            case EventKind::Poll:
                station.poll_commands();
                schedule_tick(EventKind::Poll, ev.station, ev.tick + 1);
                break;
            case EventKind::Push: {
                schedule_tick(EventKind::Push, ev.station, ev.tick + 1);
                // The previous frame is still on the wire: this period is skipped.
                if (in_flight[ev.station]) {
                    if (options.log) options.log("[" + station.config().id.str() + "] link busy, skipping period");
                    break;
                }
                auto push = station.prepare_push();
                if (const auto* d = std::get_if<Delivered>(&push.outcome)) {
                    in_flight[ev.station] = true;
                    queue.push({ev.time + d->duration_s, EventKind::Deliver, ev.station, 0, std::move(push)});
                } else {
                    station.complete_push(push);
                }
                break;
            }
            case EventKind::Deliver:
                in_flight[ev.station] = false;
                station.complete_push(*ev.push);
                break;
        }
    }
    if (clock.now() < end) clock.set(end);
    return summarize(stations);
}

FleetSummary run_fleet_realtime(const std::vector<StationConfig>& configs, Transport& transport, const Clock& clock,
                                const FleetOptions& options) {
    check_fleet(configs);
    std::vector<std::unique_ptr<Station>> stations;
    for (const auto& c : configs) stations.push_back(std::make_unique<Station>(c, transport, clock, options.log));

    std::stop_source stop;
    {
        std::vector<std::jthread> threads;
        for (auto& s : stations) {
            threads.emplace_back([&station = *s, token = stop.get_token()] { run_station(station, token); });
        }
        sleep_until(steady_clock::now() + std::chrono::duration_cast<steady_clock::duration>(
                                              duration<double>(options.duration_s)),
                    std::stop_token{});
        stop.request_stop();
    }
    return summarize(stations);
}

std::vector<StationConfig> make_fleet(std::size_t n, const LinkProfile& profile, double push_period_s,
                                      double poll_period_s, std::uint64_t base_seed) {
    std::vector<StationConfig> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = std::to_string(i + 1);
        if (name.size() < 2) name.insert(0, 2 - name.size(), '0');
        StationConfig cfg(*StationId::parse("ST" + name));
        cfg.push_period_s = push_period_s;
        cfg.poll_period_s = poll_period_s;
        cfg.link = profile;
        cfg.seed = base_seed + i;
        cfg.meter_address = static_cast<std::uint8_t>(1 + i % 250);
        out.push_back(std::move(cfg));
    }
    return out;
}

}  // namespace heatsupply::sim
