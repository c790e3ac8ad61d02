#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include "heatsupply/clock.hpp"
#include "heatsupply/http.hpp"
#include "heatsupply/ingest.hpp"
#include "heatsupply/mbus.hpp"
#include "heatsupply/telemetry.hpp"

namespace heatsupply::sim {

// ---------------------------------------------------------------------------
// Transport link model

struct LinkProfile {
    std::string name;
    double bitrate_bps = 1e9;
    double latency_s = 0.0;
    double drop_probability = 0.0;

    bool valid() const noexcept {
        return bitrate_bps > 0 && latency_s >= 0 && drop_probability >= 0 && drop_probability < 1;
    }
};

/// Built-in presets: dialup, radio, gprs, broadband, perfect.
std::optional<LinkProfile> link_preset(std::string_view name);
std::vector<std::string> link_preset_names();

struct Delivered {
    double duration_s;
};
struct Dropped {};
using TransferOutcome = std::variant<Delivered, Dropped>;

/// Uniform draw in [0, 1) from the top 53 bits of one engine output.
double unit_draw(std::mt19937_64& rng) noexcept;

/// Drop with probability drop_probability, otherwise latency + 8 * bytes / bitrate.
/// Consumes exactly one engine output per call.
TransferOutcome simulate_transfer(std::size_t payload_bytes, const LinkProfile& profile, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Plant

struct StationConfig {
    StationId id;
    double push_period_s = 1.0;
    double poll_period_s = 5.0;
    LinkProfile link = *link_preset("perfect");
    Temperature ambient = *Temperature::from_tenths(150);
    std::array<Temperature, kChannels> setpoints = filled(*Temperature::from_tenths(550));
    double rate_k = 0.05;
    double hysteresis = 1.0;
    OperatingMode initial_mode = OperatingMode::Auto;
    std::uint64_t seed = 0;
    std::uint8_t meter_address = 1;

    explicit StationConfig(StationId station) : id(std::move(station)) {}

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    static std::array<Temperature, kChannels> filled(Temperature t) {
        std::array<Temperature, kChannels> out;
        out.fill(t);
        return out;
    }
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Channel temperatures are kept at full precision (degrees C) and only
/// quantized to tenths when reported.
struct PlantState {
    std::array<double, kChannels> temps_c{};
    std::array<PumpState, kChannels> pumps{};
    OperatingMode mode = OperatingMode::Auto;
    std::uint32_t seq = 1;
    double sim_time = 0.0;
    double pump_on_seconds = 0.0;  // summed over channels, feeds the heat meter

    static PlantState initial(const StationConfig& config);
    std::array<Temperature, kChannels> reported_temps() const;
};

inline constexpr double kMinCelsius = Temperature::kMinTenths / 10.0;
inline constexpr double kMaxCelsius = Temperature::kMaxTenths / 10.0;

/// One forward-Euler step of the first-order channel model.
PlantState step_plant(const PlantState& state, const StationConfig& config, double dt);

// ---------------------------------------------------------------------------
// Local M-Bus meter link

inline constexpr double kEnergyPerPumpSecondWh = 2.0;

/// Heat meter reading derived from the plant: flow = channel 0,
/// return = channel 1, energy from accumulated pump-on time.
mbus::MeterReading meter_reading(const PlantState& state);

struct LinkError {
    std::string message;
};

/// In-memory byte channel between the station gateway and its meter.
/// The tamper hooks let tests corrupt either direction.
struct MeterLink {
    std::uint8_t address = 1;
    std::function<void(mbus::Bytes&)> tamper_request;
    std::function<void(mbus::Bytes&)> tamper_reply;
};

/// Meter side: answers a REQ_UD2 long frame addressed to it; empty on
/// anything it does not understand.
mbus::Bytes meter_respond(std::span<const std::uint8_t> request, std::uint8_t address, const PlantState& state);

Result<mbus::MeterReading, LinkError> meter_exchange(const PlantState& state, const MeterLink& link);

// ---------------------------------------------------------------------------
// Station

struct StationStats {
    std::uint64_t sent = 0;     // pushes answered 200
    std::uint64_t dropped = 0;  // lost on the link model
    std::uint64_t failed = 0;   // transport errors or non-200
    std::uint64_t polls = 0;
    std::uint64_t applied = 0;  // commands that changed station state
    std::uint64_t acked = 0;
    std::uint64_t meter_errors = 0;

    friend bool operator==(const StationStats&, const StationStats&) = default;
};

using LogSink = std::function<void(const std::string&)>;

/// Telemetry frame prepared for sending together with its link outcome.
struct PendingPush {
    std::string payload;
    std::uint32_t seq;
    TransferOutcome outcome;
};

/// One simulated heat station. Push and poll activities may run on
/// different threads; plant state is serialized by an internal mutex and
/// the mutex is never held across network calls.
class Station {
public:
    Station(StationConfig config, Transport& transport, const Clock& clock, LogSink log = {});

    /// Advances the plant by one push period, reads the meter and builds
    /// the frame for the current seq, then rolls the link model.
    PendingPush prepare_push();
    /// Sends a prepared push (unless dropped); seq advances on a 200.
    void complete_push(const PendingPush& push);
    /// prepare + (real-time) transfer delay + complete.
    void push_once(std::stop_token stop = {});

    /// Fetches pending commands, applies them in id order and acks each.
    void poll_commands();

    /// Applies one command. Returns false if it did not apply in the
    /// current mode (SetPump outside MANUAL).
    bool apply(const CommandKind& kind);

    const StationConfig& config() const noexcept { return config_; }
    PlantState state() const;
    StationStats stats() const;
    std::optional<mbus::MeterReading> last_meter_reading() const;
    MeterLink& meter_link() noexcept { return meter_link_; }

private:
    void log(const std::string& message) const;

    StationConfig config_;
    Transport& transport_;
    const Clock& clock_;
    LogSink log_;
    MeterLink meter_link_;

    mutable std::mutex mu_;
    PlantState state_;
    StationStats stats_;
    std::mt19937_64 rng_;
    std::optional<mbus::MeterReading> last_reading_;
};

/// Real-time: push and poll loops on two threads until `stop` is requested.
void run_station(Station& station, std::stop_token stop);

// ---------------------------------------------------------------------------
// Fleet

struct FleetSummary {
    std::vector<std::pair<StationId, StationStats>> stations;
};

struct ScheduledAction {
    double at_s;  // offset from the start of the run
    std::function<void()> run;
};

struct FleetOptions {
    double duration_s = 60.0;
    LogSink log;
    // Simulated runs only: executed before any station event at the same time.
    std::vector<ScheduledAction> actions;
};

/// Discrete-event run under a simulated clock. All station activity is
/// sequenced on the calling thread in (time, action-poll-push-deliver,
/// station) order, so identical configs and seeds give identical request
/// streams.
/// Throws ConfigError on invalid configs or duplicate ids.
FleetSummary run_fleet_simulated(const std::vector<StationConfig>& configs, Transport& transport, SimClock& clock,
                                 const FleetOptions& options);

/// Wall-clock run: every station runs its two loops on its own threads.
FleetSummary run_fleet_realtime(const std::vector<StationConfig>& configs, Transport& transport, const Clock& clock,
                                const FleetOptions& options);

/// `n` stations ST01..STnn sharing profile and periods; seeds base+i.
std::vector<StationConfig> make_fleet(std::size_t n, const LinkProfile& profile, double push_period_s,
                                      double poll_period_s, std::uint64_t base_seed);

}  // namespace heatsupply::sim
