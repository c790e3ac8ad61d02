// heatsupply: ingest service, station fleet simulator and M-Bus frame inspector.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "heatsupply/http.hpp"
#include "heatsupply/ingest.hpp"
#include "heatsupply/mbus.hpp"
#include "heatsupply/simulator.hpp"
#include "heatsupply/store.hpp"

using namespace heatsupply;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path, const std::string& listen, const std::string& data_dir) {
    ServiceConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!listen.empty()) cfg.listen = listen;
    if (!data_dir.empty()) cfg.data_dir = data_dir;

    Store store(cfg.data_dir);
    SystemClock clock;
    IngestService service(store, clock, cfg.command_ttl_s, cfg.auth_token);
    HttpServer server(service);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::cerr << "serving on " << cfg.host() << ":" << cfg.port() << ", data in " << cfg.data_dir << '\n';
    if (!server.listen(cfg.host(), cfg.port())) {
        std::cerr << "failed to listen on " << cfg.listen << '\n';
        return 1;
    }
    return 0;
}

struct SimulateArgs {
    std::string server = "http://127.0.0.1:8080";
    std::size_t stations = 1;
    std::string profile = "broadband";
    double push_period = 1.0;
    double poll_period = 5.0;
    double duration = 60.0;
    std::uint64_t seed = 1;
    bool fast_forward = false;
    bool quiet = false;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto profile = sim::link_preset(a.profile);
    if (!profile) {
        std::cerr << "unknown profile '" << a.profile << "'\n";
        return 2;
    }
    HttpTransport transport(a.server);
    sim::FleetOptions options{a.duration, {}};
    if (!a.quiet) options.log = [](const std::string& m) { std::cerr << m << '\n'; };

    sim::FleetSummary summary;
    try {
        const auto fleet = sim::make_fleet(a.stations, *profile, a.push_period, a.poll_period, a.seed);
        if (a.fast_forward) {
            SimClock clock(SystemClock{}.now());
            summary = sim::run_fleet_simulated(fleet, transport, clock, options);
        } else {
            SystemClock clock;
            summary = sim::run_fleet_realtime(fleet, transport, clock, options);
        }
    } catch (const sim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    std::cout << "station  sent  dropped  failed  polls  acked\n";
    for (const auto& [id, s] : summary.stations) {
        std::cout << id.str() << "  " << s.sent << "  " << s.dropped << "  " << s.failed << "  " << s.polls << "  "
                  << s.acked << '\n';
    }
    return 0;
}

int cmd_inspect(const std::string& hex) {
    const auto bytes = mbus::from_hex(hex);
    if (!bytes) {
        std::cerr << "invalid hex input\n";
        return 2;
    }
    std::cout << mbus::inspect(*bytes);
    return mbus::parse_long_frame(*bytes) || (bytes->size() == 1 && (*bytes)[0] == mbus::kAck) ? 0 : 1;
}

int cmd_send_one(const std::string& server, const std::string& data) {
    HttpTransport transport(server);
    const auto reply = transport.get("/zapis_danni", {{"data", data}});
    if (!reply) {
        std::cerr << "request failed: " << reply.error().message << '\n';
        return 1;
    }
    std::cout << reply->status << ' ' << reply->body << '\n';
    return reply->status == 200 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat supply monitoring: ingest service and station simulator"};
    app.require_subcommand(1);

    std::string config_path, listen, data_dir;
    auto* serve = app.add_subcommand("serve", "Run the ingest HTTP service");
    serve->add_option("--config", config_path, "key=value config file");
    serve->add_option("--listen", listen, "host:port (overrides config)");
    serve->add_option("--data-dir", data_dir, "log directory (overrides config)");

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "Run a fleet of simulated heat stations");
    simulate->add_option("--server", sa.server, "ingest service base URL");
    simulate->add_option("--stations", sa.stations, "number of stations")->check(CLI::PositiveNumber);
    simulate->add_option("--profile", sa.profile, "link profile: dialup|radio|gprs|broadband|perfect");
    simulate->add_option("--push-period", sa.push_period, "telemetry period, seconds");
    simulate->add_option("--poll-period", sa.poll_period, "command poll period, seconds");
    simulate->add_option("--duration", sa.duration, "run time, seconds");
    simulate->add_option("--seed", sa.seed, "base RNG seed");
    simulate->add_flag("--fast-forward", sa.fast_forward, "simulated clock instead of wall clock");
    simulate->add_flag("--quiet", sa.quiet, "suppress per-event log");

    std::string hex;
    auto* inspect = app.add_subcommand("inspect-frame", "Parse and dump an M-Bus long frame");
    inspect->add_option("hex", hex, "frame bytes as hex")->required();

    std::string send_server = "http://127.0.0.1:8080", send_data;
    auto* send_one = app.add_subcommand("send-one", "Push one telemetry payload");
    send_one->add_option("--server", send_server, "ingest service base URL");
    send_one->add_option("--data", send_data, "encoded telemetry frame")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) return cmd_serve(config_path, listen, data_dir);
        if (*simulate) return cmd_simulate(sa);
        if (*inspect) return cmd_inspect(hex);
        if (*send_one) return cmd_send_one(send_server, send_data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
