#pragma once

#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "heatsupply/ingest.hpp"
#include "heatsupply/result.hpp"

namespace heatsupply {

/// HTTP/1.1 front end for an IngestService.
class HttpServer {
public:
    explicit HttpServer(IngestService& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port, or nullopt if binding failed.
    std::optional<int> start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct HttpReply {
    int status = 0;
    std::string body;
};

struct TransportError {
    std::string message;
};

/// Client side of the device/operator endpoints: one GET with query params.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Result<HttpReply, TransportError> get(const std::string& path, const Params& params) = 0;
};

/// Talks to a live server, e.g. "http://127.0.0.1:8080". Safe for concurrent use.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(std::string base_url, std::string auth_token = {});
    Result<HttpReply, TransportError> get(const std::string& path, const Params& params) override;

    /// `path?k=v&...` with values percent-encoded.
    static std::string build_target(const std::string& path, const Params& params);

private:
    std::string base_url_;
    std::string auth_token_;
};

/// Calls IngestService::dispatch directly, bypassing sockets.
class LoopbackTransport final : public Transport {
public:
    explicit LoopbackTransport(IngestService& service) : service_(service) {}
    Result<HttpReply, TransportError> get(const std::string& path, const Params& params) override;

private:
    IngestService& service_;
};

}  // namespace heatsupply
