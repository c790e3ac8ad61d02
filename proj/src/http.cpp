#include "heatsupply/http.hpp"

#include <httplib.h>

namespace heatsupply {

struct HttpServer::Impl {
    IngestService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(IngestService& s) : service(s) {}
};

namespace {

Request to_request(const httplib::Request& req) {
    Request out;
    out.method = req.method;
    out.path = req.path;
    // First occurrence wins for repeated keys.
    for (const auto& [k, v] : req.params) out.params.emplace(k, v);
    if (req.has_header(IngestService::kAuthHeader))
        out.headers[IngestService::kAuthHeader] = req.get_header_value(IngestService::kAuthHeader);
    return out;
}

}  // namespace

HttpServer::HttpServer(IngestService& service) : impl_(std::make_unique<Impl>(service)) {
    const auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        const auto out = impl_->service.dispatch(to_request(req));
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    auto& srv = impl_->server;
    srv.Get(R"(/.*)", handler);
    srv.Post(R"(/.*)", handler);
    srv.Put(R"(/.*)", handler);
    srv.Delete(R"(/.*)", handler);
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        res.status = 500;
        res.set_content("ERR INTERNAL", "text/plain");
    });
}

HttpServer::~HttpServer() { stop(); }

std::optional<int> HttpServer::start(const std::string& host, int port) {
    auto& srv = impl_->server;
    int bound = port;
    if (port == 0) {
        bound = srv.bind_to_any_port(host);
    } else if (!srv.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) return std::nullopt;
    impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

HttpTransport::HttpTransport(std::string base_url, std::string auth_token)
    : base_url_(std::move(base_url)), auth_token_(std::move(auth_token)) {}

std::string HttpTransport::build_target(const std::string& path, const Params& params) {
    std::string target = path;
    char sep = '?';
    for (const auto& [k, v] : params) {
        target += sep;
        target += httplib::detail::encode_query_param(k);
        target += '=';
        target += httplib::detail::encode_query_param(v);
        sep = '&';
    }
    return target;
}

Result<HttpReply, TransportError> HttpTransport::get(const std::string& path, const Params& params) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(5, 0);
    httplib::Headers headers;
    if (!auth_token_.empty()) headers.emplace(IngestService::kAuthHeader, auth_token_);
    const auto res = client.Get(build_target(path, params), headers);
    if (!res) return TransportError{httplib::to_string(res.error())};
    return HttpReply{res->status, res->body};
}

Result<HttpReply, TransportError> LoopbackTransport::get(const std::string& path, const Params& params) {
    const auto res = service_.dispatch(Request{"GET", path, params, {}});
    return HttpReply{res.status, res.body};
}

}  // namespace heatsupply
