#include "parlvote/api/service.hpp"

#include <httplib.h>

namespace parlvote::api {

struct HttpServer::Impl {
    const ApiService& service;
    httplib::Server server;

    explicit Impl(const ApiService& s) : service(s) {}

    void dispatch(const httplib::Request& req, httplib::Response& res) {
        ApiRequest r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query.emplace(k, v);  // first value wins
        r.body = req.body;
        auto out = service.handle(r);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        if (out.status != 204) res.set_content(out.body.dump(), "application/json");
    }
};

HttpServer::HttpServer(const ApiService& service) : impl_(std::make_unique<Impl>(service)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->dispatch(req, res); };
    auto& s = impl_->server;
    s.set_payload_max_length(1 << 20);
    s.Get(".*", handler);
    s.Post(".*", handler);
    s.Put(".*", handler);
    s.Delete(".*", handler);
    s.Patch(".*", handler);
    s.Options(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace parlvote::api
