#include <string>

#include "citygen/errors.hpp"
#include "citygen/studio.hpp"
#include "httplib.h"

namespace citygen::studio {
namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const char* kind, const std::string& message) {
  reply(res, status, Json{{"error", message}, {"kind", kind}});
}

// Runs fn and maps library errors onto HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Json::exception& e) {
    reply_error(res, 400, "bad_request", e.what());
  } catch (const NotFoundError& e) {
    reply_error(res, 404, "not_found", e.what());
  } catch (const ConflictError& e) {
    reply_error(res, 409, "conflict", e.what());
  } catch (const ValidationError& e) {
    reply_error(res, 422, "validation", e.what());
  } catch (const DomainError& e) {
    reply_error(res, 422, "domain", e.what());
  } catch (const DegenerateInputError& e) {
    reply_error(res, 422, "degenerate_input", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "internal", e.what());
  }
}

Json body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return Json::parse(req.body);
}

template <typename T>
T need(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

void send_png(httplib::Response& res, const std::vector<std::uint8_t>& png) {
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

}  // namespace

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) { routes(); }

  void routes() {
    server.set_payload_max_length(16u << 20);
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, Json{{"status", "ok"}});
    });

    server.Post("/api/layouts", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json b = body(req);
        reply(res, 201,
              service.generate_layout(need<int>(b, "width"), need<int>(b, "height"), b.value("seed", std::uint64_t{0}),
                                      b.value("sampler", std::string())));
      });
    });

    server.Get(R"(/api/projects/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.project_summary(req.matches[1])); });
    });

    server.Get(R"(/api/projects/([\w-]+)/layout/(semantic|height)\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send_png(res, service.layout_png(req.matches[1], req.matches[2])); });
               });

    server.Get(R"(/api/projects/([\w-]+)/instances)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.instances(req.matches[1])); });
    });

    server.Post(R"(/api/projects/([\w-]+)/inpaint)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json b = body(req);
        std::vector<geo::PixelCoord> poly;
        for (const auto& v : need<Json>(b, "polygon")) {
          if (!v.is_array() || v.size() != 2) throw ValidationError("polygon vertices must be [x, y]");
          poly.push_back({v[0].get<double>(), v[1].get<double>()});
        }
        reply(res, 200, service.inpaint(req.matches[1], need<std::uint64_t>(b, "revision"), poly));
      });
    });

    server.Post(R"(/api/projects/([\w-]+)/styles)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const Json b = body(req);
        reply(res, 200,
              service.set_style(req.matches[1], need<std::uint64_t>(b, "revision"), need<std::uint32_t>(b, "instance"),
                                need<std::uint64_t>(b, "seed")));
      });
    });

    server.Post(R"(/api/projects/([\w-]+)/trajectories)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.preview_trajectory(req.matches[1], body(req))); });
    });

    server.Post(R"(/api/projects/([\w-]+)/render)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 202, service.submit_render(req.matches[1], body(req))); });
    });

    server.Get(R"(/api/jobs/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.job_status(req.matches[1])); });
    });

    server.Get(R"(/api/jobs/([\w-]+)/frames/(\d+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_png(res, service.frame_png(req.matches[1], std::stoul(req.matches[2]))); });
    });

    server.Post(R"(/api/jobs/([\w-]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, service.export_job(req.matches[1])); });
    });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

bool HttpServer::listen() {
  const auto& c = impl_->service.config();
  return impl_->server.listen(c.host, c.port);
}

int HttpServer::bind_any() { return impl_->server.bind_to_any_port(impl_->service.config().host); }

void HttpServer::serve_bound() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace citygen::studio
