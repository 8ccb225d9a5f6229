#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "airwrite/model/recognize.hpp"
#include "airwrite/training/checkpoint.hpp"
#include "airwrite/trajectory/io.hpp"

namespace airwrite {

inline constexpr int default_service_port = 8790;
inline constexpr std::size_t max_request_points = 10000;
inline constexpr std::size_t default_topk = 5;
inline constexpr std::size_t max_topk = 50;

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

/// Request handling for the recognition endpoints, independent of the HTTP
/// transport. The model is installed once and then only read, so handlers
/// may run concurrently.
class RecognitionService {
 public:
  RecognitionService() = default;

  void install(LoadedCheckpoint checkpoint) {
    auto shared = std::make_shared<const LoadedCheckpoint>(std::move(checkpoint));
    std::lock_guard lock(mutex_);
    model_ = std::move(shared);
  }

  bool ready() const { return snapshot() != nullptr; }

  HttpReply health() const {
    auto ckpt = snapshot();
    if (!ckpt) return {503, {{"status", "loading"}}};
    return {200, {{"status", "ok"}, {"model_version", ckpt->metadata.model_version}}};
  }

  HttpReply labels() const {
    auto ckpt = snapshot();
    if (!ckpt) return unavailable();
    return {200, {{"labels", ckpt->model.labels()}}};
  }

  HttpReply recognize(const std::string& body) const {
    auto ckpt = snapshot();
    if (!ckpt) return unavailable();
    const auto start = std::chrono::steady_clock::now();

    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return client_error(400, "malformed", std::string("body is not JSON: ") + e.what());
    }
    if (!req.is_object() || !req.contains("points") || !req.at("points").is_array()) {
      return client_error(400, "malformed", "body must be an object with a 'points' array");
    }
    if (req.at("points").size() > max_request_points) {
      return client_error(413, "too_large", "at most " + std::to_string(max_request_points) + " points");
    }
    std::size_t topk = default_topk;
    if (req.contains("topk")) {
      const auto& k = req.at("topk");
      if (!k.is_number_integer() || k.get<long long>() < 1 || k.get<long long>() > static_cast<long long>(max_topk)) {
        return client_error(400, "malformed", "topk must be an integer in [1, 50]");
      }
      topk = k.get<std::size_t>();
    }

    std::vector<Candidate> candidates;
    try {
      Trajectory traj;
      traj.points = points_from_json(req.at("points"));
      candidates = airwrite::recognize(ckpt->model, traj, topk);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::too_short: return client_error(400, "too_short", e.what());
        case ErrorKind::non_monotone: return client_error(400, "non_monotone", e.what());
        case ErrorKind::parse: return client_error(400, "malformed", e.what());
        default: return internal_error(e.what());
      }
    } catch (const std::exception& e) {
      return internal_error(e.what());
    }

    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : candidates) out.push_back({{"label", c.label}, {"prob", c.prob}});
    const double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {200, {{"candidates", out}, {"latency_ms", latency}}};
  }

 private:
  std::shared_ptr<const LoadedCheckpoint> snapshot() const {
    std::lock_guard lock(mutex_);
    return model_;
  }

  static HttpReply unavailable() { return {503, {{"error", "model_loading"}, {"message", "model not loaded"}}}; }

  static HttpReply client_error(int status, const std::string& code, const std::string& message) {
    return {status, {{"error", code}, {"message", message}}};
  }

  HttpReply internal_error(const std::string& detail) const {
    std::ostringstream id;
    id << std::hex << std::setw(8) << std::setfill('0') << ++failures_;
    std::cerr << "recognize failure " << id.str() << ": " << detail << '\n';
    return {500, {{"error", "internal"}, {"id", id.str()}}};
  }

  mutable std::mutex mutex_;
  std::shared_ptr<const LoadedCheckpoint> model_;
  mutable std::atomic<unsigned> failures_{0};
};

/// Registers the /api routes, permissive CORS and an optional static mount.
inline void mount_routes(httplib::Server& server, const RecognitionService& service,
                         const std::string& static_dir = {}) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  // Rejected by the handler with a JSON 413 rather than dropped by the transport.
  server.set_payload_max_length(64u << 20);

  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  server.Get("/api/health", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.health());
  });
  server.Get("/api/labels", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.labels());
  });
  server.Post("/api/recognize", [&service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service.recognize(req.body));
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  if (!static_dir.empty()) {
    if (!std::filesystem::is_directory(static_dir) || !server.set_mount_point("/", static_dir)) {
      throw Error(ErrorKind::io, "cannot mount static directory '" + static_dir + "'");
    }
  }
}

struct ServeOptions {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = default_service_port;
  std::string static_dir;
};

/// Binds the port, loads the checkpoint (health answers 503 meanwhile) and
/// serves until the server is stopped. Returns false if the port cannot be
/// bound.
inline bool serve(const ServeOptions& opt, httplib::Server& server, RecognitionService& service) {
  mount_routes(server, service, opt.static_dir);
  if (!server.bind_to_port(opt.host, opt.port)) return false;
  std::exception_ptr load_error;
  std::thread loader([&] {
    server.wait_until_ready();
    try {
      service.install(load_checkpoint(opt.checkpoint));
      std::cerr << "serving " << opt.checkpoint << " on http://" << opt.host << ':' << opt.port << '\n';
    } catch (...) {
      load_error = std::current_exception();
      server.stop();
    }
  });
  server.listen_after_bind();
  loader.join();
  if (load_error) std::rethrow_exception(load_error);
  return true;
}

}  // namespace airwrite
