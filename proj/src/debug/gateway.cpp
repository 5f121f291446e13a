#include "mpx/debug/gateway.hpp"

#include <httplib.h>

#include <json.hpp>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

namespace mpx::debug {

using nlohmann::json;

namespace {

json rank_object(const RankView& v) {
  json threads = json::array();
  for (const auto& [id, t] : v.threads) {
    threads.push_back({{"id", id}, {"state", std::string(to_string(t.state))}, {"frames", t.frames}});
  }
  return {{"rank", v.rank},
          {"size", v.size},
          {"address", v.address},
          {"port", v.port},
          {"connected", v.connected},
          {"exit_code", v.exit_code ? json(*v.exit_code) : json(nullptr)},
          {"breakpoints", v.breakpoints},
          {"threads", threads}};
}

json event_object(const EventRecord& e) {
  return {{"seq", e.seq},   {"ts", e.ts_us},     {"rank", e.rank},
          {"kind", e.kind}, {"args", e.args}, {"origin", e.from_agent ? "agent" : "client"}};
}

json response_object(int rank, const Response& r) {
  return {{"rank", rank}, {"ok", r.ok()}, {"lines", r.lines}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

/// The MDWP line from a {"cmd": ...} body, or an empty string when invalid.
std::string command_from_body(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return {};
  auto it = parsed.find("cmd");
  if (it == parsed.end() || !it->is_string()) return {};
  std::string cmd = it->get<std::string>();
  if (cmd.find_first_of("\r\n") != std::string::npos) return {};
  return std::string(text::trim(cmd));
}

}  // namespace

std::string snapshot_json(const std::vector<RankView>& mirror) {
  json out = json::array();
  for (const auto& v : mirror) out.push_back(rank_object(v));
  return out.dump();
}

std::string event_json(const EventRecord& event) { return event_object(event).dump(); }

Gateway::Gateway(Session& session, GatewayOptions options)
    : session_(session), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {}

Gateway::~Gateway() { stop(); }

void Gateway::routes() {
  auto& srv = *server_;
  srv.Get("/api/ranks", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(snapshot_json(session_.mirror()), "application/json");
  });

  srv.Post(R"(/api/ranks/(\d+)/command)", [this](const httplib::Request& req, httplib::Response& res) {
    auto rank = text::parse_int(req.matches[1].str());
    if (!rank || *rank >= session_.size()) {
      send_json(res, 404, {{"error", "unknown rank"}});
      return;
    }
    std::string cmd = command_from_body(req.body);
    if (cmd.empty()) {
      send_json(res, 400, {{"error", "body must be {\"cmd\": \"<command>\"}"}});
      return;
    }
    int r = static_cast<int>(*rank);
    send_json(res, 200, response_object(r, session_.command(r, cmd)));
  });

  srv.Post("/api/broadcast", [this](const httplib::Request& req, httplib::Response& res) {
    std::string cmd = command_from_body(req.body);
    if (cmd.empty()) {
      send_json(res, 400, {{"error", "body must be {\"cmd\": \"<command>\"}"}});
      return;
    }
    json responses = json::array();
    for (const auto& [r, reply] : session_.broadcast(cmd)) responses.push_back(response_object(r, reply));
    send_json(res, 200, {{"responses", responses}});
  });

  srv.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
    auto cursor = std::make_shared<std::uint64_t>(0);
    if (req.has_param("since")) {
      auto since = text::parse_int(req.get_param_value("since"));
      if (!since || *since < 0) {
        send_json(res, 400, {{"error", "since must be a non-negative integer"}});
        return;
      }
      *cursor = static_cast<std::uint64_t>(*since);
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
      if (stopping_.load()) return false;
      auto batch = session_.events_since(*cursor, std::chrono::milliseconds(200));
      std::string out;
      for (const auto& e : batch) {
        out += "id: " + std::to_string(e.seq) + "\ndata: " + event_json(e) + "\n\n";
        *cursor = e.seq + 1;
      }
      if (out.empty()) out = ": keepalive\n\n";
      return sink.write(out.data(), out.size());
    });
  });

  if (!options_.static_dir.empty() && !srv.set_mount_point("/", options_.static_dir)) {
    fail(ErrorKind::gateway, "cannot serve static files from " + options_.static_dir);
  }
}

void Gateway::start() {
  routes();
  // SO_REUSEPORT (the library default) would let a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
    if (port_ <= 0) fail(ErrorKind::gateway, "cannot bind " + options_.host);
  } else {
    if (!server_->bind_to_port(options_.host, options_.port)) {
      fail(ErrorKind::gateway, "port " + std::to_string(options_.port) + " is busy on " + options_.host);
    }
    port_ = options_.port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void Gateway::stop() {
  if (!thread_.joinable()) return;
  stopping_.store(true);
  server_->stop();
  thread_.join();
}

}  // namespace mpx::debug
