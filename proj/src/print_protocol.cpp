#include <fingerfab/print_protocol.hpp>

#include <algorithm>

#include <httplib.h>
#include <json.hpp>

namespace fingerfab {

using nlohmann::json;

const char* phase_name(PrinterPhase p) {
  switch (p) {
    case PrinterPhase::operational:
      return "operational";
    case PrinterPhase::printing:
      return "printing";
    case PrinterPhase::paused:
      return "paused";
    case PrinterPhase::error:
      return "error";
    case PrinterPhase::offline:
      return "offline";
  }
  return "offline";
}

PrinterPhase parse_phase(std::string_view name) {
  for (auto p : {PrinterPhase::operational, PrinterPhase::printing, PrinterPhase::paused,
                 PrinterPhase::error, PrinterPhase::offline}) {
    if (name == phase_name(p)) return p;
  }
  throw PrintProtocolError("unknown printer phase '" + std::string(name) + "'");
}

namespace {

json state_to_json(const JobState& s) {
  json j;
  j["phase"] = phase_name(s.phase);
  j["progress"] = s.progress;
  j["seconds_remaining"] = s.seconds_remaining ? json(*s.seconds_remaining) : json(nullptr);
  j["file_name"] = s.file_name ? json(*s.file_name) : json(nullptr);
  return j;
}

JobState state_from_json(const json& j) {
  JobState s;
  s.phase = parse_phase(j.at("phase").get<std::string>());
  s.progress = j.at("progress").get<double>();
  if (j.contains("seconds_remaining") && !j["seconds_remaining"].is_null()) {
    s.seconds_remaining = j["seconds_remaining"].get<double>();
  }
  if (j.contains("file_name") && !j["file_name"].is_null()) {
    s.file_name = j["file_name"].get<std::string>();
  }
  return s;
}

void json_reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error_reply(httplib::Response& res, int status, const std::string& message) {
  json_reply(res, status, json{{"error", message}});
}

}  // namespace

// ---------------------------------------------------------------------------
// MockPrinter

MockPrinter::MockPrinter(MockPrinterConfig config, Clock& clock)
    : config_(std::move(config)), clock_(clock) {
  for (const auto& f : config_.faults) {
    if (!(f.at_progress > 0.0 && f.at_progress < 1.0)) {
      throw std::invalid_argument("fault progress must lie in (0, 1) for '" + f.file + "'");
    }
  }
  for (const auto& [name, d] : config_.durations) {
    if (!(d > 0.0)) throw std::invalid_argument("print duration for '" + name + "' must be > 0");
  }
  if (!(config_.default_duration > 0.0)) throw std::invalid_argument("default duration must be > 0");
}

double MockPrinter::duration_for(const std::string& name) const {
  const double* d = match_by_prefix(config_.durations, name);
  return d ? *d : config_.default_duration;
}

JobState MockPrinter::evaluate_locked() {
  if (!job_) return last_;
  const double elapsed = clock_.now() - job_->start;
  const double frac = std::clamp(elapsed / job_->duration, 0.0, 1.0);
  JobState s;
  s.file_name = job_->file;
  if (job_->fail_at && frac >= *job_->fail_at) {
    s.phase = PrinterPhase::error;
    s.progress = *job_->fail_at;
    job_.reset();
  } else if (frac >= 1.0) {
    s.phase = PrinterPhase::operational;
    s.progress = 1.0;
    s.seconds_remaining = 0.0;
    job_.reset();
  } else {
    s.phase = PrinterPhase::printing;
    s.progress = frac;
    s.seconds_remaining = job_->duration - std::max(elapsed, 0.0);
  }
  last_ = s;
  return s;
}

UploadReceipt MockPrinter::upload_gcode(const std::string& name, const std::string& body) {
  if (name.empty()) throw std::invalid_argument("upload name must not be empty");
  std::lock_guard lock(mu_);
  const bool overwritten = files_.count(name) > 0;
  files_[name] = body;
  return {name, body.size(), overwritten};
}

StartReceipt MockPrinter::start_job(const std::string& name) {
  std::lock_guard lock(mu_);
  if (!files_.count(name)) throw NotFoundError("no such file: " + name);
  const auto state = evaluate_locked();
  if (state.phase != PrinterPhase::operational) {
    throw BusyError(std::string("printer is ") + phase_name(state.phase));
  }
  Job job{name, clock_.now(), duration_for(name), std::nullopt};
  const FaultSpec* best = nullptr;
  for (const auto& f : config_.faults) {
    if (name.compare(0, f.file.size(), f.file) == 0 && (!best || f.file.size() > best->file.size())) {
      best = &f;
    }
  }
  if (best) job.fail_at = best->at_progress;
  job_ = job;
  last_ = JobState{PrinterPhase::printing, 0.0, job.duration, name};
  return {name, job.start};
}

JobState MockPrinter::get_job_state() {
  std::lock_guard lock(mu_);
  return evaluate_locked();
}

void MockPrinter::cancel_job() {
  std::lock_guard lock(mu_);
  evaluate_locked();
  job_.reset();
  last_ = JobState{};
}

std::vector<std::string> MockPrinter::list_files() {
  std::lock_guard lock(mu_);
  std::vector<std::string> names;
  for (const auto& [name, body] : files_) names.push_back(name);
  return names;
}

std::optional<std::string> MockPrinter::file_body(const std::string& name) const {
  std::lock_guard lock(mu_);
  if (auto it = files_.find(name); it != files_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// MockPrinterServer

MockPrinterServer::MockPrinterServer(MockPrinterConfig config, Clock& clock, std::string api_key,
                                     int port, std::string host)
    : printer_(std::move(config), clock),
      api_key_(std::move(api_key)),
      host_(std::move(host)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port(host_);
    if (port_ <= 0) throw PrintProtocolError("cannot bind mock printer on " + host_);
  } else {
    if (!server_->bind_to_port(host_, port)) {
      throw PrintProtocolError("cannot bind mock printer on " + host_ + ":" + std::to_string(port) +
                               " (port in use?)");
    }
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockPrinterServer::~MockPrinterServer() { stop(); }

void MockPrinterServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void MockPrinterServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockPrinterServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

void MockPrinterServer::install_routes() {
  auto& srv = *server_;
  srv.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_header("X-Api-Key") || req.get_header_value("X-Api-Key") != api_key_) {
      error_reply(res, 401, "invalid or missing API key");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Get("/api/files", [this](const httplib::Request&, httplib::Response& res) {
    json files = json::array();
    for (const auto& name : printer_.list_files()) {
      files.push_back({{"name", name}, {"size", printer_.file_body(name)->size()}});
    }
    json_reply(res, 200, json{{"files", files}});
  });

  srv.Post("/api/files/local", [this](const httplib::Request& req, httplib::Response& res) {
    std::string name, body;
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) return error_reply(res, 400, "multipart upload needs a 'file' part");
      const auto part = req.get_file_value("file");
      name = part.filename;
      body = part.content;
    } else {
      name = req.get_param_value("name");
      body = req.body;
    }
    if (name.empty()) return error_reply(res, 400, "upload needs a file name");
    const auto receipt = printer_.upload_gcode(name, body);
    json_reply(res, 201,
               json{{"name", receipt.name}, {"size", receipt.size}, {"overwritten", receipt.overwritten}});
  });

  srv.Get(R"(/downloads/files/local/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = printer_.file_body(req.matches[1]);
    if (!body) return error_reply(res, 404, "no such file");
    res.status = 200;
    res.set_content(*body, "text/x.gcode");
  });

  srv.Post("/api/job", [this](const httplib::Request& req, httplib::Response& res) {
    json cmd;
    try {
      cmd = json::parse(req.body);
    } catch (const json::exception&) {
      return error_reply(res, 400, "job command must be JSON");
    }
    const std::string command = cmd.value("command", "");
    try {
      if (command == "start") {
        const auto receipt = printer_.start_job(cmd.value("file", ""));
        json_reply(res, 200, json{{"file_name", receipt.name}, {"started_at", receipt.started_at}});
      } else if (command == "cancel") {
        printer_.cancel_job();
        res.status = 204;
      } else {
        error_reply(res, 400, "unknown job command '" + command + "'");
      }
    } catch (const NotFoundError& e) {
      error_reply(res, 404, e.what());
    } catch (const BusyError& e) {
      error_reply(res, 409, e.what());
    }
  });

  srv.Get("/api/job", [this](const httplib::Request&, httplib::Response& res) {
    json_reply(res, 200, state_to_json(printer_.get_job_state()));
  });
}

// ---------------------------------------------------------------------------
// PrintClient

PrintClient::PrintClient(PrinterEndpoint endpoint, Clock& clock, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), clock_(clock), retry_(retry) {
  if (!(endpoint_.poll_interval > 0.0)) throw std::invalid_argument("poll_interval must be > 0");
}

template <typename Fn>
PrintClient::Response PrintClient::with_retries(const char* what, Fn&& fn) {
  std::string last_error;
  for (int attempt = 0; attempt <= retry_.retries; ++attempt) {
    if (attempt > 0) clock_.sleep_for(retry_.backoff);
    httplib::Client cli(endpoint_.base_url);
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(10, 0);
    cli.set_keep_alive(false);
    const httplib::Headers headers{{"X-Api-Key", endpoint_.api_key}};
    httplib::Result r = fn(cli, headers);
    if (r) return {r->status, r->body};
    last_error = httplib::to_string(r.error());
  }
  throw NetworkError(std::string(what) + " to " + endpoint_.base_url + " failed after " +
                     std::to_string(retry_.retries + 1) + " attempts: " + last_error);
}

void PrintClient::raise_for_status(const Response& r, const std::string& what) {
  if (r.status >= 200 && r.status < 300) return;
  std::string message = what + ": HTTP " + std::to_string(r.status);
  try {
    const auto j = json::parse(r.body);
    if (j.contains("error")) message += " (" + j["error"].get<std::string>() + ")";
  } catch (const json::exception&) {
  }
  switch (r.status) {
    case 401:
    case 403:
      throw AuthError(message);
    case 404:
      throw NotFoundError(message);
    case 409:
      throw BusyError(message);
    default:
      throw ServerError(message, r.status);
  }
}

UploadReceipt PrintClient::upload_gcode(const std::string& name, const std::string& body) {
  if (name.empty()) throw std::invalid_argument("upload name must not be empty");
  const httplib::MultipartFormDataItems items{{"file", body, name, "application/octet-stream"}};
  const auto r = with_retries("upload", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Post("/api/files/local", h, items);
  });
  raise_for_status(r, "upload of " + name);
  const auto j = json::parse(r.body);
  return {j.at("name").get<std::string>(), j.at("size").get<std::size_t>(), j.value("overwritten", false)};
}

StartReceipt PrintClient::start_job(const std::string& name) {
  const auto payload = json{{"command", "start"}, {"file", name}}.dump();
  const auto r = with_retries("start", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Post("/api/job", h, payload, "application/json");
  });
  raise_for_status(r, "start of " + name);
  const auto j = json::parse(r.body);
  return {j.at("file_name").get<std::string>(), j.at("started_at").get<double>()};
}

JobState PrintClient::get_job_state() {
  const auto r = with_retries("job state", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Get("/api/job", h);
  });
  raise_for_status(r, "job state");
  try {
    return state_from_json(json::parse(r.body));
  } catch (const json::exception& e) {
    throw PrintProtocolError(std::string("malformed job state: ") + e.what());
  }
}

void PrintClient::cancel_job() {
  const auto payload = json{{"command", "cancel"}}.dump();
  const auto r = with_retries("cancel", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Post("/api/job", h, payload, "application/json");
  });
  raise_for_status(r, "cancel");
}

std::vector<std::string> PrintClient::list_files() {
  const auto r = with_retries("file list", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Get("/api/files", h);
  });
  raise_for_status(r, "file list");
  const auto j = json::parse(r.body);
  std::vector<std::string> names;
  for (const auto& f : j.at("files")) names.push_back(f.at("name").get<std::string>());
  return names;
}

std::string PrintClient::download(const std::string& name) {
  const auto r = with_retries("download", [&](httplib::Client& cli, const httplib::Headers& h) {
    return cli.Get("/downloads/files/local/" + name, h);
  });
  raise_for_status(r, "download of " + name);
  return r.body;
}

JobState PrintClient::await_completion(double timeout) {
  return fingerfab::await_completion(*this, clock_, endpoint_.poll_interval, timeout);
}

JobState await_completion(PrintService& service, Clock& clock, double poll_interval, double timeout) {
  const double deadline = clock.now() + timeout;
  while (true) {
    const auto state = service.get_job_state();
    if (state.phase != PrinterPhase::printing) return state;
    if (clock.now() + poll_interval > deadline) {
      throw PollTimeout("job still printing after " + std::to_string(timeout) + " s");
    }
    clock.sleep_for(poll_interval);
  }
}

}  // namespace fingerfab
