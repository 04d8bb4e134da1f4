#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fingerfab/clock.hpp>

namespace httplib {
class Server;
}

namespace fingerfab {

enum class PrinterPhase { operational, printing, paused, error, offline };

const char* phase_name(PrinterPhase p);
PrinterPhase parse_phase(std::string_view name);

struct JobState {
  PrinterPhase phase = PrinterPhase::operational;
  double progress = 0.0;
  std::optional<double> seconds_remaining;
  std::optional<std::string> file_name;

  bool operator==(const JobState&) const = default;
};

struct PrinterEndpoint {
  std::string base_url;  // e.g. "http://127.0.0.1:5000"
  std::string api_key;
  double poll_interval = 1.0;  // seconds, > 0
};

class PrintProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NetworkError : public PrintProtocolError {
 public:
  using PrintProtocolError::PrintProtocolError;
};
class AuthError : public PrintProtocolError {
 public:
  using PrintProtocolError::PrintProtocolError;
};
class BusyError : public PrintProtocolError {
 public:
  using PrintProtocolError::PrintProtocolError;
};
class NotFoundError : public PrintProtocolError {
 public:
  using PrintProtocolError::PrintProtocolError;
};
class ServerError : public PrintProtocolError {
 public:
  ServerError(const std::string& what, int status) : PrintProtocolError(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};
class PollTimeout : public PrintProtocolError {
 public:
  using PrintProtocolError::PrintProtocolError;
};

struct UploadReceipt {
  std::string name;
  std::size_t size = 0;
  bool overwritten = false;
};

struct StartReceipt {
  std::string name;
  double started_at = 0.0;  // server clock
};

/// What the coordinator needs from a printer. Implemented by the HTTP client
/// and directly by the in-process simulated printer.
class PrintService {
 public:
  virtual ~PrintService() = default;
  virtual UploadReceipt upload_gcode(const std::string& name, const std::string& body) = 0;
  virtual StartReceipt start_job(const std::string& name) = 0;
  virtual JobState get_job_state() = 0;
  /// Aborts a running job or clears the error phase.
  virtual void cancel_job() = 0;
  virtual std::vector<std::string> list_files() = 0;
};

// ---------------------------------------------------------------------------
// Simulated printer

struct FaultSpec {
  std::string file;          // exact name or prefix
  double at_progress = 0.5;  // in (0, 1)
};

struct MockPrinterConfig {
  std::map<std::string, double> durations{{"key", 337.0}, {"ethernet", 676.0}, {"battery", 592.0}};
  double default_duration = 600.0;
  std::vector<FaultSpec> faults;
};

/// Per-file lookup: exact key, else the longest key that prefixes the name.
template <typename T>
const T* match_by_prefix(const std::map<std::string, T>& table, const std::string& name) {
  if (auto it = table.find(name); it != table.end()) return &it->second;
  const T* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [key, value] : table) {
    if (name.compare(0, key.size(), key) == 0 && key.size() >= best_len) {
      best = &value;
      best_len = key.size();
    }
  }
  return best;
}

/// Printer state machine operational -> printing -> operational | error.
/// State is evaluated lazily from the clock, so progress is a pure function
/// of elapsed time. Thread-safe.
class MockPrinter final : public PrintService {
 public:
  MockPrinter(MockPrinterConfig config, Clock& clock);

  UploadReceipt upload_gcode(const std::string& name, const std::string& body) override;
  StartReceipt start_job(const std::string& name) override;
  JobState get_job_state() override;
  void cancel_job() override;
  std::vector<std::string> list_files() override;

  std::optional<std::string> file_body(const std::string& name) const;
  double duration_for(const std::string& name) const;

 private:
  struct Job {
    std::string file;
    double start;
    double duration;
    std::optional<double> fail_at;
  };
  JobState evaluate_locked();

  MockPrinterConfig config_;
  Clock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> files_;
  std::optional<Job> job_;
  JobState last_;
};

/// HTTP front end for a MockPrinter, speaking the same REST subset as
/// PrintClient. Requests must carry a matching X-Api-Key header.
class MockPrinterServer {
 public:
  /// Binds immediately (port 0 picks a free port) and serves on a background
  /// thread. Throws PrintProtocolError if the port cannot be bound.
  MockPrinterServer(MockPrinterConfig config, Clock& clock, std::string api_key, int port = 0,
                    std::string host = "127.0.0.1");
  ~MockPrinterServer();
  MockPrinterServer(const MockPrinterServer&) = delete;
  MockPrinterServer& operator=(const MockPrinterServer&) = delete;

  int port() const { return port_; }
  std::string base_url() const;
  MockPrinter& printer() { return printer_; }

  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  void install_routes();

  MockPrinter printer_;
  std::string api_key_;
  std::string host_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// ---------------------------------------------------------------------------
// Client

struct RetryPolicy {
  int retries = 3;
  double backoff = 1.0;  // seconds, on the injected clock
};

class PrintClient final : public PrintService {
 public:
  PrintClient(PrinterEndpoint endpoint, Clock& clock, RetryPolicy retry = {});

  UploadReceipt upload_gcode(const std::string& name, const std::string& body) override;
  StartReceipt start_job(const std::string& name) override;
  JobState get_job_state() override;
  void cancel_job() override;
  std::vector<std::string> list_files() override;

  std::string download(const std::string& name);

  /// Polls every poll_interval until the phase leaves printing. Throws
  /// PollTimeout once `timeout` seconds of clock time have passed.
  JobState await_completion(double timeout = 24 * 3600.0);

  const PrinterEndpoint& endpoint() const { return endpoint_; }

 private:
  struct Response {
    int status;
    std::string body;
  };
  template <typename Fn>
  Response with_retries(const char* what, Fn&& fn);
  void raise_for_status(const Response& r, const std::string& what);

  PrinterEndpoint endpoint_;
  Clock& clock_;
  RetryPolicy retry_;
};

/// Polling loop usable with any PrintService.
JobState await_completion(PrintService& service, Clock& clock, double poll_interval,
                          double timeout = 24 * 3600.0);

}  // namespace fingerfab
