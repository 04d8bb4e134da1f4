#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fingerfab/cell.hpp>
#include <fingerfab/clock.hpp>
#include <fingerfab/gcode.hpp>
#include <fingerfab/geometry.hpp>
#include <fingerfab/print_protocol.hpp>
#include <fingerfab/robot.hpp>
#include <fingerfab/slicer.hpp>

namespace fingerfab {

enum class Actor { robot_A, printer_A, printer_B, coordinator };

const char* actor_name(Actor a);
Actor parse_actor(std::string_view name);

struct ProductionEvent {
  double time = 0.0;
  Actor actor = Actor::coordinator;
  std::string action;
  std::string subject;

  bool operator==(const ProductionEvent&) const = default;
};

/// One JSON object per line: {"time":..,"actor":..,"action":..,"subject":..}.
std::string to_json_line(const ProductionEvent& e);
ProductionEvent parse_json_line(std::string_view line);
std::string to_json_lines(const std::vector<ProductionEvent>& events);

class ProductionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DesignSpec {
  std::string source;  // where the mesh came from, for diagnostics
  TriangleMesh mesh;   // as designed; rotated once before placement
  Rotation rotation;
  std::string object;  // manipulation object the fingertip is shaped for
};

struct PrinterBinding {
  std::string id;  // e.g. "printer_A"
  Actor actor = Actor::printer_A;
  PrintService* service = nullptr;
  double poll_interval = 1.0;
};

/// Static magazine/printer pairing for a finger pair: finger 1 comes from
/// base_magazine_a and prints on printer_a, finger 2 likewise with _b.
struct PairAssignment {
  std::string printer_a = "printer_A";
  std::string printer_b = "printer_B";
  std::string base_magazine_a = "magazine_A";
  std::string base_magazine_b = "magazine_B";
  std::string qfe_magazine = "qfe_1";
};

struct ProductionSetup {
  std::vector<PrinterBinding> printers;  // exactly two
  std::vector<Magazine> magazines;
  std::map<std::string, DesignSpec> designs;
  PairAssignment assignment;
  SliceConfig slice;
  SafetyRules safety;
  PlacementBox placement{40.0, 20.0};
  FailureModel robot_model;
  int print_retries = 0;
  double print_timeout = 24 * 3600.0;
  std::filesystem::path work_dir;  // scratch files for the external slicer

  void validate() const;
};

struct PairResult {
  FingerRecord first;
  FingerRecord second;
};

struct ReplayVerdict {
  bool ok = true;
  std::string violation;
};

/// Checks time ordering, per-finger milestone order, inventory conservation,
/// device exclusivity and the pair parallelism constraint.
ReplayVerdict replay_log(const std::vector<ProductionEvent>& events);

/// Central coordinator for robot-A, two printers and the magazines. All work
/// runs as a discrete-event simulation on the injected clock; robot skills
/// queue FIFO on the single robot.
class ProductionCell {
 public:
  ProductionCell(ProductionSetup setup, Clock& clock);
  ~ProductionCell();
  ProductionCell(const ProductionCell&) = delete;
  ProductionCell& operator=(const ProductionCell&) = delete;

  /// Throws ProductionError (before any robot or printer action) on an empty
  /// base magazine, a full QFE magazine, unknown ids or a non-operational
  /// printer. Runtime failures return a record with status failed.
  FingerRecord produce_finger(const std::string& design_id, const std::string& printer_id,
                              const std::string& base_magazine, const std::string& qfe_magazine);

  /// Second finger is triggered once the first print has started. Failures
  /// are per finger; one never aborts the other.
  PairResult produce_finger_pair(const std::string& design_a, const std::string& design_b);

  const std::vector<ProductionEvent>& events() const { return events_; }
  const std::vector<FingerRecord>& records() const { return records_; }
  const Magazine& magazine(const std::string& id) const;
  std::map<std::string, Magazine>& magazines() { return magazines_; }
  const ProductionSetup& setup() const { return setup_; }
  std::size_t initial_bases() const { return initial_bases_; }

 private:
  struct Job;
  class Scheduler;

  void log(Actor actor, std::string action, std::string subject);
  void check_preconditions(const std::string& design_id, const std::string& printer_id,
                           const std::string& base_magazine, const std::string& qfe_magazine,
                           bool need_free_slot);
  Job& open_job(const std::string& design_id, const std::string& printer_id,
                const std::string& base_magazine, const std::string& qfe_magazine,
                std::optional<std::size_t> qfe_slot);
  void start_job(Job& job);
  void enqueue_robot(Job& job, std::vector<std::pair<Skill, std::string>> steps,
                     std::function<void(Job&)> on_success);
  void pump_robot();
  void begin_print(Job& job);
  void schedule_poll(Job& job);
  void poll(Job& job);
  void finish_job(Job& job, FingerStatus status, std::string failure = {});
  std::string prepare_gcode(const Job& job) const;
  const PrinterBinding& printer(const std::string& id) const;
  std::size_t reserve_qfe_slot(const std::string& magazine_id);
  void run_until_idle();

  ProductionSetup setup_;
  Clock& clock_;
  Rng robot_rng_;
  std::unique_ptr<Scheduler> scheduler_;
  std::map<std::string, Magazine> magazines_;
  std::set<std::pair<std::string, std::size_t>> reserved_slots_;
  std::vector<std::unique_ptr<Job>> jobs_;
  std::vector<ProductionEvent> events_;
  std::vector<FingerRecord> records_;
  std::size_t initial_bases_ = 0;
  int next_finger_ = 1;

  struct RobotRequest {
    Job* job;
    std::vector<std::pair<Skill, std::string>> steps;
    std::function<void(Job&)> on_success;
  };
  std::vector<RobotRequest> robot_queue_;
  bool robot_busy_ = false;
};

}  // namespace fingerfab
