#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fingerfab/cell.hpp>
#include <fingerfab/geometry.hpp>
#include <fingerfab/qfe.hpp>
#include <fingerfab/robot.hpp>

namespace fingerfab {

enum class ObjectKind { key, ethernet_cable, battery };

inline constexpr ObjectKind kAllObjects[] = {ObjectKind::key, ObjectKind::ethernet_cable,
                                             ObjectKind::battery};

const char* object_name(ObjectKind k);
ObjectKind parse_object(std::string_view name);

struct ManipulationObject {
  ObjectKind kind;
  bool requires_turn;  // only the key is turned in its lock

  static ManipulationObject of(ObjectKind kind) { return {kind, kind == ObjectKind::key}; }
};

enum class OffsetKind { position, rotation };

struct OffsetSpec {
  Axis axis = Axis::x;
  OffsetKind kind = OffsetKind::position;
  double magnitude = 0.0;  // mm or degrees

  /// Positive direction by default; `sign` flips individual axes.
  ApproachOffset to_offset(const Vec3& sign = Vec3::Ones()) const;
  bool operator==(const OffsetSpec&) const = default;
};

inline constexpr std::array<double, 5> kPositionOffsetsMm{1, 2, 3, 4, 5};
inline constexpr std::array<double, 3> kRotationOffsetsDeg{5, 10, 15};
inline constexpr int kExperimentsPerTrial = 28;

/// 3 axes x 5 position magnitudes, then 3 axes x 3 rotation magnitudes.
std::vector<OffsetSpec> generate_offset_grid();

/// Storage and target-slot poses of the test station.
struct TaskLayout {
  std::map<ObjectKind, Pose> storage;
  std::map<ObjectKind, Pose> target;
  std::array<Vec3, 2> push_directions{Vec3::UnitX(), Vec3::UnitY()};
  double push_force_n = 5.0;
  double turn_angle_deg = 90.0;

  static TaskLayout standard();
};

/// Pick from storage, insert into the target slot, (turn, for the key),
/// pick again, insert back into storage.
std::vector<Skill> regular_task_steps(ObjectKind object, const TaskLayout& layout = TaskLayout::standard());

/// Same steps with `offset` applied to every grasp approach (pick) pose.
std::vector<Skill> offset_task_steps(ObjectKind object, const ApproachOffset& offset,
                                     const TaskLayout& layout = TaskLayout::standard());

enum class ExperimentKind { regular, non_regular, grasp_stability, offset };

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::regular;
  ObjectKind finger_type = ObjectKind::key;
  ObjectKind object = ObjectKind::key;
  std::optional<OffsetSpec> offset;
  bool success = false;
  std::vector<SkillResult> transcript;
  std::vector<double> displacement_mm;  // grasp stability, one per push
  std::string detail;

  /// Aggregation key, e.g. "regular", "non_regular:battery",
  /// "offset_position".
  std::string kind_label() const;
};

struct StabilityOptions {
  std::array<double, 2> injected_slip_mm{0.0, 0.0};  // test hook
};

/// Two pushes against the ring with the object already grasped at `grasp`.
/// Success iff neither push moves the end effector by more than 5 mm.
ExperimentResult grasp_stability_experiment(ObjectKind finger_type, ObjectKind object, const Pose& grasp,
                                            const FailureModel& model, Rng& rng,
                                            const TaskLayout& layout = TaskLayout::standard(),
                                            const StabilityOptions& opts = {});

struct TrialReport {
  int trial = 0;
  ObjectKind finger_type = ObjectKind::key;
  bool valid = false;
  bool qfe_attach_success = false;
  bool qfe_detach_success = false;
  std::vector<std::string> fingers;  // ids of the attached pair
  std::vector<ExperimentResult> results;
  std::string notes;

  std::size_t count(ExperimentKind k) const;
};

/// Task-execution unit: QFE magazines holding produced fingers.
struct TaskCell {
  std::vector<Magazine> qfe_magazines;
  std::map<std::string, ObjectKind> finger_types;  // finger id -> type
  TaskLayout layout = TaskLayout::standard();

  /// Total occurrences of every finger id across magazines (conservation check).
  std::map<std::string, int> finger_locations() const;
};

/// Robot-B gripper with its two QFE units.
struct TaskRobot {
  QfeUnitState left;
  QfeUnitState right;
};

struct TrialOptions {
  int trial_index = 0;
  bool fresh_pairs = false;  // take the trial_index-th pair instead of the first
  Vec3 offset_sign = Vec3::Ones();
  std::mutex* magazine_guard = nullptr;
  int qfe_attempts = 3;  // tool-change retries before the trial is invalid
};

/// Steps 1-6 of one trial. Every experiment draws from its own stream
/// derived from (seed, trial, finger type, experiment index).
TrialReport run_trial(ObjectKind finger_type, TaskCell& cell, TaskRobot& robot, const FailureModel& model,
                      std::uint64_t seed, const TrialOptions& opts = {});

struct SuccessRow {
  ObjectKind finger_type;
  std::string experiment_kind;
  std::string axis;       // offsets only
  std::string magnitude;  // offsets only
  int successes = 0;
  int attempts = 0;

  double rate() const { return attempts == 0 ? 0.0 : static_cast<double>(successes) / attempts; }
};

struct SuccessTable {
  std::vector<SuccessRow> rows;

  const SuccessRow* find(ObjectKind type, const std::string& kind, const std::string& axis = {},
                         const std::string& magnitude = {}) const;
};

SuccessTable aggregate(const std::vector<TrialReport>& reports);

struct CampaignOptions {
  bool fresh_pairs = false;
  bool parallel = false;
  Vec3 offset_sign = Vec3::Ones();
};

struct CampaignResult {
  std::vector<TrialReport> reports;
  SuccessTable table;

  std::size_t experiment_count() const;
};

CampaignResult run_campaign(int trials, const std::vector<ObjectKind>& finger_types, TaskCell& cell,
                            const FailureModel& model, std::uint64_t seed, const CampaignOptions& opts = {});

enum class ReportFormat { json, csv };

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string render_csv(const SuccessTable& table);
std::string render_json(const std::vector<TrialReport>& reports, const SuccessTable& table);

/// Throws ReportError on an empty report list or an unwritable destination.
void emit_report(const std::vector<TrialReport>& reports, const SuccessTable& table, ReportFormat format,
                 const std::filesystem::path& out);

}  // namespace fingerfab
