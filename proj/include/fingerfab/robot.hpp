#pragma once

#include <map>
#include <string>
#include <vector>

#include <fingerfab/geometry.hpp>
#include <fingerfab/rng.hpp>

namespace fingerfab {

struct Pose {
  Vec3 position = Vec3::Zero();
  Rotation orientation;
};

enum class SkillKind { move_to, move_to_contact, pick, place, insert, turn, push };

inline constexpr SkillKind kAllSkillKinds[] = {SkillKind::move_to, SkillKind::move_to_contact,
                                              SkillKind::pick,    SkillKind::place,
                                              SkillKind::insert,  SkillKind::turn,
                                              SkillKind::push};

const char* skill_name(SkillKind k);
SkillKind parse_skill_kind(std::string_view name);

/// Single-axis error injected at a grasp approach pose.
struct ApproachOffset {
  Vec3 position_mm = Vec3::Zero();
  Vec3 rotation_deg = Vec3::Zero();

  bool any() const { return !position_mm.isZero(0.0) || !rotation_deg.isZero(0.0); }
};

struct Skill {
  SkillKind kind = SkillKind::move_to;
  Pose target;
  std::map<std::string, double> parameters;
  ApproachOffset approach_offset;
  std::string label;  // free text for transcripts

  /// push needs "force" (N), turn needs "angle" (degrees).
  void validate() const;

  static Skill make(SkillKind kind, Pose target, std::string label = {});
  static Skill push(Pose target, double force_n, std::string label = {});
  static Skill turn(Pose target, double angle_deg, std::string label = {});
};

struct SkillResult {
  SkillKind kind = SkillKind::move_to;
  bool success = false;
  Pose achieved_pose;
  std::string notes;
};

/// Allowed |offset| per axis before a finger type stops being reliable.
struct ToleranceEnvelope {
  Vec3 position_mm = Vec3::Constant(1e9);
  Vec3 rotation_deg = Vec3::Constant(1e9);

  bool contains(const ApproachOffset& o) const;
};

struct FailureModel {
  std::map<SkillKind, double> skill_success;
  double default_success = 1.0;
  double position_noise_mm = 0.0;   // stddev
  double rotation_noise_deg = 0.0;  // stddev
  double noise_clip_sigma = 3.0;
  std::map<std::string, ToleranceEnvelope> envelopes;
  double out_of_envelope_success = 0.0;
  // A failed push leaves the end effector this far off along the push.
  double failure_slip_mm = 8.0;
  std::map<SkillKind, double> skill_duration;
  double default_skill_duration = 5.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  double base_success(SkillKind k) const;
  double duration(SkillKind k) const;
  /// Largest possible |achieved - target| position deviation.
  double position_noise_bound() const;
  /// Two-level rule: base probability inside the envelope (or when the skill
  /// carries no offset), out-of-envelope probability otherwise.
  double success_probability(const Skill& skill, const std::string& envelope_key) const;
};

/// Draws exactly one uniform and six normals from rng regardless of outcome.
SkillResult execute_skill(const Skill& skill, const FailureModel& model, Rng& rng,
                          const std::string& envelope_key = {});

struct SequenceResult {
  bool success = false;
  std::vector<SkillResult> results;
};

/// Executes in order and stops at the first failure.
SequenceResult run_sequence(const std::vector<Skill>& skills, const FailureModel& model, Rng& rng,
                            const std::string& envelope_key = {});

inline constexpr double kMovedThresholdMm = 5.0;

struct Displacement {
  double mm = 0.0;
  bool moved = false;  // mm > 5, strict
};

Displacement grasp_displacement(const Pose& expected, const Pose& actual);

Pose apply_offset(const Pose& nominal, const ApproachOffset& offset);

}  // namespace fingerfab
