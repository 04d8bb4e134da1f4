#include <fingerfab/robot.hpp>

#include <algorithm>
#include <stdexcept>

namespace fingerfab {

const char* skill_name(SkillKind k) {
  switch (k) {
    case SkillKind::move_to:
      return "move_to";
    case SkillKind::move_to_contact:
      return "move_to_contact";
    case SkillKind::pick:
      return "pick";
    case SkillKind::place:
      return "place";
    case SkillKind::insert:
      return "insert";
    case SkillKind::turn:
      return "turn";
    case SkillKind::push:
      return "push";
  }
  return "?";
}

SkillKind parse_skill_kind(std::string_view name) {
  for (auto k : kAllSkillKinds) {
    if (name == skill_name(k)) return k;
  }
  throw std::invalid_argument("unknown skill kind '" + std::string(name) + "'");
}

void Skill::validate() const {
  if (kind == SkillKind::push && !parameters.count("force")) {
    throw std::invalid_argument("push skill needs a 'force' parameter");
  }
  if (kind == SkillKind::turn && !parameters.count("angle")) {
    throw std::invalid_argument("turn skill needs an 'angle' parameter");
  }
}

Skill Skill::make(SkillKind kind, Pose target, std::string label) {
  Skill s;
  s.kind = kind;
  s.target = std::move(target);
  s.label = std::move(label);
  return s;
}

Skill Skill::push(Pose target, double force_n, std::string label) {
  Skill s = make(SkillKind::push, std::move(target), std::move(label));
  s.parameters["force"] = force_n;
  return s;
}

Skill Skill::turn(Pose target, double angle_deg, std::string label) {
  Skill s = make(SkillKind::turn, std::move(target), std::move(label));
  s.parameters["angle"] = angle_deg;
  return s;
}

bool ToleranceEnvelope::contains(const ApproachOffset& o) const {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(o.position_mm[i]) > position_mm[i]) return false;
    if (std::abs(o.rotation_deg[i]) > rotation_deg[i]) return false;
  }
  return true;
}

namespace {

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(what + " must lie in [0, 1]");
}

}  // namespace

void FailureModel::validate() const {
  check_probability(default_success, "default_success");
  check_probability(out_of_envelope_success, "out_of_envelope_success");
  for (const auto& [k, p] : skill_success) check_probability(p, std::string("success of ") + skill_name(k));
  if (position_noise_mm < 0.0 || rotation_noise_deg < 0.0 || noise_clip_sigma < 0.0) {
    throw std::invalid_argument("noise parameters must be >= 0");
  }
  for (const auto& [key, env] : envelopes) {
    if ((env.position_mm.array() < 0.0).any() || (env.rotation_deg.array() < 0.0).any()) {
      throw std::invalid_argument("envelope '" + key + "' has negative limits");
    }
  }
  if (failure_slip_mm < 0.0) throw std::invalid_argument("failure_slip_mm must be >= 0");
  if (default_skill_duration < 0.0) throw std::invalid_argument("skill durations must be >= 0");
  for (const auto& [k, d] : skill_duration) {
    if (d < 0.0) throw std::invalid_argument("skill durations must be >= 0");
  }
}

double FailureModel::base_success(SkillKind k) const {
  auto it = skill_success.find(k);
  return it == skill_success.end() ? default_success : it->second;
}

double FailureModel::duration(SkillKind k) const {
  auto it = skill_duration.find(k);
  return it == skill_duration.end() ? default_skill_duration : it->second;
}

double FailureModel::position_noise_bound() const {
  return noise_clip_sigma * position_noise_mm * std::sqrt(3.0);
}

double FailureModel::success_probability(const Skill& skill, const std::string& envelope_key) const {
  const double base = base_success(skill.kind);
  if (!skill.approach_offset.any()) return base;
  auto it = envelopes.find(envelope_key);
  if (it == envelopes.end() || it->second.contains(skill.approach_offset)) return base;
  return out_of_envelope_success;
}

Pose apply_offset(const Pose& nominal, const ApproachOffset& offset) {
  Pose p = nominal;
  p.position += offset.position_mm;
  const auto& r = offset.rotation_deg;
  if (!r.isZero(0.0)) {
    p.orientation = Rotation::from_euler_xyz_deg(r.x(), r.y(), r.z()).compose(nominal.orientation);
  }
  return p;
}

SkillResult execute_skill(const Skill& skill, const FailureModel& model, Rng& rng,
                          const std::string& envelope_key) {
  skill.validate();
  const double u = rng.uniform();
  const double clip = model.noise_clip_sigma;
  auto draw = [&](double sigma) { return std::clamp(rng.normal(), -clip, clip) * sigma; };
  Vec3 dp, dr;
  for (int i = 0; i < 3; ++i) dp[i] = draw(model.position_noise_mm);
  for (int i = 0; i < 3; ++i) dr[i] = draw(model.rotation_noise_deg);

  const double p = model.success_probability(skill, envelope_key);
  SkillResult r;
  r.kind = skill.kind;
  r.success = u < p;
  r.achieved_pose.position = skill.target.position + dp;
  r.achieved_pose.orientation = dr.isZero(0.0)
                                    ? skill.target.orientation
                                    : Rotation::from_euler_xyz_deg(dr.x(), dr.y(), dr.z())
                                          .compose(skill.target.orientation);
  r.notes = skill.label;
  if (!r.success) {
    if (!r.notes.empty()) r.notes += ": ";
    r.notes += skill.approach_offset.any() && p != model.base_success(skill.kind)
                   ? "failed outside tolerance envelope"
                   : "failed";
  }
  return r;
}

SequenceResult run_sequence(const std::vector<Skill>& skills, const FailureModel& model, Rng& rng,
                            const std::string& envelope_key) {
  if (skills.empty()) throw std::invalid_argument("skill sequence must not be empty");
  SequenceResult out;
  for (const auto& s : skills) {
    out.results.push_back(execute_skill(s, model, rng, envelope_key));
    if (!out.results.back().success) return out;
  }
  out.success = true;
  return out;
}

Displacement grasp_displacement(const Pose& expected, const Pose& actual) {
  const double d = (actual.position - expected.position).norm();
  return {d, d > kMovedThresholdMm};
}

}  // namespace fingerfab
