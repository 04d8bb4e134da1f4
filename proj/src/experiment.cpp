#include <fingerfab/experiment.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <stdexcept>

#include <json.hpp>

namespace fingerfab {

using nlohmann::ordered_json;

const char* object_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::key:
      return "key";
    case ObjectKind::ethernet_cable:
      return "ethernet_cable";
    case ObjectKind::battery:
      return "battery";
  }
  return "?";
}

ObjectKind parse_object(std::string_view name) {
  for (auto k : kAllObjects) {
    if (name == object_name(k)) return k;
  }
  throw std::invalid_argument("unknown manipulation object '" + std::string(name) + "'");
}

ApproachOffset OffsetSpec::to_offset(const Vec3& sign) const {
  ApproachOffset o;
  const int i = static_cast<int>(axis);
  (kind == OffsetKind::position ? o.position_mm : o.rotation_deg)[i] = magnitude * sign[i];
  return o;
}

std::vector<OffsetSpec> generate_offset_grid() {
  std::vector<OffsetSpec> grid;
  for (auto axis : {Axis::x, Axis::y, Axis::z}) {
    for (double mm : kPositionOffsetsMm) grid.push_back({axis, OffsetKind::position, mm});
  }
  for (auto axis : {Axis::x, Axis::y, Axis::z}) {
    for (double deg : kRotationOffsetsDeg) grid.push_back({axis, OffsetKind::rotation, deg});
  }
  return grid;
}

TaskLayout TaskLayout::standard() {
  TaskLayout l;
  double y = -100.0;
  for (auto k : kAllObjects) {
    l.storage[k].position = Vec3(450.0, y, 120.0);
    l.target[k].position = Vec3(550.0, y, 120.0);
    y += 100.0;
  }
  return l;
}

std::vector<Skill> regular_task_steps(ObjectKind object, const TaskLayout& layout) {
  return offset_task_steps(object, {}, layout);
}

std::vector<Skill> offset_task_steps(ObjectKind object, const ApproachOffset& offset,
                                     const TaskLayout& layout) {
  const auto obj = ManipulationObject::of(object);
  const std::string name = object_name(object);
  const Pose& storage = layout.storage.at(object);
  const Pose& target = layout.target.at(object);

  auto grasp = [&](const Pose& nominal, std::string label) {
    Skill s = Skill::make(SkillKind::pick, apply_offset(nominal, offset), std::move(label));
    s.approach_offset = offset;
    return s;
  };

  std::vector<Skill> steps;
  steps.push_back(grasp(storage, "pick and extract " + name + " from storage"));
  steps.push_back(Skill::make(SkillKind::insert, target, "insert " + name + " into target slot"));
  if (obj.requires_turn) steps.push_back(Skill::turn(target, layout.turn_angle_deg, "turn key in lock"));
  steps.push_back(grasp(target, "pick " + name + " from target slot"));
  steps.push_back(Skill::make(SkillKind::insert, storage, "insert " + name + " back into storage"));
  return steps;
}

std::string ExperimentResult::kind_label() const {
  switch (kind) {
    case ExperimentKind::regular:
      return "regular";
    case ExperimentKind::non_regular:
      return std::string("non_regular:") + object_name(object);
    case ExperimentKind::grasp_stability:
      return "grasp_stability";
    case ExperimentKind::offset:
      return offset && offset->kind == OffsetKind::rotation ? "offset_rotation" : "offset_position";
  }
  return "?";
}

ExperimentResult grasp_stability_experiment(ObjectKind finger_type, ObjectKind object, const Pose& grasp,
                                            const FailureModel& model, Rng& rng, const TaskLayout& layout,
                                            const StabilityOptions& opts) {
  ExperimentResult r;
  r.kind = ExperimentKind::grasp_stability;
  r.finger_type = finger_type;
  r.object = object;
  r.success = true;
  for (int d = 0; d < 2; ++d) {
    const Vec3 dir = layout.push_directions[d].normalized();
    const auto push = Skill::push(grasp, layout.push_force_n, "push against ring, direction " + std::to_string(d + 1));
    auto result = execute_skill(push, model, rng);
    Pose actual = result.achieved_pose;
    if (!result.success) actual.position += dir * model.failure_slip_mm;
    actual.position += dir * opts.injected_slip_mm[d];
    const auto disp = grasp_displacement(grasp, actual);
    r.displacement_mm.push_back(disp.mm);
    result.achieved_pose = actual;
    r.transcript.push_back(std::move(result));
    if (disp.moved && r.success) {
      r.success = false;
      char buf[96];
      std::snprintf(buf, sizeof buf, "object moved %.3f mm (> 5 mm) in direction %d", disp.mm, d + 1);
      r.detail = buf;
    }
  }
  return r;
}

std::size_t TrialReport::count(ExperimentKind k) const {
  std::size_t n = 0;
  for (const auto& r : results) n += r.kind == k;
  return n;
}

std::map<std::string, int> TaskCell::finger_locations() const {
  std::map<std::string, int> where;
  for (const auto& m : qfe_magazines) {
    for (const auto& s : m.slots) {
      if (s) ++where[*s];
    }
  }
  return where;
}

namespace {

struct SlotRef {
  std::size_t magazine;
  std::size_t slot;
};

std::vector<std::pair<SlotRef, SlotRef>> find_pairs(const TaskCell& cell, ObjectKind type) {
  auto is_type = [&](const MagazineSlot& s) {
    if (!s) return false;
    auto it = cell.finger_types.find(*s);
    return it != cell.finger_types.end() && it->second == type;
  };
  std::vector<std::pair<SlotRef, SlotRef>> pairs;
  for (std::size_t m = 0; m < cell.qfe_magazines.size(); ++m) {
    const auto& slots = cell.qfe_magazines[m].slots;
    for (std::size_t i = 0; i + 1 < slots.size(); ++i) {
      if (is_type(slots[i]) && is_type(slots[i + 1])) {
        pairs.push_back({{m, i}, {m, i + 1}});
        ++i;
      }
    }
  }
  return pairs;
}

std::vector<Skill> qfe_skills(const Pose& magazine_pose, bool attach) {
  Pose above = magazine_pose;
  above.position.z() += 50.0;
  Skill contact = Skill::make(SkillKind::move_to_contact, magazine_pose, "press onto magazine trigger tongues");
  contact.parameters["force"] = 10.0;
  return {Skill::make(SkillKind::move_to, above, "position QFE units above trigger tongues"), contact,
          Skill::make(attach ? SkillKind::insert : SkillKind::place, magazine_pose,
                      attach ? "close gripper, insert finger tongues" : "open gripper, release finger tongues"),
          Skill::make(SkillKind::move_to, above, "move up, secure stone drops")};
}

template <typename Fn>
void guarded(std::mutex* m, Fn&& fn) {
  if (m) {
    std::lock_guard lock(*m);
    fn();
  } else {
    fn();
  }
}

}  // namespace

TrialReport run_trial(ObjectKind finger_type, TaskCell& cell, TaskRobot& robot, const FailureModel& model,
                      std::uint64_t seed, const TrialOptions& opts) {
  TrialReport report;
  report.trial = opts.trial_index;
  report.finger_type = finger_type;
  auto stream = [&](std::uint64_t experiment) {
    return Rng(derive_seed(seed, {static_cast<std::uint64_t>(opts.trial_index),
                                  static_cast<std::uint64_t>(finger_type), experiment}));
  };
  const std::string own = object_name(finger_type);
  const auto& layout = cell.layout;

  // 1) Insert finger pair into the QFE mechanism.
  std::optional<std::pair<SlotRef, SlotRef>> pair;
  guarded(opts.magazine_guard, [&] {
    const auto pairs = find_pairs(cell, finger_type);
    const std::size_t k = opts.fresh_pairs ? static_cast<std::size_t>(opts.trial_index) : 0;
    if (k < pairs.size()) pair = pairs[k];
  });
  if (!pair) {
    report.notes = std::string("no ") + (opts.fresh_pairs ? "fresh " : "") + own + " finger pair in the QFE magazines";
    return report;
  }
  if (robot.left.phase != QfePhase::idle || robot.right.phase != QfePhase::idle) {
    report.notes = "gripper QFE units are not idle";
    return report;
  }
  const Pose magazine_pose;
  {
    SequenceResult seq;
    for (int attempt = 0; attempt < std::max(1, opts.qfe_attempts) && !seq.success; ++attempt) {
      Rng rng = stream(100 + static_cast<std::uint64_t>(attempt));
      seq = run_sequence(qfe_skills(magazine_pose, true), model, rng);
    }
    if (!seq.success) {
      report.notes = "QFE attach failed: " + seq.results.back().notes;
      return report;
    }
  }
  guarded(opts.magazine_guard, [&] {
    auto& a = cell.qfe_magazines[pair->first.magazine].slots[pair->first.slot];
    auto& b = cell.qfe_magazines[pair->second.magazine].slots[pair->second.slot];
    robot.left = qfe_attach(robot.left, a);
    robot.right = qfe_attach(robot.right, b);
  });
  report.qfe_attach_success = true;
  report.fingers = {*robot.left.holding, *robot.right.holding};

  // 2) Regular task experiment.
  {
    Rng rng = stream(0);
    const auto seq = run_sequence(regular_task_steps(finger_type, layout), model, rng, own);
    ExperimentResult r;
    r.kind = ExperimentKind::regular;
    r.finger_type = r.object = finger_type;
    r.success = seq.success;
    r.transcript = seq.results;
    if (!seq.success) r.detail = seq.results.back().notes;
    report.results.push_back(std::move(r));
  }

  // 3) Non-regular: the same steps with the other two objects.
  std::uint64_t idx = 1;
  for (auto other : kAllObjects) {
    if (other == finger_type) continue;
    Rng rng = stream(idx++);
    const auto seq = run_sequence(regular_task_steps(other, layout), model, rng, object_name(other));
    ExperimentResult r;
    r.kind = ExperimentKind::non_regular;
    r.finger_type = finger_type;
    r.object = other;
    r.success = seq.success;
    r.transcript = seq.results;
    if (!seq.success) r.detail = seq.results.back().notes;
    report.results.push_back(std::move(r));
  }

  // 4) Grasp stability.
  {
    Rng rng = stream(3);
    const Pose& grasp = layout.storage.at(finger_type);
    const auto pick = execute_skill(Skill::make(SkillKind::pick, grasp, "grasp " + own + " for stability test"),
                                    model, rng, own);
    ExperimentResult r;
    if (pick.success) {
      r = grasp_stability_experiment(finger_type, finger_type, grasp, model, rng, layout);
      r.transcript.insert(r.transcript.begin(), pick);
    } else {
      r.kind = ExperimentKind::grasp_stability;
      r.finger_type = r.object = finger_type;
      r.transcript = {pick};
      r.detail = "grasp failed";
    }
    report.results.push_back(std::move(r));
  }

  // 5) Regular task with single-axis offsets at the grasp approach poses.
  const auto grid = generate_offset_grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Rng rng = stream(4 + k);
    const auto seq =
        run_sequence(offset_task_steps(finger_type, grid[k].to_offset(opts.offset_sign), layout), model, rng, own);
    ExperimentResult r;
    r.kind = ExperimentKind::offset;
    r.finger_type = r.object = finger_type;
    r.offset = grid[k];
    r.success = seq.success;
    r.transcript = seq.results;
    if (!seq.success) r.detail = seq.results.back().notes;
    report.results.push_back(std::move(r));
  }

  // 6) Place finger pair back.
  {
    SequenceResult seq;
    for (int attempt = 0; attempt < std::max(1, opts.qfe_attempts) && !seq.success; ++attempt) {
      Rng rng = stream(200 + static_cast<std::uint64_t>(attempt));
      seq = run_sequence(qfe_skills(magazine_pose, false), model, rng);
    }
    report.qfe_detach_success = seq.success;
    if (!seq.success) report.notes = "QFE detach failed (" + seq.results.back().notes + "); fingers returned by operator";
  }
  guarded(opts.magazine_guard, [&] {
    auto& a = cell.qfe_magazines[pair->first.magazine].slots[pair->first.slot];
    auto& b = cell.qfe_magazines[pair->second.magazine].slots[pair->second.slot];
    robot.left = qfe_detach(robot.left, a);
    robot.right = qfe_detach(robot.right, b);
  });
  report.valid = true;
  return report;
}

const SuccessRow* SuccessTable::find(ObjectKind type, const std::string& kind, const std::string& axis,
                                     const std::string& magnitude) const {
  for (const auto& r : rows) {
    if (r.finger_type == type && r.experiment_kind == kind && r.axis == axis && r.magnitude == magnitude) return &r;
  }
  return nullptr;
}

namespace {

std::string magnitude_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

SuccessTable aggregate(const std::vector<TrialReport>& reports) {
  SuccessTable table;
  std::map<std::tuple<int, std::string, std::string, std::string>, std::size_t> index;
  for (const auto& rep : reports) {
    for (const auto& r : rep.results) {
      const std::string axis = r.offset ? axis_name(r.offset->axis) : "";
      const std::string mag = r.offset ? magnitude_text(r.offset->magnitude) : "";
      const auto key = std::make_tuple(static_cast<int>(rep.finger_type), r.kind_label(), axis, mag);
      auto it = index.find(key);
      if (it == index.end()) {
        it = index.emplace(key, table.rows.size()).first;
        table.rows.push_back({rep.finger_type, r.kind_label(), axis, mag, 0, 0});
      }
      auto& row = table.rows[it->second];
      ++row.attempts;
      row.successes += r.success;
    }
  }
  return table;
}

std::size_t CampaignResult::experiment_count() const {
  std::size_t n = 0;
  for (const auto& r : reports) n += r.results.size();
  return n;
}

CampaignResult run_campaign(int trials, const std::vector<ObjectKind>& finger_types, TaskCell& cell,
                            const FailureModel& model, std::uint64_t seed, const CampaignOptions& opts) {
  if (trials < 1) throw std::invalid_argument("a campaign needs at least one trial");
  model.validate();
  CampaignResult out;

  auto run_type = [&](ObjectKind type, TaskRobot& robot, std::mutex* guard) {
    std::vector<TrialReport> reps;
    for (int t = 0; t < trials; ++t) {
      TrialOptions to;
      to.trial_index = t;
      to.fresh_pairs = opts.fresh_pairs;
      to.offset_sign = opts.offset_sign;
      to.magazine_guard = guard;
      reps.push_back(run_trial(type, cell, robot, model, seed, to));
    }
    return reps;
  };

  std::vector<std::vector<TrialReport>> per_type(finger_types.size());
  if (opts.parallel) {
    std::mutex guard;
    std::vector<TaskRobot> robots(finger_types.size());
    std::vector<std::future<std::vector<TrialReport>>> futures;
    for (std::size_t i = 0; i < finger_types.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] { return run_type(finger_types[i], robots[i], &guard); }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) per_type[i] = futures[i].get();
  } else {
    TaskRobot robot;
    for (std::size_t i = 0; i < finger_types.size(); ++i) per_type[i] = run_type(finger_types[i], robot, nullptr);
  }

  // Trial-major order: trial 0 for every type, then trial 1, ...
  for (int t = 0; t < trials; ++t) {
    for (auto& reps : per_type) out.reports.push_back(std::move(reps[static_cast<std::size_t>(t)]));
  }
  out.table = aggregate(out.reports);
  return out;
}

namespace {

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string render_csv(const SuccessTable& table) {
  std::string out = "finger_type,experiment_kind,axis,magnitude,successes,attempts,rate\n";
  for (const auto& r : table.rows) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.6f", r.rate());
    out += std::string(object_name(r.finger_type)) + "," + r.experiment_kind + "," + r.axis + "," + r.magnitude +
           "," + std::to_string(r.successes) + "," + std::to_string(r.attempts) + "," + rate + "\n";
  }
  return out;
}

std::string render_json(const std::vector<TrialReport>& reports, const SuccessTable& table) {
  ordered_json root;
  root["experiment_count"] = 0;
  ordered_json reps = ordered_json::array();
  std::size_t total = 0;
  for (const auto& rep : reports) {
    ordered_json jr;
    jr["trial"] = rep.trial;
    jr["finger_type"] = object_name(rep.finger_type);
    jr["valid"] = rep.valid;
    jr["qfe_attach_success"] = rep.qfe_attach_success;
    jr["qfe_detach_success"] = rep.qfe_detach_success;
    jr["fingers"] = rep.fingers;
    jr["notes"] = rep.notes;
    ordered_json results = ordered_json::array();
    for (const auto& r : rep.results) {
      ordered_json je;
      je["experiment_kind"] = r.kind_label();
      je["object"] = object_name(r.object);
      if (r.offset) {
        je["axis"] = axis_name(r.offset->axis);
        je["magnitude"] = r.offset->magnitude;
      }
      je["success"] = r.success;
      if (!r.displacement_mm.empty()) je["displacement_mm"] = r.displacement_mm;
      je["detail"] = r.detail;
      ordered_json tr = ordered_json::array();
      for (const auto& s : r.transcript) {
        tr.push_back({{"skill", skill_name(s.kind)},
                      {"success", s.success},
                      {"achieved_position", vec_json(s.achieved_pose.position)},
                      {"notes", s.notes}});
      }
      je["transcript"] = std::move(tr);
      results.push_back(std::move(je));
    }
    total += rep.results.size();
    jr["results"] = std::move(results);
    reps.push_back(std::move(jr));
  }
  root["experiment_count"] = total;
  root["reports"] = std::move(reps);
  ordered_json rows = ordered_json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"finger_type", object_name(r.finger_type)},
                    {"experiment_kind", r.experiment_kind},
                    {"axis", r.axis},
                    {"magnitude", r.magnitude},
                    {"successes", r.successes},
                    {"attempts", r.attempts},
                    {"rate", r.rate()}});
  }
  root["table"] = std::move(rows);
  return root.dump(2) + "\n";
}

void emit_report(const std::vector<TrialReport>& reports, const SuccessTable& table, ReportFormat format,
                 const std::filesystem::path& out) {
  if (reports.empty()) throw ReportError("no trial reports to emit");
  const std::string text = format == ReportFormat::csv ? render_csv(table) : render_json(reports, table);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw ReportError("cannot write report to " + out.string());
  f << text;
  f.flush();
  if (!f) throw ReportError("short write to " + out.string());
}

}  // namespace fingerfab
