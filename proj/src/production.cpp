#include <fingerfab/production.hpp>

#include <algorithm>
#include <fstream>
#include <queue>

#include <json.hpp>

#include <fingerfab/stl.hpp>

namespace fingerfab {

using nlohmann::ordered_json;

const char* actor_name(Actor a) {
  switch (a) {
    case Actor::robot_A:
      return "robot_A";
    case Actor::printer_A:
      return "printer_A";
    case Actor::printer_B:
      return "printer_B";
    case Actor::coordinator:
      return "coordinator";
  }
  return "?";
}

Actor parse_actor(std::string_view name) {
  for (auto a : {Actor::robot_A, Actor::printer_A, Actor::printer_B, Actor::coordinator}) {
    if (name == actor_name(a)) return a;
  }
  throw std::invalid_argument("unknown actor '" + std::string(name) + "'");
}

std::string to_json_line(const ProductionEvent& e) {
  ordered_json j;
  j["time"] = e.time;
  j["actor"] = actor_name(e.actor);
  j["action"] = e.action;
  j["subject"] = e.subject;
  return j.dump();
}

ProductionEvent parse_json_line(std::string_view line) {
  const auto j = ordered_json::parse(line);
  return {j.at("time").get<double>(), parse_actor(j.at("actor").get<std::string>()),
          j.at("action").get<std::string>(), j.at("subject").get<std::string>()};
}

std::string to_json_lines(const std::vector<ProductionEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

void ProductionSetup::validate() const {
  if (printers.size() != 2) {
    throw ProductionError("a cell needs exactly two printers, got " + std::to_string(printers.size()));
  }
  for (const auto& p : printers) {
    if (!p.service) throw ProductionError("printer " + p.id + " has no print service");
    if (!(p.poll_interval > 0.0)) throw ProductionError("printer " + p.id + " poll interval must be > 0");
  }
  if (printers[0].id == printers[1].id) throw ProductionError("printer ids must differ");
  std::set<std::string> ids;
  for (const auto& m : magazines) {
    if (!ids.insert(m.id).second) throw ProductionError("duplicate magazine id " + m.id);
    m.validate();
  }
  for (const auto& [id, d] : designs) {
    if (d.mesh.triangles.empty()) throw ProductionError("design " + id + " has an empty mesh");
    d.mesh.validate();
  }
  slice.validate();
  robot_model.validate();
  if (print_retries < 0) throw ProductionError("print_retries must be >= 0");
}

// ---------------------------------------------------------------------------
// Discrete-event core

class ProductionCell::Scheduler {
 public:
  explicit Scheduler(Clock& clock) : clock_(clock), now_(clock.now()) {}

  double now() const { return now_; }

  void at(double t, std::function<void()> fn) { queue_.push({t, seq_++, std::move(fn)}); }

  void run() {
    now_ = std::max(now_, clock_.now());
    while (!queue_.empty()) {
      auto entry = queue_.top();
      queue_.pop();
      clock_.sleep_until(entry.time);
      now_ = std::max(now_, entry.time);
      entry.fn();
    }
  }

 private:
  struct Entry {
    double time;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Entry& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  Clock& clock_;
  double now_;
  std::uint64_t seq_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
};

struct ProductionCell::Job {
  FingerRecord record;
  std::string base_magazine;
  std::string gcode_name;
  int print_attempts = 0;
  bool done = false;
  std::function<void()> on_print_started;  // fires once, also on early failure

  void fire_trigger() {
    if (on_print_started) {
      auto fn = std::move(on_print_started);
      on_print_started = nullptr;
      fn();
    }
  }
};

ProductionCell::ProductionCell(ProductionSetup setup, Clock& clock)
    : setup_(std::move(setup)),
      clock_(clock),
      robot_rng_(derive_seed(setup_.robot_model.rng_seed, {0x726f626f74ULL})),
      scheduler_(std::make_unique<Scheduler>(clock)) {
  setup_.validate();
  for (const auto& m : setup_.magazines) {
    magazines_.emplace(m.id, m);
    if (m.kind == MagazineKind::finger_base) initial_bases_ += m.occupied();
  }
}

ProductionCell::~ProductionCell() = default;

const Magazine& ProductionCell::magazine(const std::string& id) const {
  auto it = magazines_.find(id);
  if (it == magazines_.end()) throw ProductionError("unknown magazine " + id);
  return it->second;
}

const PrinterBinding& ProductionCell::printer(const std::string& id) const {
  for (const auto& p : setup_.printers) {
    if (p.id == id) return p;
  }
  throw ProductionError("unknown printer " + id);
}

void ProductionCell::log(Actor actor, std::string action, std::string subject) {
  events_.push_back({scheduler_->now(), actor, std::move(action), std::move(subject)});
}

std::size_t ProductionCell::reserve_qfe_slot(const std::string& magazine_id) {
  const auto& mag = magazine(magazine_id);
  for (std::size_t i = 0; i < mag.slots.size(); ++i) {
    if (!mag.slots[i] && !reserved_slots_.count({magazine_id, i})) {
      reserved_slots_.insert({magazine_id, i});
      return i;
    }
  }
  throw ProductionError("QFE magazine " + magazine_id + " has no free slot");
}

void ProductionCell::check_preconditions(const std::string& design_id, const std::string& printer_id,
                                         const std::string& base_magazine,
                                         const std::string& qfe_magazine, bool need_free_slot) {
  if (!setup_.designs.count(design_id)) throw ProductionError("unknown fingertip design " + design_id);
  const auto& base = magazine(base_magazine);
  if (base.kind != MagazineKind::finger_base) {
    throw ProductionError(base_magazine + " is not a finger-base magazine");
  }
  if (!base.first_occupied()) throw ProductionError("finger-base magazine " + base_magazine + " is empty");
  const auto& qfe = magazine(qfe_magazine);
  if (qfe.kind != MagazineKind::qfe) throw ProductionError(qfe_magazine + " is not a QFE magazine");
  if (need_free_slot) {
    bool free = false;
    for (std::size_t i = 0; i < qfe.slots.size() && !free; ++i) {
      free = !qfe.slots[i] && !reserved_slots_.count({qfe_magazine, i});
    }
    if (!free) throw ProductionError("QFE magazine " + qfe_magazine + " has no free slot");
  }
  const auto& p = printer(printer_id);
  JobState state;
  try {
    state = p.service->get_job_state();
  } catch (const PrintProtocolError& e) {
    throw ProductionError("printer " + printer_id + " unreachable: " + e.what());
  }
  if (state.phase != PrinterPhase::operational) {
    throw ProductionError("printer " + printer_id + " is " + phase_name(state.phase));
  }
}

ProductionCell::Job& ProductionCell::open_job(const std::string& design_id,
                                              const std::string& printer_id,
                                              const std::string& base_magazine,
                                              const std::string& qfe_magazine,
                                              std::optional<std::size_t> qfe_slot) {
  auto job = std::make_unique<Job>();
  job->record.id = "F" + std::to_string(next_finger_++);
  job->record.fingertip_design_id = design_id;
  job->record.printer_id = printer_id;
  job->record.qfe_magazine = qfe_magazine;
  job->record.qfe_slot = qfe_slot;
  job->base_magazine = base_magazine;
  job->gcode_name = design_id + "_" + job->record.id + ".gcode";
  jobs_.push_back(std::move(job));
  return *jobs_.back();
}

void ProductionCell::enqueue_robot(Job& job, std::vector<std::pair<Skill, std::string>> steps,
                                   std::function<void(Job&)> on_success) {
  robot_queue_.push_back({&job, std::move(steps), std::move(on_success)});
  pump_robot();
}

void ProductionCell::pump_robot() {
  if (robot_busy_ || robot_queue_.empty()) return;
  robot_busy_ = true;
  auto request = std::make_shared<RobotRequest>(std::move(robot_queue_.front()));
  robot_queue_.erase(robot_queue_.begin());

  auto step = std::make_shared<std::function<void(std::size_t)>>();
  *step = [this, request, step](std::size_t i) {
    Job& job = *request->job;
    if (i == request->steps.size()) {
      robot_busy_ = false;
      request->on_success(job);
      pump_robot();
      return;
    }
    const auto& [skill, milestone] = request->steps[i];
    log(Actor::robot_A, std::string("skill_begin:") + skill_name(skill.kind), job.record.id);
    scheduler_->at(scheduler_->now() + setup_.robot_model.duration(skill.kind), [this, request, step, i] {
      Job& job = *request->job;
      const auto& [skill, milestone] = request->steps[i];
      const auto result = execute_skill(skill, setup_.robot_model, robot_rng_);
      if (!result.success) {
        log(Actor::robot_A, std::string("skill_failed:") + skill_name(skill.kind), job.record.id);
        robot_busy_ = false;
        finish_job(job, FingerStatus::failed, "robot skill " + skill.label + " failed");
        pump_robot();
        return;
      }
      log(Actor::robot_A, std::string("skill_end:") + skill_name(skill.kind), job.record.id);
      if (!milestone.empty()) {
        const double t = scheduler_->now();
        auto& ts = job.record.timestamps;
        if (milestone == "base_picked") {
          auto& mag = magazines_.at(job.base_magazine);
          const auto slot = *mag.first_occupied();
          job.record.base_id = *mag.slots[slot];
          mag.slots[slot].reset();
          ts.base_picked = t;
        } else if (milestone == "inserted_locked") {
          ts.inserted_locked = t;
        } else if (milestone == "stored_in_qfe") {
          magazines_.at(job.record.qfe_magazine).slots[*job.record.qfe_slot] = job.record.id;
          reserved_slots_.erase({job.record.qfe_magazine, *job.record.qfe_slot});
          ts.stored_in_qfe = t;
        }
        log(Actor::coordinator, milestone, job.record.id);
      }
      (*step)(i + 1);
    });
  };
  (*step)(0);
}

void ProductionCell::start_job(Job& job) {
  log(Actor::coordinator, "finger_started", job.record.id);
  const std::string& base_mag = job.base_magazine;
  enqueue_robot(job,
                {{Skill::make(SkillKind::pick, {}, "pick finger base from " + base_mag), "base_picked"},
                 {Skill::make(SkillKind::insert, {}, "insert base into holder of " + job.record.printer_id), ""},
                 {Skill::turn({}, 90.0, "lock finger holder of " + job.record.printer_id), "inserted_locked"}},
                [this](Job& j) { begin_print(j); });
}

std::string ProductionCell::prepare_gcode(const Job& job) const {
  const auto& design = setup_.designs.at(job.record.fingertip_design_id);
  const auto oriented = rotate_mesh(design.mesh, design.rotation);
  const auto placed = place_on_base(oriented, setup_.placement);

  GcodeDocument doc;
  if (setup_.slice.mode == SlicerMode::stub) {
    doc = stub_slice(placed, setup_.slice);
    doc = append_post_print(doc, setup_.slice.post_print_commands);
  } else {
    const auto dir = setup_.work_dir.empty() ? std::filesystem::temp_directory_path() : setup_.work_dir;
    std::filesystem::create_directories(dir);
    const auto stl = dir / (job.record.id + "_" + job.record.fingertip_design_id + ".stl");
    write_stl_file(stl, placed, StlFormat::binary);
    const auto result = run_slicer(setup_.slice, stl, std::filesystem::path(stl).replace_extension(".gcode"));
    std::ifstream in(result.gcode_path, std::ios::binary);
    doc = parse_gcode(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  }
  return apply_safety_edits(doc, setup_.safety).document.serialize();
}

void ProductionCell::begin_print(Job& job) {
  const auto& p = printer(job.record.printer_id);
  try {
    if (job.print_attempts == 0) {
      const auto gcode = prepare_gcode(job);
      log(Actor::coordinator, "gcode_prepared", job.record.id);
      p.service->upload_gcode(job.gcode_name, gcode);
      log(Actor::coordinator, "uploaded", job.record.id);
    }
    ++job.print_attempts;
    p.service->start_job(job.gcode_name);
  } catch (const std::exception& e) {
    finish_job(job, FingerStatus::failed, std::string("print pipeline: ") + e.what());
    return;
  }
  job.record.timestamps.print_started = scheduler_->now();
  job.record.timestamps.print_finished.reset();
  log(p.actor, "print_started", job.record.id);
  job.fire_trigger();
  schedule_poll(job);
}

void ProductionCell::schedule_poll(Job& job) {
  const auto& p = printer(job.record.printer_id);
  scheduler_->at(scheduler_->now() + p.poll_interval, [this, &job] { poll(job); });
}

void ProductionCell::poll(Job& job) {
  const auto& p = printer(job.record.printer_id);
  JobState state;
  try {
    state = p.service->get_job_state();
  } catch (const PrintProtocolError& e) {
    log(p.actor, "print_failed", job.record.id);
    finish_job(job, FingerStatus::failed, std::string("lost printer: ") + e.what());
    return;
  }
  if (state.phase == PrinterPhase::printing || state.phase == PrinterPhase::paused) {
    if (scheduler_->now() - *job.record.timestamps.print_started > setup_.print_timeout) {
      log(p.actor, "print_failed", job.record.id);
      try {
        p.service->cancel_job();
      } catch (const PrintProtocolError&) {
      }
      finish_job(job, FingerStatus::failed, "print timed out");
      return;
    }
    schedule_poll(job);
    return;
  }
  if (state.phase == PrinterPhase::operational) {
    job.record.timestamps.print_finished = scheduler_->now();
    log(p.actor, "print_finished", job.record.id);
    enqueue_robot(job,
                  {{Skill::make(SkillKind::pick, {}, "unlock holder and pick finger from " + p.id), "finger_picked"},
                   {Skill::make(SkillKind::place, {}, "place finger into " + job.record.qfe_magazine), "stored_in_qfe"}},
                  [this](Job& j) { finish_job(j, FingerStatus::ready); });
    return;
  }
  log(p.actor, "print_failed", job.record.id);
  try {
    p.service->cancel_job();
  } catch (const PrintProtocolError&) {
  }
  if (job.print_attempts <= setup_.print_retries) {
    log(Actor::coordinator, "print_retry", job.record.id);
    begin_print(job);
    return;
  }
  finish_job(job, FingerStatus::failed,
             std::string("print ended in phase ") + phase_name(state.phase) + " at " +
                 std::to_string(static_cast<int>(state.progress * 100.0 + 0.5)) + "%");
}

void ProductionCell::finish_job(Job& job, FingerStatus status, std::string failure) {
  if (job.done) return;
  job.done = true;
  job.record.status = status;
  job.record.failure = std::move(failure);
  if (status != FingerStatus::ready && job.record.qfe_slot) {
    reserved_slots_.erase({job.record.qfe_magazine, *job.record.qfe_slot});
    job.record.qfe_slot.reset();
  }
  log(Actor::coordinator, status == FingerStatus::ready ? "finger_ready" : "finger_failed", job.record.id);
  records_.push_back(job.record);
  job.fire_trigger();
}

void ProductionCell::run_until_idle() { scheduler_->run(); }

FingerRecord ProductionCell::produce_finger(const std::string& design_id, const std::string& printer_id,
                                            const std::string& base_magazine,
                                            const std::string& qfe_magazine) {
  check_preconditions(design_id, printer_id, base_magazine, qfe_magazine, true);
  const auto slot = reserve_qfe_slot(qfe_magazine);
  Job& job = open_job(design_id, printer_id, base_magazine, qfe_magazine, slot);
  start_job(job);
  run_until_idle();
  return job.record;
}

PairResult ProductionCell::produce_finger_pair(const std::string& design_a, const std::string& design_b) {
  const auto& as = setup_.assignment;
  Job& first = open_job(design_a, as.printer_a, as.base_magazine_a, as.qfe_magazine, std::nullopt);
  Job& second = open_job(design_b, as.printer_b, as.base_magazine_b, as.qfe_magazine, std::nullopt);
  log(Actor::coordinator, "pair_requested", first.record.id + "," + second.record.id);

  // Side-by-side slots when the magazine allows.
  std::optional<std::size_t> slot_a, slot_b;
  if (auto it = magazines_.find(as.qfe_magazine); it != magazines_.end()) {
    const auto& slots = it->second.slots;
    for (std::size_t i = 0; i + 1 < slots.size(); ++i) {
      if (!slots[i] && !slots[i + 1] && !reserved_slots_.count({as.qfe_magazine, i}) &&
          !reserved_slots_.count({as.qfe_magazine, i + 1})) {
        slot_a = i;
        slot_b = i + 1;
        reserved_slots_.insert({as.qfe_magazine, i});
        reserved_slots_.insert({as.qfe_magazine, i + 1});
        break;
      }
    }
  }

  auto launch = [this](Job& job, std::optional<std::size_t> slot) {
    try {
      check_preconditions(job.record.fingertip_design_id, job.record.printer_id, job.base_magazine,
                          job.record.qfe_magazine, !slot);
      job.record.qfe_slot = slot ? *slot : reserve_qfe_slot(job.record.qfe_magazine);
    } catch (const ProductionError& e) {
      if (slot) reserved_slots_.erase({job.record.qfe_magazine, *slot});
      log(Actor::coordinator, "precondition_failed", job.record.id);
      finish_job(job, FingerStatus::failed, std::string("precondition: ") + e.what());
      return;
    }
    start_job(job);
  };

  first.on_print_started = [&second, slot_b, launch] { launch(second, slot_b); };
  launch(first, slot_a);
  run_until_idle();
  return {first.record, second.record};
}

}  // namespace fingerfab
